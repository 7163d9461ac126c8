#pragma once

#include <string>
#include <vector>

#include "fedleak/checkpoint.hpp"
#include "fedleak/model.hpp"
#include "fedleak/stats.hpp"

namespace fedleak::forensics {

struct VriConfig {
  stats::TTestVariant variant = stats::TTestVariant::paired;
  double significance = 0.05;
  int top_k_layers = 0;   // 0 = ceil(0.75 * candidate layers)
  int ref_epochs = 2;     // reference fine-tune length
  double ref_lr = 2e-3;
  int batch_size = 8;
  uint64_t seed = 1;
};

// Per-layer Frobenius norms of (a - b), ordered like `layers`.
std::vector<std::pair<std::string, double>> layer_delta(const ModelWeights& a,
                                                        const ModelWeights& b,
                                                        const std::vector<std::string>& layers);

// Attention/MLP layers ranked by drift of `tuned` away from `base`; top-k by
// norm (ties keep canonical order), returned in canonical layer order.
std::vector<std::string> select_sensitive_layers(const lm::ModelConfig& cfg,
                                                 const ModelWeights& base,
                                                 const ModelWeights& tuned, int k = 0);

struct References {
  ModelWeights g_r;  // base fine-tuned on regular-only data
  ModelWeights g_s;  // base fine-tuned on regular + sensitive data
};

References build_references(const lm::ModelConfig& cfg, const ModelWeights& base,
                            const std::vector<std::string>& d_reg,
                            const std::vector<std::string>& d_sen, const VriConfig& vcfg);

struct VriVerdict {
  bool victim = false;
  stats::TTestResult vs_regular;    // delta_i against delta_r (must reject)
  stats::TTestResult vs_sensitive;  // delta_i against delta_s (must accept)
  std::vector<double> delta_i;
};

// Victim iff delta_i differs from the regular reference profile and is
// indistinguishable from the sensitive reference profile.
VriVerdict classify_deltas(const std::vector<double>& delta_i, const std::vector<double>& delta_r,
                           const std::vector<double>& delta_s, const VriConfig& vcfg);

VriVerdict identify_victim_round(const ModelWeights& g_i, const ModelWeights& g_base,
                                 const References& refs, const std::vector<std::string>& layers,
                                 const VriConfig& vcfg);

struct RoundVerdict {
  int round = 0;
  VriVerdict verdict;
};

std::vector<RoundVerdict> vri_over_store(const SnapshotStore& store, const ModelWeights& g_base,
                                         const References& refs,
                                         const std::vector<std::string>& layers,
                                         const VriConfig& vcfg);

}  // namespace fedleak::forensics
