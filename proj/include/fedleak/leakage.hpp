#pragma once

#include <optional>
#include <string>
#include <vector>

#include "fedleak/checkpoint.hpp"
#include "fedleak/corpus.hpp"
#include "fedleak/decode.hpp"
#include "fedleak/model.hpp"

namespace fedleak::leakage {

struct ReconstructionConfig {
  int beam_width = 3;   // 2..5
  int top_k = 3;
  int extra_tokens = 4;  // decode budget beyond the secret length

  void validate() const;
};

struct ReconstructionResult {
  int nsr = 0;
  std::vector<uint8_t> hits;  // aligned with the canary set
};

// A canary counts as reconstructed when its exact secret appears in any of
// the top-k beam continuations of its prefix.
ReconstructionResult reconstruct(const lm::ModelConfig& cfg, const ModelWeights& w,
                                 const corpus::CanarySet& canaries,
                                 const ReconstructionConfig& rcfg);

// Union semantics over a set of models (an attack's evaluation set).
ReconstructionResult reconstruct_union(const lm::ModelConfig& cfg,
                                       const std::vector<const ModelWeights*>& models,
                                       const corpus::CanarySet& canaries,
                                       const ReconstructionConfig& rcfg);

struct ExposureResult {
  double exposure = 0.0;
  int rank = 1;               // conservative: ties count the true secret last
  double true_log_lik = 0.0;  // natural-log likelihood of the secret given the prefix
};

ExposureResult exposure_of(const lm::ModelConfig& cfg, const ModelWeights& w,
                           const corpus::CanaryRecord& r);

std::vector<ExposureResult> exposure_many(const lm::ModelConfig& cfg, const ModelWeights& w,
                                          const corpus::CanarySet& canaries);

// Reference scorer for tests: per-candidate full forward passes, no trie.
double candidate_log_lik(const lm::ModelConfig& cfg, const ModelWeights& w,
                         const std::string& prefix, const std::string& candidate);

struct TrendPoint {
  int round = 0;
  bool victim_present = false;
  double mean_exposure = 0.0;
};

std::vector<TrendPoint> exposure_trend(const lm::ModelConfig& cfg, const SnapshotStore& store,
                                       const corpus::CanarySet& canaries);

struct MiConfig {
  double max_fpr = 0.10;
  uint64_t seed = 1;  // calibration/evaluation split

  void validate() const;
};

struct MiResult {
  double threshold = 0.0;  // log-likelihood-ratio threshold (log Pr_ref - log Pr_target)
  double calibration_fpr = 0.0;
  int tp = 0, fp = 0, tn = 0, fn = 0;
  double recall = 0.0, precision = 0.0;
};

double log_likelihood_ratio(const lm::ModelConfig& cfg, const ModelWeights& target,
                            const ModelWeights& reference, const std::string& text);

// Threshold = highest value keeping count-based FPR <= max_fpr on the
// calibration half of the non-members; metrics come from the other half.
MiResult membership_inference(const lm::ModelConfig& cfg, const ModelWeights& target,
                              const ModelWeights& reference,
                              const std::vector<std::string>& members,
                              const std::vector<std::string>& non_members, const MiConfig& mcfg);

struct LeakageReport {
  std::string config_hash;
  std::string subject;  // which model set the report covers
  int n_canaries = 0;
  int nsr = 0;
  std::vector<std::pair<std::string, int>> nsr_by_category;
  std::vector<uint8_t> hits;  // per-canary reconstruction outcomes
  std::vector<double> exposures;
  double mean_exposure = 0.0;
  double median_exposure = 0.0;
  double validation_perplexity = 0.0;
  bool has_mi = false;
  MiResult mi;
};

LeakageReport build_report(const std::string& config_hash, const std::string& subject,
                           const corpus::CanarySet& canaries, const ReconstructionResult& recon,
                           const std::vector<ExposureResult>& exposures,
                           double validation_perplexity, const std::optional<MiResult>& mi);

void write_report(const std::string& path, const LeakageReport& report);
LeakageReport read_report(const std::string& path);

}  // namespace fedleak::leakage
