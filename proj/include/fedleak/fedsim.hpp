#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "fedleak/checkpoint.hpp"
#include "fedleak/corpus.hpp"
#include "fedleak/train.hpp"

namespace fedleak::fed {

struct FedConfig {
  int n_rounds = 40;
  int n_clients = 100;
  int clients_per_round = 20;
  int local_epochs = 1;
  double lr = 5e-3;
  double lr_final_frac = 0.1;  // linear decay endpoint as a fraction of lr
  lm::Optimizer optimizer = lm::Optimizer::adam;
  int batch_size = 8;
  uint64_t seed = 1;
  bool oracle = false;             // persist victim_local snapshots + flags
  std::string baseline = "none";   // none | fp (forced) | mu (malicious update)
  std::vector<int> victim_ids;
  std::vector<int> adversary_ids;
  // Optional per-round victim eligibility (size n_rounds); empty = eligible.
  std::vector<uint8_t> victim_allowed;
  // Per-sample gradient combiner for every client (privacy defense hook).
  const lm::GradCombiner* combiner = nullptr;

  void validate() const;
  double round_lr(int round) const;
};

// Eq-style federated average: sum_i (d_i / d) * theta_i.
ModelWeights fedavg(const std::vector<const ModelWeights*>& updates,
                    const std::vector<int64_t>& line_counts);

// alpha * g_a + (1 - alpha) * g_l; alpha = 0 returns g_l exactly.
ModelWeights adversary_inject(const ModelWeights& g_l, const ModelWeights& g_a, double alpha);

// Called for adversary-controlled clients after honest local training; the
// returned weights are what the client submits for aggregation.
class AdversaryHook {
 public:
  virtual ~AdversaryHook() = default;
  virtual ModelWeights update(int round, int client, const ModelWeights& global,
                              ModelWeights local) = 0;
};

struct RoundLog {
  int round = 0;
  std::vector<int> participants;
  std::vector<int> victims;  // victims among the participants
  std::vector<double> agg_weights;
  double lr = 0.0;
  double wall_ms = 0.0;
};

struct RunResult {
  ModelWeights final_weights;
  std::vector<RoundLog> logs;  // freshly executed rounds only
};

// Runs (or resumes) FedAvg from `base`, persisting one global snapshot per
// round into `store`. Per-round randomness is derived from (seed, round), so
// a resumed run reproduces the uninterrupted one bit for bit.
RunResult run_training(const lm::ModelConfig& mcfg, const FedConfig& cfg,
                       const ModelWeights& base,
                       const std::vector<corpus::Corpus>& client_corpora, SnapshotStore& store,
                       AdversaryHook* hook = nullptr);

std::vector<int> sample_participants(const FedConfig& cfg, int round);

}  // namespace fedleak::fed
