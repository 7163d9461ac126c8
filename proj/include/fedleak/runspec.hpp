#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "fedleak/attack.hpp"
#include "fedleak/config.hpp"
#include "fedleak/defenses.hpp"

namespace fedleak::runspec {

// A fully materialized experiment: corpora, canaries, pretrained base, and
// the resolved federated configuration. Everything is a pure function of the
// RunConfig, so two prepare() calls agree bit for bit.
struct Experiment {
  config::RunConfig cfg;
  lm::ModelConfig mcfg;
  fed::FedConfig fcfg;
  corpus::CanarySet canaries;
  std::vector<corpus::Corpus> clients;
  std::vector<std::string> validation;
  std::vector<std::string> d_reg;  // attacker regular reference corpus
  std::vector<std::string> d_sen;  // attacker sensitive-style reference texts
  ModelWeights base;
  std::unique_ptr<defenses::DpCombiner> dp;  // fcfg.combiner targets this
  defenses::ScrubStats scrub_stats;
  size_t dedup_removed = 0;
  std::optional<attack::AttackAssets> assets;

  Experiment() = default;
  Experiment(Experiment&&) = default;
  Experiment& operator=(Experiment&&) = default;
};

// cache_dir != "": the pretrained base is stored there keyed by a hash of the
// fields it depends on, so experiments differing only downstream share it.
Experiment prepare(const config::RunConfig& cfg, const std::string& cache_dir = "");

// Creates the store on first use; afterwards validates the config hash so a
// store can never be resumed under a different experiment.
SnapshotStore open_or_create_store(const Experiment& exp, const std::string& dir);

// Runs or resumes federated training, wiring up the in-run adversary for the
// dynamic attack modes.
fed::RunResult train(Experiment& exp, SnapshotStore& store);

// Reference fine-tunes, sensitive layers, and the regressor; built once and
// cached under dir (when non-empty) for reuse across commands.
const attack::AttackAssets& ensure_assets(Experiment& exp, const std::string& dir = "");

double validation_perplexity(const Experiment& exp, const ModelWeights& w);

}  // namespace fedleak::runspec
