#pragma once

#include <string>
#include <vector>

#include "fedleak/leakage.hpp"
#include "fedleak/runspec.hpp"

namespace fedleak::cli {

struct CommonArgs {
  std::string config_path;
  std::string out_override;
};

struct AttackArgs : CommonArgs {
  std::string baseline;  // non-empty: emit a baseline snapshot set instead
};

struct EvalArgs : CommonArgs {
  std::string subject = "attack";  // attack | lr | ir | fp | mu | base
  std::vector<std::string> models;  // explicit checkpoints override the subject
  bool trend = false;
};

struct SweepArgs : CommonArgs {
  std::vector<int> repetitions;
};

// Parses the config, applies the out_dir override (--out wins over the
// FEDLEAK_OUT environment variable), and prepares the experiment with the
// shared base cache under <out_dir>/cache.
runspec::Experiment load_experiment(const CommonArgs& args);
std::string resolve_out_dir(const std::string& configured, const std::string& flag_override);

std::string store_dir(const runspec::Experiment& exp);
std::string assets_dir(const runspec::Experiment& exp);

struct EvalOutcome {
  leakage::LeakageReport report;
  attack::AttackOutput output;
};

// Shared by eval and sweep: builds the subject's model set, evaluates
// reconstruction on the set union, and exposure / perplexity / membership
// inference on its unweighted aggregate.
EvalOutcome evaluate_subject(runspec::Experiment& exp, SnapshotStore& store,
                             const std::string& subject);

int cmd_train(const CommonArgs& args);
int cmd_attack(const AttackArgs& args);
int cmd_eval(const EvalArgs& args);
int cmd_vri(const CommonArgs& args);
int cmd_sweep(const SweepArgs& args);

}  // namespace fedleak::cli
