#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fedleak/checkpoint.hpp"
#include "fedleak/fedsim.hpp"
#include "fedleak/forensics.hpp"
#include "fedleak/mdm.hpp"

namespace fedleak::attack {

enum class Mode { static_rounds, static_plus, dynamic, dynamic_plus };
Mode mode_from_string(const std::string& s);
const char* mode_name(Mode m);

enum class MdmMethod { none, swo, wtl };
MdmMethod mdm_from_string(const std::string& s);
const char* mdm_name(MdmMethod m);

struct AttackConfig {
  Mode mode = Mode::static_rounds;
  MdmMethod mdm = MdmMethod::none;
  double alpha = 0.5;  // injection mix for the dynamic modes
  forensics::VriConfig vri;
  mdm::SwoConfig swo;
  mdm::WtlConfig wtl;

  void validate() const;
};

// Everything the attacker derives before (or independently of) the run:
// reference fine-tunes, the sensitive layer set, and the trained regressor.
struct AttackAssets {
  lm::ModelConfig mcfg;
  ModelWeights base;
  forensics::References refs;
  std::vector<std::string> layers;
  std::optional<mdm::WtlBundle> wtl;
};

AttackAssets build_assets(const lm::ModelConfig& mcfg, const ModelWeights& base,
                          const std::vector<std::string>& d_reg,
                          const std::vector<std::string>& d_sen, const AttackConfig& cfg);

// MDM post-processing of one snapshot (identity when cfg.mdm == none).
ModelWeights process_snapshot(const AttackAssets& assets, const AttackConfig& cfg,
                              const ModelWeights& snap);

struct SnapshotSelection {
  std::vector<int> rounds;      // snapshot rounds feeding the evaluation set
  std::vector<int> truth;       // ground-truth victim rounds, for scoring
  bool used_ground_truth = false;
};

struct AttackOutput {
  SnapshotSelection selection;
  std::vector<ModelWeights> models;  // processed snapshots, aligned with rounds
};

// Snapshot selection + MDM over a finished store. The plain modes identify
// victim rounds with the round-inference test; the plus modes read the
// ground-truth flags (and victim-side locals for dynamic_plus).
AttackOutput run_attack(const SnapshotStore& store, const AttackAssets& assets,
                        const AttackConfig& cfg);

// Unweighted mean of an evaluation set.
ModelWeights aggregate_snapshots(const std::vector<ModelWeights>& models);

// In-run poisoning: classifies every settled round once, keeps the processed
// victim snapshots cached, and submits alpha*G_A + (1-alpha)*G_L in place of
// the honest local update. alpha = 0 degenerates to honest training.
class DynamicAdversary : public fed::AdversaryHook {
 public:
  DynamicAdversary(const AttackAssets& assets, const AttackConfig& cfg,
                   const SnapshotStore& store);

  ModelWeights update(int round, int client, const ModelWeights& global,
                      ModelWeights local) override;

  const std::vector<int>& identified_rounds() const { return identified_; }

 private:
  void refresh();

  const AttackAssets& assets_;
  AttackConfig cfg_;
  const SnapshotStore& store_;
  int scanned_ = 0;
  std::vector<int> identified_;
  std::map<int, ModelWeights> processed_;
  std::optional<ModelWeights> g_a_;
};

enum class Baseline { lr, ir, fp, mu };
Baseline baseline_from_string(const std::string& s);
const char* baseline_name(Baseline b);

// Attack-free comparison points: last round, ground-truth victim rounds,
// forced participation, malicious update. fp and mu require a store trained
// under the matching baseline mode.
AttackOutput run_baseline(const SnapshotStore& store, Baseline b);

struct IdentificationScore {
  int tp = 0, fp = 0, fn = 0;
  double precision = 0.0, recall = 0.0;
};

IdentificationScore score_identification(const std::vector<int>& identified,
                                          const std::vector<int>& truth);

}  // namespace fedleak::attack
