#pragma once

#include <cstdint>
#include <string>

#include "fedleak/attack.hpp"
#include "fedleak/defenses.hpp"
#include "fedleak/fedsim.hpp"
#include "fedleak/leakage.hpp"
#include "fedleak/model.hpp"

namespace fedleak::config {

struct DataConfig {
  int regular_lines = 4000;        // shared pool: pretrain + validation + clients
  int pretrain_lines = 1500;
  int pretrain_epochs = 3;
  double pretrain_lr = 1e-3;
  int validation_lines = 128;
  int canaries = 20;
  int space_size = 4096;
  int repetitions = 10;
  int attacker_regular_lines = 256;  // attacker-made regular reference corpus
  int attacker_canaries = 20;        // disjoint sensitive-style reference records
};

struct DefenseConfig {
  bool dp = false;
  double dp_clip = 0.01;
  double dp_sigma = 0.0;
  bool scrub = false;
  std::string scrub_rules;  // optional rules file; empty = built-in patterns
  bool dedup = false;
};

// One experiment: INI-style file with [model], [data], [fed], [attack],
// [vri], [swo], [wtl], [recon], [mi], [defenses] sections. Unknown keys are
// configuration errors; omitted keys keep these defaults.
struct RunConfig {
  uint64_t seed = 1;
  std::string out_dir = "runs/out";
  lm::ModelConfig model;
  DataConfig data;
  fed::FedConfig fed;
  double victim_round_fraction = 1.0;  // share of rounds victims may join
  attack::AttackConfig attack;
  leakage::ReconstructionConfig recon;
  leakage::MiConfig mi;
  DefenseConfig defenses;

  void validate() const;
  std::string canonical() const;  // fixed-order dump; whitespace-insensitive hash input
  uint64_t hash_u64() const;
  std::string hash() const;
};

RunConfig parse_config(const std::string& text);
RunConfig load_config_file(const std::string& path);

}  // namespace fedleak::config
