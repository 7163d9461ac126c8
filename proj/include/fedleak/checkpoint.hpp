#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "fedleak/tensor.hpp"

namespace fedleak {

using Flags = std::vector<std::pair<std::string, std::string>>;

// FLTW1 container: "FLTW1" magic, u32 LE manifest length, UTF-8 manifest
// ("tensor <id> <dims> <offset>" and "flag <key> <value>" lines), then the
// concatenated raw little-endian float32 buffers. Round-trips bit-exactly.
void save_checkpoint(const std::string& path, const ModelWeights& weights,
                     const Flags& flags = {});
ModelWeights load_checkpoint(const std::string& path, Flags* flags_out = nullptr);

struct SnapshotMeta {
  int round = 0;
  std::string kind;  // "global" or "victim_local"
  std::string file;
  std::vector<int> participants;
  std::vector<int> victims;  // victim clients among the participants
  bool victim_present = false;
};

// Directory of round_{N}_{kind}.fltw checkpoints plus a plain-text manifest.
// Appends rewrite the manifest deterministically, so interrupted runs resume
// from the last fully recorded snapshot.
class SnapshotStore {
 public:
  static SnapshotStore create(const std::string& dir, uint64_t config_hash, int total_rounds,
                              bool oracle, const std::string& baseline);
  static SnapshotStore open(const std::string& dir);
  static bool exists(const std::string& dir);

  void append(const SnapshotMeta& meta, const ModelWeights& weights);
  ModelWeights load(int round, const std::string& kind) const;
  bool has(int round, const std::string& kind) const;

  const std::vector<SnapshotMeta>& snapshots() const { return metas_; }
  std::vector<SnapshotMeta> globals() const;
  // Rounds 0..k-1 all have a global snapshot; returns k.
  int contiguous_rounds() const;

  uint64_t config_hash() const { return config_hash_; }
  int total_rounds() const { return total_rounds_; }
  bool oracle() const { return oracle_; }
  const std::string& baseline() const { return baseline_; }
  const std::string& dir() const { return dir_; }

 private:
  void write_manifest() const;

  std::string dir_;
  uint64_t config_hash_ = 0;
  int total_rounds_ = 0;
  bool oracle_ = false;
  std::string baseline_ = "none";
  std::vector<SnapshotMeta> metas_;
};

}  // namespace fedleak
