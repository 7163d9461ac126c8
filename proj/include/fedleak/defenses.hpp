#pragma once

#include <regex>
#include <string>
#include <vector>

#include "fedleak/corpus.hpp"
#include "fedleak/train.hpp"

namespace fedleak::defenses {

struct DpConfig {
  double clip = 0.01;  // per-sample l2 clipping norm C
  double sigma = 0.0;  // noise multiplier; 0 keeps the clipped mean exactly

  void validate() const;
};

// Reported alongside DP runs; the accounting label, not a trained quantity.
double dp_delta(size_t n_clients);

// Clips each per-sample gradient to l2 norm <= clip (gradients already below
// the threshold are untouched bit-for-bit), averages, then adds Gaussian
// noise with per-coordinate std sigma*clip/batch_size. sigma == 0 skips the
// noise draw entirely so the path is bit-identical to clip-only.
class DpCombiner : public lm::GradCombiner {
 public:
  explicit DpCombiner(const DpConfig& cfg);
  void combine(const std::vector<std::vector<float>>& per_sample, std::vector<float>& out,
               uint64_t step_seed) const override;

  const DpConfig& config() const { return cfg_; }

 private:
  DpConfig cfg_;
};

struct ScrubRule {
  std::string category;
  std::regex pattern;
};

// Patterns matching the four secret shapes; applied in this order.
std::vector<ScrubRule> default_scrub_rules();

// One rule per line: "<category> <ECMAScript regex to end of line>".
// '#' lines and blank lines are skipped.
std::vector<ScrubRule> load_scrub_rules(const std::string& path);

struct ScrubStats {
  int lines_touched = 0;
  int replacements = 0;
};

// Replaces every pattern match with "<UNK>" in place.
ScrubStats scrub(corpus::Corpus& corpus, const std::vector<ScrubRule>& rules);

// Keeps the first occurrence of each exact line; returns how many were dropped.
size_t deduplicate(corpus::Corpus& corpus);

}  // namespace fedleak::defenses
