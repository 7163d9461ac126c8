#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedleak/model.hpp"

namespace fedleak::lm {

enum class Optimizer { sgd, adam };

Optimizer optimizer_from_string(const std::string& s);

// Combines per-sample gradients (each already the gradient of that sample's
// mean per-token NLL) into the batch update direction. The default is the
// plain mean; the privacy defense supplies clipping plus noise.
class GradCombiner {
 public:
  virtual ~GradCombiner() = default;
  virtual void combine(const std::vector<std::vector<float>>& per_sample,
                       std::vector<float>& out, uint64_t step_seed) const;
};

struct TrainOptions {
  int epochs = 1;
  double lr = 1e-3;
  Optimizer optimizer = Optimizer::adam;
  int batch_size = 8;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  uint64_t seed = 1;
  const GradCombiner* combiner = nullptr;  // null -> plain mean
};

// Runs epochs of shuffled mini-batch training and returns the new weights.
// All randomness is derived from options.seed, so identical inputs give
// bit-identical outputs.
ModelWeights train_local(const ModelConfig& cfg, const ModelWeights& start,
                         const std::vector<std::string>& lines, const TrainOptions& options);

}  // namespace fedleak::lm
