#include "fedleak/train.hpp"

#include <algorithm>
#include <cmath>

#include "model_kernels.hpp"

namespace fedleak::lm {

Optimizer optimizer_from_string(const std::string& s) {
  if (s == "sgd") return Optimizer::sgd;
  if (s == "adam") return Optimizer::adam;
  fail(ErrorKind::configuration, "unknown optimizer: " + s);
}

void GradCombiner::combine(const std::vector<std::vector<float>>& per_sample,
                           std::vector<float>& out, uint64_t /*step_seed*/) const {
  require(!per_sample.empty(), ErrorKind::invalid_input, "no per-sample gradients");
  out.assign(per_sample[0].size(), 0.0f);
  const float inv = 1.0f / static_cast<float>(per_sample.size());
  for (const auto& g : per_sample) {
    require(g.size() == out.size(), ErrorKind::invalid_input, "gradient size mismatch");
    for (size_t i = 0; i < out.size(); ++i) out[i] += g[i];
  }
  for (auto& v : out) v *= inv;
}

namespace {

struct AdamState {
  std::vector<float> m, v;
  int64_t t = 0;
};

void apply_update(std::vector<float>& params, const std::vector<float>& grad,
                  const TrainOptions& opt, AdamState& adam) {
  const float lr = static_cast<float>(opt.lr);
  if (opt.optimizer == Optimizer::sgd) {
    for (size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
    return;
  }
  if (adam.m.empty()) {
    adam.m.assign(params.size(), 0.0f);
    adam.v.assign(params.size(), 0.0f);
  }
  adam.t += 1;
  const float b1 = static_cast<float>(opt.beta1), b2 = static_cast<float>(opt.beta2);
  const float eps = static_cast<float>(opt.adam_eps);
  const float c1 = 1.0f - std::pow(b1, static_cast<float>(adam.t));
  const float c2 = 1.0f - std::pow(b2, static_cast<float>(adam.t));
  for (size_t i = 0; i < params.size(); ++i) {
    adam.m[i] = b1 * adam.m[i] + (1.0f - b1) * grad[i];
    adam.v[i] = b2 * adam.v[i] + (1.0f - b2) * grad[i] * grad[i];
    float mhat = adam.m[i] / c1;
    float vhat = adam.v[i] / c2;
    params[i] -= lr * mhat / (std::sqrt(vhat) + eps);
  }
}

}  // namespace

ModelWeights train_local(const ModelConfig& cfg, const ModelWeights& start,
                         const std::vector<std::string>& lines, const TrainOptions& options) {
  validate_weights(cfg, start);
  require(options.epochs >= 1, ErrorKind::invalid_input, "epochs must be >= 1");
  require(options.batch_size >= 1, ErrorKind::invalid_input, "batch_size must be >= 1");
  require(!lines.empty(), ErrorKind::invalid_input, "training corpus is empty");

  auto seqs = to_sequences(cfg, lines);
  std::vector<float> params = flatten(start);
  const size_t total = params.size();
  AdamState adam;
  GradCombiner mean_combiner;
  const GradCombiner& combiner = options.combiner ? *options.combiner : mean_combiner;

  std::vector<size_t> order(seqs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::vector<std::vector<float>> per_sample;
  std::vector<float> grad;
  uint64_t step_counter = 0;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    auto rng = make_rng(derive_seed(options.seed, "shuffle", static_cast<uint64_t>(epoch)));
    std::shuffle(order.begin(), order.end(), rng);
    for (size_t base = 0; base < order.size(); base += options.batch_size) {
      size_t nb = std::min(order.size(), base + options.batch_size) - base;
      auto pk = detail::Packed<float>::from(cfg, params);
      per_sample.resize(nb);
      for (size_t s = 0; s < nb; ++s) {
        const auto& seq = seqs[order[base + s]];
        per_sample[s].assign(total, 0.0f);
        detail::seq_loss_grad(pk, seq, &per_sample[s]);
        const float inv = 1.0f / static_cast<float>(seq.size() - 1);
        for (auto& g : per_sample[s]) g *= inv;
      }
      combiner.combine(per_sample, grad, derive_seed(options.seed, "step", step_counter));
      apply_update(params, grad, options, adam);
      ++step_counter;
    }
    for (float v : params)
      require(std::isfinite(v), ErrorKind::training_diverged, "training diverged to non-finite");
  }
  return unflatten(cfg, params);
}

}  // namespace fedleak::lm
