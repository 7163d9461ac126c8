#pragma once

#include <string>
#include <vector>

#include "fedleak/model.hpp"
#include "fedleak/train.hpp"

namespace fedleak::mdm {

struct SwoConfig {
  int steps = 500;        // optimization steps, sensible range 200..1000
  double lr = 1e-3;
  double clip = 2.0;      // elementwise gradient clip threshold, range 1..4
  double norm_cap = 2.0;  // stop when ||dW_new|| / ||dW_init|| would reach this
  lm::Optimizer optimizer = lm::Optimizer::adam;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
};

struct SwoReport {
  int steps_taken = 0;
  bool early_stopped = false;
  double j_initial = 0.0;
  double j_final = 0.0;
  double ratio_final = 1.0;  // ||dW_new|| / ||dW_init|| of the returned tensor
};

// Maximizes J = dW_init . (w1 - w2) over w1 (loss -J has the constant
// gradient -dW_init). Elementwise gradient clipping, optimizer steps, sign
// projection (flipped elements zero out), and the norm-ratio early stop all
// happen in the space of the given tensors.
Tensor swo_layer(const Tensor& w1, const Tensor& w2, const SwoConfig& cfg,
                 SwoReport* report = nullptr);

// Runs swo_layer on every selected layer of `victim` against `reference`
// after joint z-score normalization; denormalizes and re-projects signs
// against the raw victim tensor. Other layers pass through bit-identically.
ModelWeights apply_swo(const ModelWeights& victim, const ModelWeights& reference,
                       const std::vector<std::string>& layers, const SwoConfig& cfg,
                       std::vector<std::pair<std::string, SwoReport>>* reports = nullptr);

struct WtlConfig {
  int n_pairs = 16;       // fine-tuned (regular, sensitive) model pairs
  int ft_epochs = 2;
  double ft_lr = 2e-3;
  int ft_batch_size = 8;
  int hidden = 64;        // regressor bottleneck width
  int epochs = 150;       // regressor training epochs
  double lr = 1e-3;
  double val_fraction = 0.25;
  uint64_t seed = 1;

  void validate() const;
};

// Dense autoencoder-style regressor for one flattened layer size.
struct WtlModel {
  int dim = 0;
  int hidden = 0;
  std::vector<float> w_in, b_in, w_out, b_out;
  std::vector<double> val_history;  // validation MSE after each epoch

  std::vector<float> predict(const std::vector<float>& x) const;
};

struct WtlBundle {
  std::vector<WtlModel> models;
  const WtlModel& for_dim(int dim) const;
};

// Fine-tunes n_pairs (regular, regular+sensitive) model pairs from `base` on
// disjoint seeded splits, collects per-layer weight pairs, and trains one
// regressor per distinct flattened layer size.
WtlBundle wtl_train(const lm::ModelConfig& mcfg, const ModelWeights& base,
                    const std::vector<std::string>& d_reg, const std::vector<std::string>& d_sen,
                    const std::vector<std::string>& layers, const WtlConfig& cfg);

// w <- denorm(M(norm(w))) for each selected layer, input-vector statistics.
ModelWeights apply_wtl(const ModelWeights& victim, const WtlBundle& bundle,
                       const std::vector<std::string>& layers);

void save_wtl(const std::string& path, const WtlBundle& bundle);
WtlBundle load_wtl(const std::string& path);

}  // namespace fedleak::mdm
