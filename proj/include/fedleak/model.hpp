#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedleak/tensor.hpp"
#include "fedleak/tokenizer.hpp"

namespace fedleak::lm {

struct ModelConfig {
  int vocab_size = CharTokenizer::kVocab;
  int context_len = 64;
  int n_blocks = 4;
  int d_model = 64;
  int n_heads = 2;
  uint64_t seed = 1;

  int mlp_hidden() const { return 2 * d_model; }
  int head_dim() const { return d_model / n_heads; }
  void validate() const;
};

// Canonical layer order: embed, block{i}.attn, block{i}.mlp, ..., head.
std::vector<std::string> layer_ids(const ModelConfig& cfg);

struct ParamLayout {
  struct Entry {
    std::string name;
    size_t offset = 0;
    size_t numel = 0;
    std::vector<int64_t> shape;
  };
  std::vector<Entry> entries;
  size_t total = 0;
  const Entry& find(const std::string& name) const;
};

ParamLayout param_layout(const ModelConfig& cfg);
ModelWeights init_model(const ModelConfig& cfg);
void validate_weights(const ModelConfig& cfg, const ModelWeights& w);

std::vector<float> flatten(const ModelWeights& w);
ModelWeights unflatten(const ModelConfig& cfg, const std::vector<float>& flat);

// Token sequence for training/eval: encoded text plus the stop token.
std::vector<int> to_sequence(const ModelConfig& cfg, const std::string& text);
std::vector<std::vector<int>> to_sequences(const ModelConfig& cfg,
                                           const std::vector<std::string>& lines);

// Next-token distributions for every position of `tokens` (rows sum to 1).
std::vector<std::vector<float>> forward_probs(const ModelConfig& cfg, const ModelWeights& w,
                                              const std::vector<int>& tokens);

// Mean per-token negative log-likelihood over all next-token predictions.
double batch_loss(const ModelConfig& cfg, const ModelWeights& w,
                  const std::vector<std::vector<int>>& seqs);
double corpus_loss(const ModelConfig& cfg, const ModelWeights& w,
                   const std::vector<std::string>& lines);
double perplexity(const ModelConfig& cfg, const ModelWeights& w,
                  const std::vector<std::string>& lines);

// Sum of next-token NLLs of the full sequence (stop included); token count out.
double seq_nll_sum(const ModelConfig& cfg, const ModelWeights& w, const std::vector<int>& seq,
                   size_t* n_tokens = nullptr);

// Gradient of batch_loss w.r.t. the flattened parameters.
std::pair<double, std::vector<float>> loss_and_grad(const ModelConfig& cfg,
                                                    const ModelWeights& w,
                                                    const std::vector<std::vector<int>>& seqs);

// Per-sample gradient (of the sample's mean per-token NLL), float path.
std::vector<float> sample_grad(const ModelConfig& cfg, const std::vector<float>& flat,
                               const std::vector<int>& seq, double* mean_nll = nullptr);

// Double-precision instantiation of the same kernels, for finite-difference
// verification at tight tolerances.
double loss_f64(const ModelConfig& cfg, const std::vector<double>& flat,
                const std::vector<std::vector<int>>& seqs);
std::pair<double, std::vector<double>> loss_and_grad_f64(const ModelConfig& cfg,
                                                         const std::vector<double>& flat,
                                                         const std::vector<std::vector<int>>& seqs);

}  // namespace fedleak::lm
