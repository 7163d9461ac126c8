#pragma once

#include <string>
#include <vector>

#include "fedleak/model.hpp"

namespace fedleak::lm {

// Incremental decode state: per-block key/value rows for positions [0, len).
// rewind() just moves len back, so shared-prefix searches reuse the cache.
struct DecodeState {
  int len = 0;
  std::vector<std::vector<float>> k, v;  // [block][pos * d_model]
  std::vector<float> logits;             // after the last consumed token
};

class Decoder {
 public:
  Decoder(const ModelConfig& cfg, const ModelWeights& w);

  DecodeState fresh() const;
  // Consumes one token, appends its k/v, fills state.logits with the
  // distribution over the next token. Mirrors the batch forward pass.
  void step(DecodeState& state, int token) const;
  DecodeState prime(const std::vector<int>& prefix) const;
  void rewind(DecodeState& state, int len) const;

  const ModelConfig& cfg() const { return cfg_; }

 private:
  ModelConfig cfg_;
  std::vector<float> flat_;
  size_t embed_off_ = 0, head_off_ = 0;
  std::vector<size_t> attn_off_, mlp_off_;
};

struct BeamHyp {
  std::vector<int> tokens;  // prefix plus continuation, stop token excluded
  double logp = 0.0;
};

// Deterministic argmax sampler; ties pick the lowest token id. Returns the
// prefix plus up to max_new tokens; emitting stop_id (or hitting the context
// window) halts. stop_id < 0 disables stop handling.
std::vector<int> decode_greedy(const ModelConfig& cfg, const ModelWeights& w,
                               const std::vector<int>& prefix, int max_new,
                               int stop_id = CharTokenizer::kStop);

// Beam search over total log-probability. Ties rank by lexicographically
// smaller token sequence; beam_width 1 reproduces decode_greedy exactly.
std::vector<BeamHyp> decode_beam(const ModelConfig& cfg, const ModelWeights& w,
                                 const std::vector<int>& prefix, int max_new, int beam_width,
                                 int top_k, int stop_id = CharTokenizer::kStop);

}  // namespace fedleak::lm
