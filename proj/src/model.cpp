#include "fedleak/model.hpp"

#include <cmath>

#include "model_kernels.hpp"

namespace fedleak::lm {

using detail::Packed;

void ModelConfig::validate() const {
  require(vocab_size >= 2, ErrorKind::configuration, "vocab_size must be >= 2");
  require(context_len >= 2, ErrorKind::configuration, "context_len must be >= 2");
  require(n_blocks >= 1, ErrorKind::configuration, "n_blocks must be >= 1");
  require(n_heads >= 1 && d_model % n_heads == 0, ErrorKind::configuration,
          "d_model must be divisible by n_heads");
  require(d_model >= n_heads, ErrorKind::configuration, "d_model too small");
}

std::vector<std::string> layer_ids(const ModelConfig& cfg) {
  std::vector<std::string> ids = {"embed"};
  for (int b = 0; b < cfg.n_blocks; ++b) {
    ids.push_back("block" + std::to_string(b) + ".attn");
    ids.push_back("block" + std::to_string(b) + ".mlp");
  }
  ids.push_back("head");
  return ids;
}

const ParamLayout::Entry& ParamLayout::find(const std::string& name) const {
  for (const auto& e : entries)
    if (e.name == name) return e;
  fail(ErrorKind::invalid_input, "unknown layer in layout: " + name);
}

ParamLayout param_layout(const ModelConfig& cfg) {
  cfg.validate();
  ParamLayout lo;
  size_t off = 0;
  auto push = [&](const std::string& name, std::vector<int64_t> shape) {
    ParamLayout::Entry e;
    e.name = name;
    e.shape = std::move(shape);
    e.numel = Tensor::numel_of(e.shape);
    e.offset = off;
    off += e.numel;
    lo.entries.push_back(std::move(e));
  };
  push("embed", {cfg.vocab_size + cfg.context_len, cfg.d_model});
  for (int b = 0; b < cfg.n_blocks; ++b) {
    push("block" + std::to_string(b) + ".attn", {4, cfg.d_model, cfg.d_model});
    push("block" + std::to_string(b) + ".mlp", {2, cfg.mlp_hidden(), cfg.d_model});
  }
  push("head", {cfg.vocab_size, cfg.d_model});
  lo.total = off;
  return lo;
}

ModelWeights init_model(const ModelConfig& cfg) {
  ParamLayout lo = param_layout(cfg);
  auto rng = make_rng(derive_seed(cfg.seed, "model_init"));
  std::normal_distribution<float> dist(0.0f, 0.08f);
  // Residual-output matrices start smaller to keep deep stacks stable.
  const float res_scale = 1.0f / std::sqrt(2.0f * static_cast<float>(cfg.n_blocks));
  ModelWeights w;
  for (const auto& e : lo.entries) {
    Tensor t(e.shape);
    for (auto& v : t.data) v = dist(rng);
    if (e.name.ends_with(".attn")) {
      size_t dd = static_cast<size_t>(cfg.d_model) * cfg.d_model;
      for (size_t i = 3 * dd; i < 4 * dd; ++i) t.data[i] *= res_scale;
    } else if (e.name.ends_with(".mlp")) {
      size_t half = t.numel() / 2;
      for (size_t i = half; i < t.numel(); ++i) t.data[i] *= res_scale;
    }
    w.add(e.name, std::move(t));
  }
  return w;
}

void validate_weights(const ModelConfig& cfg, const ModelWeights& w) {
  ParamLayout lo = param_layout(cfg);
  require(w.size() == lo.entries.size(), ErrorKind::invalid_input, "weight layer count mismatch");
  for (const auto& e : lo.entries) {
    require(w.has(e.name), ErrorKind::invalid_input, "missing layer: " + e.name);
    require(w.at(e.name).shape == e.shape, ErrorKind::invalid_input,
            "layer shape mismatch: " + e.name);
  }
  require(w.finite(), ErrorKind::invalid_input, "weights contain non-finite values");
}

std::vector<float> flatten(const ModelWeights& w) {
  std::vector<float> flat;
  flat.reserve(w.numel());
  for (const auto& [name, t] : w.items()) flat.insert(flat.end(), t.data.begin(), t.data.end());
  return flat;
}

ModelWeights unflatten(const ModelConfig& cfg, const std::vector<float>& flat) {
  ParamLayout lo = param_layout(cfg);
  require(flat.size() == lo.total, ErrorKind::invalid_input, "flat size mismatch");
  ModelWeights w;
  for (const auto& e : lo.entries) {
    Tensor t(e.shape);
    std::copy(flat.begin() + e.offset, flat.begin() + e.offset + e.numel, t.data.begin());
    w.add(e.name, std::move(t));
  }
  return w;
}

std::vector<int> to_sequence(const ModelConfig& cfg, const std::string& text) {
  CharTokenizer tok;
  require(cfg.vocab_size == tok.vocab_size(), ErrorKind::configuration,
          "text pipeline requires the char tokenizer vocab");
  std::string clipped = text;
  if (static_cast<int>(clipped.size()) > cfg.context_len - 1)
    clipped.resize(cfg.context_len - 1);
  require(!clipped.empty(), ErrorKind::invalid_input, "empty line cannot form a sequence");
  std::vector<int> seq = tok.encode(clipped);
  seq.push_back(tok.stop_id());
  return seq;
}

std::vector<std::vector<int>> to_sequences(const ModelConfig& cfg,
                                           const std::vector<std::string>& lines) {
  std::vector<std::vector<int>> seqs;
  seqs.reserve(lines.size());
  for (const auto& l : lines) seqs.push_back(to_sequence(cfg, l));
  return seqs;
}

std::vector<std::vector<float>> forward_probs(const ModelConfig& cfg, const ModelWeights& w,
                                              const std::vector<int>& tokens) {
  validate_weights(cfg, w);
  auto pk = Packed<float>::from(cfg, flatten(w));
  detail::Acts<float> acts;
  detail::forward(pk, tokens, acts);
  std::vector<std::vector<float>> probs(tokens.size(), std::vector<float>(cfg.vocab_size));
  for (size_t i = 0; i < tokens.size(); ++i) {
    float mx = acts.logits.row(i).maxCoeff();
    double z = 0.0;
    for (int j = 0; j < cfg.vocab_size; ++j) z += std::exp(static_cast<double>(acts.logits(i, j) - mx));
    for (int j = 0; j < cfg.vocab_size; ++j)
      probs[i][j] = static_cast<float>(std::exp(static_cast<double>(acts.logits(i, j) - mx)) / z);
  }
  return probs;
}

namespace {

template <typename T>
std::pair<double, size_t> accum_loss(const Packed<T>& pk, const std::vector<std::vector<int>>& seqs,
                                     std::vector<T>* grad) {
  require(!seqs.empty(), ErrorKind::invalid_input, "empty batch");
  double nll = 0.0;
  size_t count = 0;
  for (const auto& s : seqs) {
    nll += detail::seq_loss_grad(pk, s, grad);
    count += s.size() - 1;
  }
  return {nll, count};
}

}  // namespace

double batch_loss(const ModelConfig& cfg, const ModelWeights& w,
                  const std::vector<std::vector<int>>& seqs) {
  auto pk = Packed<float>::from(cfg, flatten(w));
  auto [nll, count] = accum_loss<float>(pk, seqs, nullptr);
  return nll / static_cast<double>(count);
}

double corpus_loss(const ModelConfig& cfg, const ModelWeights& w,
                   const std::vector<std::string>& lines) {
  return batch_loss(cfg, w, to_sequences(cfg, lines));
}

double perplexity(const ModelConfig& cfg, const ModelWeights& w,
                  const std::vector<std::string>& lines) {
  return std::exp(corpus_loss(cfg, w, lines));
}

double seq_nll_sum(const ModelConfig& cfg, const ModelWeights& w, const std::vector<int>& seq,
                   size_t* n_tokens) {
  auto pk = Packed<float>::from(cfg, flatten(w));
  double nll = detail::seq_loss_grad(pk, seq, static_cast<std::vector<float>*>(nullptr));
  if (n_tokens) *n_tokens = seq.size() - 1;
  return nll;
}

std::pair<double, std::vector<float>> loss_and_grad(const ModelConfig& cfg, const ModelWeights& w,
                                                    const std::vector<std::vector<int>>& seqs) {
  auto pk = Packed<float>::from(cfg, flatten(w));
  std::vector<float> grad(pk.layout.total, 0.0f);
  auto [nll, count] = accum_loss<float>(pk, seqs, &grad);
  float inv = 1.0f / static_cast<float>(count);
  for (auto& g : grad) g *= inv;
  return {nll / static_cast<double>(count), std::move(grad)};
}

std::vector<float> sample_grad(const ModelConfig& cfg, const std::vector<float>& flat,
                               const std::vector<int>& seq, double* mean_nll) {
  auto pk = Packed<float>::from(cfg, flat);
  std::vector<float> grad(pk.layout.total, 0.0f);
  double nll = detail::seq_loss_grad(pk, seq, &grad);
  float inv = 1.0f / static_cast<float>(seq.size() - 1);
  for (auto& g : grad) g *= inv;
  if (mean_nll) *mean_nll = nll / static_cast<double>(seq.size() - 1);
  return grad;
}

double loss_f64(const ModelConfig& cfg, const std::vector<double>& flat,
                const std::vector<std::vector<int>>& seqs) {
  Packed<double> pk;
  pk.cfg = cfg;
  pk.layout = param_layout(cfg);
  require(flat.size() == pk.layout.total, ErrorKind::invalid_input, "flat param size mismatch");
  pk.p = flat;
  auto [nll, count] = accum_loss<double>(pk, seqs, nullptr);
  return nll / static_cast<double>(count);
}

std::pair<double, std::vector<double>> loss_and_grad_f64(const ModelConfig& cfg,
                                                         const std::vector<double>& flat,
                                                         const std::vector<std::vector<int>>& seqs) {
  Packed<double> pk;
  pk.cfg = cfg;
  pk.layout = param_layout(cfg);
  require(flat.size() == pk.layout.total, ErrorKind::invalid_input, "flat param size mismatch");
  pk.p = flat;
  std::vector<double> grad(pk.layout.total, 0.0);
  auto [nll, count] = accum_loss<double>(pk, seqs, &grad);
  double inv = 1.0 / static_cast<double>(count);
  for (auto& g : grad) g *= inv;
  return {nll * inv, std::move(grad)};
}

}  // namespace fedleak::lm
