#include "fedleak/forensics.hpp"

#include <algorithm>
#include <cmath>

#include "fedleak/train.hpp"

namespace fedleak::forensics {

std::vector<std::pair<std::string, double>> layer_delta(const ModelWeights& a,
                                                        const ModelWeights& b,
                                                        const std::vector<std::string>& layers) {
  require(!layers.empty(), ErrorKind::forensics, "layer_delta needs at least one layer");
  std::vector<std::pair<std::string, double>> out;
  out.reserve(layers.size());
  for (const auto& l : layers) {
    require(a.has(l) && b.has(l), ErrorKind::forensics, "layer missing for delta: " + l);
    out.emplace_back(l, frobenius_diff(a.at(l), b.at(l)));
  }
  return out;
}

std::vector<std::string> select_sensitive_layers(const lm::ModelConfig& cfg,
                                                 const ModelWeights& base,
                                                 const ModelWeights& tuned, int k) {
  std::vector<std::string> candidates;
  for (const auto& id : lm::layer_ids(cfg))
    if (id.ends_with(".attn") || id.ends_with(".mlp")) candidates.push_back(id);
  require(!candidates.empty(), ErrorKind::forensics, "model has no attn/mlp layers");
  if (k == 0) k = static_cast<int>(std::ceil(0.75 * static_cast<double>(candidates.size())));
  require(k >= 1 && k <= static_cast<int>(candidates.size()), ErrorKind::forensics,
          "sensitive layer count out of range");

  auto deltas = layer_delta(tuned, base, candidates);
  // Stable sort by descending norm keeps canonical order among ties.
  std::vector<size_t> idx(candidates.size());
  for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(),
                   [&](size_t x, size_t y) { return deltas[x].second > deltas[y].second; });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  std::vector<std::string> out;
  for (size_t i : idx) out.push_back(candidates[i]);
  return out;
}

References build_references(const lm::ModelConfig& cfg, const ModelWeights& base,
                            const std::vector<std::string>& d_reg,
                            const std::vector<std::string>& d_sen, const VriConfig& vcfg) {
  require(!d_reg.empty() && !d_sen.empty(), ErrorKind::forensics,
          "reference corpora must be non-empty");
  lm::TrainOptions opt;
  opt.epochs = vcfg.ref_epochs;
  opt.lr = vcfg.ref_lr;
  opt.batch_size = vcfg.batch_size;
  opt.seed = derive_seed(vcfg.seed, "refs");
  References refs;
  refs.g_r = lm::train_local(cfg, base, d_reg, opt);
  std::vector<std::string> mixed = d_reg;
  mixed.insert(mixed.end(), d_sen.begin(), d_sen.end());
  refs.g_s = lm::train_local(cfg, base, mixed, opt);
  return refs;
}

VriVerdict classify_deltas(const std::vector<double>& delta_i, const std::vector<double>& delta_r,
                           const std::vector<double>& delta_s, const VriConfig& vcfg) {
  require(delta_i.size() == delta_r.size() && delta_i.size() == delta_s.size(),
          ErrorKind::forensics, "delta vectors must align");
  require(delta_i.size() >= 2, ErrorKind::forensics, "need at least two layers for the tests");
  VriVerdict v;
  v.delta_i = delta_i;
  v.vs_regular = stats::t_test(delta_i, delta_r, vcfg.variant, vcfg.significance);
  v.vs_sensitive = stats::t_test(delta_i, delta_s, vcfg.variant, vcfg.significance);
  v.victim = v.vs_regular.reject && !v.vs_sensitive.reject;
  return v;
}

namespace {

std::vector<double> delta_values(const ModelWeights& a, const ModelWeights& b,
                                 const std::vector<std::string>& layers) {
  std::vector<double> out;
  for (const auto& [name, d] : layer_delta(a, b, layers)) out.push_back(d);
  return out;
}

}  // namespace

VriVerdict identify_victim_round(const ModelWeights& g_i, const ModelWeights& g_base,
                                 const References& refs, const std::vector<std::string>& layers,
                                 const VriConfig& vcfg) {
  auto di = delta_values(g_i, g_base, layers);
  auto dr = delta_values(refs.g_r, g_base, layers);
  auto ds = delta_values(refs.g_s, g_base, layers);
  return classify_deltas(di, dr, ds, vcfg);
}

std::vector<RoundVerdict> vri_over_store(const SnapshotStore& store, const ModelWeights& g_base,
                                         const References& refs,
                                         const std::vector<std::string>& layers,
                                         const VriConfig& vcfg) {
  auto dr = delta_values(refs.g_r, g_base, layers);
  auto ds = delta_values(refs.g_s, g_base, layers);
  std::vector<RoundVerdict> out;
  for (const auto& meta : store.globals()) {
    ModelWeights g_i = store.load(meta.round, "global");
    RoundVerdict rv;
    rv.round = meta.round;
    rv.verdict = classify_deltas(delta_values(g_i, g_base, layers), dr, ds, vcfg);
    out.push_back(std::move(rv));
  }
  return out;
}

}  // namespace fedleak::forensics
