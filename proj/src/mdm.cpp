#include "fedleak/mdm.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "fedleak/checkpoint.hpp"

namespace fedleak::mdm {

void SwoConfig::validate() const {
  require(steps >= 1, ErrorKind::mdm, "swo steps must be >= 1");
  require(lr > 0.0, ErrorKind::mdm, "swo lr must be positive");
  require(clip > 0.0, ErrorKind::mdm, "swo clip must be positive");
  require(norm_cap > 1.0, ErrorKind::mdm, "swo norm_cap must exceed 1");
}

namespace {

double norm_of(const std::vector<float>& v) {
  double s = 0.0;
  for (float x : v) s += static_cast<double>(x) * x;
  return std::sqrt(s);
}

int sign_of(float v) { return v > 0.0f ? 1 : v < 0.0f ? -1 : 0; }

// Zero out elements whose sign flipped against the anchor; anchor zeros stay
// zero. Exact by construction.
void project_signs(std::vector<float>& w, const std::vector<float>& anchor) {
  for (size_t i = 0; i < w.size(); ++i) {
    int sa = sign_of(anchor[i]);
    if (sa == 0 || (sign_of(w[i]) != 0 && sign_of(w[i]) != sa)) w[i] = 0.0f;
  }
}

}  // namespace

Tensor swo_layer(const Tensor& w1, const Tensor& w2, const SwoConfig& cfg, SwoReport* report) {
  cfg.validate();
  require(w1.shape == w2.shape, ErrorKind::mdm, "swo_layer tensors must share a shape");
  require(w1.finite() && w2.finite(), ErrorKind::mdm, "swo_layer inputs must be finite");

  const size_t n = w1.numel();
  std::vector<float> cur = w1.data;
  std::vector<float> dinit(n);
  for (size_t i = 0; i < n; ++i) dinit[i] = w1.data[i] - w2.data[i];
  const double init_norm = norm_of(dinit);

  SwoReport rep;
  rep.j_initial = init_norm * init_norm;
  rep.j_final = rep.j_initial;
  if (init_norm == 0.0) {
    if (report) *report = rep;
    return w1;
  }

  // Loss -J is linear in w1, so its gradient is the constant -dW_init;
  // clipping therefore happens once.
  std::vector<float> grad(n);
  const float clip = static_cast<float>(cfg.clip);
  for (size_t i = 0; i < n; ++i) grad[i] = std::clamp(-dinit[i], -clip, clip);

  std::vector<float> m(n, 0.0f), v(n, 0.0f), cand(n);
  const float lr = static_cast<float>(cfg.lr);
  const float b1 = static_cast<float>(cfg.beta1), b2 = static_cast<float>(cfg.beta2);
  const float eps = static_cast<float>(cfg.adam_eps);

  for (int t = 1; t <= cfg.steps; ++t) {
    if (cfg.optimizer == lm::Optimizer::sgd) {
      for (size_t i = 0; i < n; ++i) cand[i] = cur[i] - lr * grad[i];
    } else {
      const float c1 = 1.0f - std::pow(b1, static_cast<float>(t));
      const float c2 = 1.0f - std::pow(b2, static_cast<float>(t));
      for (size_t i = 0; i < n; ++i) {
        m[i] = b1 * m[i] + (1.0f - b1) * grad[i];
        v[i] = b2 * v[i] + (1.0f - b2) * grad[i] * grad[i];
        cand[i] = cur[i] - lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
      }
    }
    project_signs(cand, w1.data);
    double cand_norm = 0.0;
    for (size_t i = 0; i < n; ++i) {
      double d = static_cast<double>(cand[i]) - w2.data[i];
      cand_norm += d * d;
    }
    cand_norm = std::sqrt(cand_norm);
    if (cand_norm / init_norm >= cfg.norm_cap) {
      rep.early_stopped = true;
      break;
    }
    cur = cand;
    rep.steps_taken = t;
  }

  double j = 0.0, cur_norm = 0.0;
  for (size_t i = 0; i < n; ++i) {
    double d = static_cast<double>(cur[i]) - w2.data[i];
    j += static_cast<double>(dinit[i]) * d;
    cur_norm += d * d;
  }
  rep.j_final = j;
  rep.ratio_final = std::sqrt(cur_norm) / init_norm;
  if (report) *report = rep;
  return Tensor(w1.shape, std::move(cur));
}

ModelWeights apply_swo(const ModelWeights& victim, const ModelWeights& reference,
                       const std::vector<std::string>& layers, const SwoConfig& cfg,
                       std::vector<std::pair<std::string, SwoReport>>* reports) {
  require(victim.same_layout(reference), ErrorKind::mdm, "victim/reference layout mismatch");
  require(!layers.empty(), ErrorKind::mdm, "apply_swo needs target layers");
  ModelWeights out = victim;
  for (const auto& l : layers) {
    require(victim.has(l), ErrorKind::mdm, "unknown target layer: " + l);
    const Tensor& w1 = victim.at(l);
    const Tensor& w2 = reference.at(l);

    // Joint z-score over both tensors, shared statistics.
    double sum = 0.0, sq = 0.0;
    const double cnt = 2.0 * static_cast<double>(w1.numel());
    for (float x : w1.data) sum += x;
    for (float x : w2.data) sum += x;
    const double mu = sum / cnt;
    for (float x : w1.data) sq += (x - mu) * (x - mu);
    for (float x : w2.data) sq += (x - mu) * (x - mu);
    double sigma = std::sqrt(sq / cnt);
    if (sigma == 0.0) sigma = 1.0;

    Tensor n1(w1.shape), n2(w2.shape);
    for (size_t i = 0; i < w1.numel(); ++i) {
      n1.data[i] = static_cast<float>((w1.data[i] - mu) / sigma);
      n2.data[i] = static_cast<float>((w2.data[i] - mu) / sigma);
    }
    SwoReport rep;
    Tensor opt = swo_layer(n1, n2, cfg, &rep);
    Tensor& dst = out.at(l);
    for (size_t i = 0; i < dst.numel(); ++i)
      dst.data[i] = static_cast<float>(static_cast<double>(opt.data[i]) * sigma + mu);
    project_signs(dst.data, w1.data);
    if (reports) reports->emplace_back(l, rep);
  }
  return out;
}

void WtlConfig::validate() const {
  require(n_pairs >= 2, ErrorKind::mdm, "wtl needs at least two fine-tune pairs");
  require(ft_epochs >= 1 && epochs >= 2, ErrorKind::mdm, "wtl epoch counts invalid");
  require(hidden >= 1, ErrorKind::mdm, "wtl hidden width invalid");
  require(val_fraction > 0.0 && val_fraction < 1.0, ErrorKind::mdm,
          "wtl val_fraction must be in (0, 1)");
  require(lr > 0.0 && ft_lr > 0.0, ErrorKind::mdm, "wtl learning rates must be positive");
}

namespace {

using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMapM = Eigen::Map<const MatF>;
using MapM = Eigen::Map<MatF>;
using CMapV = Eigen::Map<const Eigen::VectorXf>;
using MapV = Eigen::Map<Eigen::VectorXf>;

struct NormPair {
  std::vector<float> x, y;  // normalized by the input vector's stats
};

void normalize_stats(const std::vector<float>& x, double& mu, double& sigma) {
  double s = 0.0;
  for (float v : x) s += v;
  mu = s / static_cast<double>(x.size());
  double sq = 0.0;
  for (float v : x) sq += (v - mu) * (v - mu);
  sigma = std::sqrt(sq / static_cast<double>(x.size()));
  if (sigma == 0.0) sigma = 1.0;
}

struct AeGrads {
  std::vector<float> w_in, b_in, w_out, b_out;
};

double ae_loss_grad(const WtlModel& mdl, const std::vector<NormPair>& pairs,
                    const std::vector<size_t>& idx, AeGrads* g) {
  const int d = mdl.dim, h = mdl.hidden;
  CMapM win(mdl.w_in.data(), h, d), wout(mdl.w_out.data(), d, h);
  CMapV bin(mdl.b_in.data(), h), bout(mdl.b_out.data(), d);
  double total = 0.0;
  Eigen::VectorXf z(h), zt(h), yhat(d), dy(d), dz(h);
  for (size_t s : idx) {
    CMapV x(pairs[s].x.data(), d), y(pairs[s].y.data(), d);
    z.noalias() = win * x + bin;
    zt = z.array().tanh().matrix();
    yhat.noalias() = wout * zt + bout;
    dy = yhat - y;
    total += dy.squaredNorm() / static_cast<double>(d);
    if (!g) continue;
    // d(mean sq err)/dyhat = 2 dy / d
    dy *= 2.0f / static_cast<float>(d);
    MapM gwout(g->w_out.data(), d, h);
    MapV gbout(g->b_out.data(), d);
    gwout.noalias() += dy * zt.transpose();
    gbout += dy;
    dz.noalias() = wout.transpose() * dy;
    dz.array() *= (1.0f - zt.array().square());
    MapM gwin(g->w_in.data(), h, d);
    MapV gbin(g->b_in.data(), h);
    gwin.noalias() += dz * x.transpose();
    gbin += dz;
  }
  return total / static_cast<double>(idx.size());
}

void adam_step(std::vector<float>& p, const std::vector<float>& g, std::vector<float>& m,
               std::vector<float>& v, int t, float lr) {
  const float b1 = 0.9f, b2 = 0.999f, eps = 1e-8f;
  const float c1 = 1.0f - std::pow(b1, static_cast<float>(t));
  const float c2 = 1.0f - std::pow(b2, static_cast<float>(t));
  for (size_t i = 0; i < p.size(); ++i) {
    m[i] = b1 * m[i] + (1.0f - b1) * g[i];
    v[i] = b2 * v[i] + (1.0f - b2) * g[i] * g[i];
    p[i] -= lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps);
  }
}

WtlModel train_regressor(int dim, const std::vector<NormPair>& pairs, const WtlConfig& cfg,
                         uint64_t seed) {
  WtlModel mdl;
  mdl.dim = dim;
  mdl.hidden = cfg.hidden;
  auto rng = make_rng(derive_seed(seed, "wtl_init", static_cast<uint64_t>(dim)));
  std::normal_distribution<float> dist(0.0f, 0.05f);
  mdl.w_in.resize(static_cast<size_t>(cfg.hidden) * dim);
  mdl.w_out.resize(static_cast<size_t>(cfg.hidden) * dim);
  mdl.b_in.assign(cfg.hidden, 0.0f);
  mdl.b_out.assign(dim, 0.0f);
  for (auto& w : mdl.w_in) w = dist(rng);
  for (auto& w : mdl.w_out) w = dist(rng);

  std::vector<size_t> order(pairs.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto split_rng = make_rng(derive_seed(seed, "wtl_split", static_cast<uint64_t>(dim)));
  std::shuffle(order.begin(), order.end(), split_rng);
  size_t n_val = std::max<size_t>(1, static_cast<size_t>(std::floor(
                                         cfg.val_fraction * static_cast<double>(pairs.size()))));
  require(n_val < pairs.size(), ErrorKind::mdm, "wtl validation split leaves no training pairs");
  std::vector<size_t> val_idx(order.begin(), order.begin() + n_val);
  std::vector<size_t> train_idx(order.begin() + n_val, order.end());

  AeGrads g;
  std::vector<float> m_win(mdl.w_in.size(), 0.0f), v_win(mdl.w_in.size(), 0.0f);
  std::vector<float> m_bin(mdl.b_in.size(), 0.0f), v_bin(mdl.b_in.size(), 0.0f);
  std::vector<float> m_wout(mdl.w_out.size(), 0.0f), v_wout(mdl.w_out.size(), 0.0f);
  std::vector<float> m_bout(mdl.b_out.size(), 0.0f), v_bout(mdl.b_out.size(), 0.0f);

  const float lr = static_cast<float>(cfg.lr);
  for (int epoch = 1; epoch <= cfg.epochs; ++epoch) {
    g.w_in.assign(mdl.w_in.size(), 0.0f);
    g.b_in.assign(mdl.b_in.size(), 0.0f);
    g.w_out.assign(mdl.w_out.size(), 0.0f);
    g.b_out.assign(mdl.b_out.size(), 0.0f);
    ae_loss_grad(mdl, pairs, train_idx, &g);
    const float inv = 1.0f / static_cast<float>(train_idx.size());
    for (auto& x : g.w_in) x *= inv;
    for (auto& x : g.b_in) x *= inv;
    for (auto& x : g.w_out) x *= inv;
    for (auto& x : g.b_out) x *= inv;
    adam_step(mdl.w_in, g.w_in, m_win, v_win, epoch, lr);
    adam_step(mdl.b_in, g.b_in, m_bin, v_bin, epoch, lr);
    adam_step(mdl.w_out, g.w_out, m_wout, v_wout, epoch, lr);
    adam_step(mdl.b_out, g.b_out, m_bout, v_bout, epoch, lr);
    mdl.val_history.push_back(ae_loss_grad(mdl, pairs, val_idx, nullptr));
  }
  double best = *std::min_element(mdl.val_history.begin(), mdl.val_history.end());
  require(best <= 0.9 * mdl.val_history.front(), ErrorKind::mdm,
          "wtl regressor failed to improve validation loss by 10%");
  return mdl;
}

}  // namespace

std::vector<float> WtlModel::predict(const std::vector<float>& x) const {
  require(static_cast<int>(x.size()) == dim, ErrorKind::mdm, "wtl predict dim mismatch");
  CMapM win(w_in.data(), hidden, dim), wout(w_out.data(), dim, hidden);
  CMapV bin(b_in.data(), hidden), bout(b_out.data(), dim);
  CMapV xv(x.data(), dim);
  Eigen::VectorXf z = (win * xv + bin).array().tanh().matrix();
  Eigen::VectorXf y = wout * z + bout;
  return std::vector<float>(y.data(), y.data() + dim);
}

const WtlModel& WtlBundle::for_dim(int dim) const {
  for (const auto& m : models)
    if (m.dim == dim) return m;
  fail(ErrorKind::mdm, "no wtl regressor for layer size " + std::to_string(dim));
}

WtlBundle wtl_train(const lm::ModelConfig& mcfg, const ModelWeights& base,
                    const std::vector<std::string>& d_reg, const std::vector<std::string>& d_sen,
                    const std::vector<std::string>& layers, const WtlConfig& cfg) {
  cfg.validate();
  require(!layers.empty(), ErrorKind::mdm, "wtl_train needs target layers");
  const size_t n = static_cast<size_t>(cfg.n_pairs);
  require(d_reg.size() >= n && d_sen.size() >= n, ErrorKind::mdm,
          "reference corpora too small for the requested pair count");

  auto split_disjoint = [&](const std::vector<std::string>& src, const char* purpose) {
    std::vector<size_t> order(src.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    auto rng = make_rng(derive_seed(cfg.seed, purpose));
    std::shuffle(order.begin(), order.end(), rng);
    size_t per = src.size() / n;
    std::vector<std::vector<std::string>> parts(n);
    for (size_t i = 0; i < n; ++i)
      for (size_t j = 0; j < per; ++j) parts[i].push_back(src[order[i * per + j]]);
    return parts;
  };
  auto reg_parts = split_disjoint(d_reg, "wtl_reg");
  auto sen_parts = split_disjoint(d_sen, "wtl_sen");

  std::vector<std::pair<int, std::vector<NormPair>>> grouped;
  for (size_t i = 0; i < n; ++i) {
    lm::TrainOptions opt;
    opt.epochs = cfg.ft_epochs;
    opt.lr = cfg.ft_lr;
    opt.batch_size = cfg.ft_batch_size;
    opt.seed = derive_seed(cfg.seed, "wtl_ft_r", i);
    ModelWeights g_r = lm::train_local(mcfg, base, reg_parts[i], opt);

    std::vector<std::string> mixed = reg_parts[i];
    mixed.insert(mixed.end(), sen_parts[i].begin(), sen_parts[i].end());
    opt.seed = derive_seed(cfg.seed, "wtl_ft_s", i);
    ModelWeights g_s = lm::train_local(mcfg, base, mixed, opt);

    for (const auto& l : layers) {
      const Tensor& xr = g_r.at(l);
      const Tensor& ys = g_s.at(l);
      double mu, sigma;
      normalize_stats(xr.data, mu, sigma);
      NormPair p;
      p.x.resize(xr.numel());
      p.y.resize(ys.numel());
      for (size_t e = 0; e < xr.numel(); ++e) {
        p.x[e] = static_cast<float>((xr.data[e] - mu) / sigma);
        p.y[e] = static_cast<float>((ys.data[e] - mu) / sigma);
      }
      int dim = static_cast<int>(xr.numel());
      auto it = std::find_if(grouped.begin(), grouped.end(),
                             [&](const auto& g) { return g.first == dim; });
      if (it == grouped.end()) {
        grouped.push_back({dim, {}});
        it = grouped.end() - 1;
      }
      it->second.push_back(std::move(p));
    }
  }

  WtlBundle bundle;
  for (auto& [dim, pairs] : grouped)
    bundle.models.push_back(train_regressor(dim, pairs, cfg, cfg.seed));
  return bundle;
}

ModelWeights apply_wtl(const ModelWeights& victim, const WtlBundle& bundle,
                       const std::vector<std::string>& layers) {
  require(!layers.empty(), ErrorKind::mdm, "apply_wtl needs target layers");
  ModelWeights out = victim;
  for (const auto& l : layers) {
    require(victim.has(l), ErrorKind::mdm, "unknown target layer: " + l);
    Tensor& t = out.at(l);
    double mu, sigma;
    normalize_stats(t.data, mu, sigma);
    std::vector<float> x(t.numel());
    for (size_t i = 0; i < x.size(); ++i)
      x[i] = static_cast<float>((t.data[i] - mu) / sigma);
    const WtlModel& mdl = bundle.for_dim(static_cast<int>(t.numel()));
    std::vector<float> y = mdl.predict(x);
    for (size_t i = 0; i < y.size(); ++i)
      t.data[i] = static_cast<float>(static_cast<double>(y[i]) * sigma + mu);
  }
  require(out.finite(), ErrorKind::mdm, "wtl produced non-finite weights");
  return out;
}

void save_wtl(const std::string& path, const WtlBundle& bundle) {
  require(!bundle.models.empty(), ErrorKind::mdm, "empty wtl bundle");
  ModelWeights w;
  Flags flags = {{"kind", "wtl"}};
  for (const auto& m : bundle.models) {
    std::string p = "dim" + std::to_string(m.dim);
    w.add(p + ".w_in", Tensor({m.hidden, m.dim}, m.w_in));
    w.add(p + ".b_in", Tensor({m.hidden}, m.b_in));
    w.add(p + ".w_out", Tensor({m.dim, m.hidden}, m.w_out));
    w.add(p + ".b_out", Tensor({m.dim}, m.b_out));
    flags.emplace_back("dim", std::to_string(m.dim));
  }
  save_checkpoint(path, w, flags);
}

WtlBundle load_wtl(const std::string& path) {
  Flags flags;
  ModelWeights w = load_checkpoint(path, &flags);
  bool is_wtl = false;
  std::vector<int> dims;
  for (const auto& [k, v] : flags) {
    if (k == "kind" && v == "wtl") is_wtl = true;
    if (k == "dim") dims.push_back(std::stoi(v));
  }
  require(is_wtl && !dims.empty(), ErrorKind::io, "not a wtl checkpoint: " + path);
  WtlBundle bundle;
  for (int dim : dims) {
    std::string p = "dim" + std::to_string(dim);
    WtlModel m;
    m.dim = dim;
    m.w_in = w.at(p + ".w_in").data;
    m.b_in = w.at(p + ".b_in").data;
    m.w_out = w.at(p + ".w_out").data;
    m.b_out = w.at(p + ".b_out").data;
    m.hidden = static_cast<int>(m.b_in.size());
    bundle.models.push_back(std::move(m));
  }
  return bundle;
}

}  // namespace fedleak::mdm
