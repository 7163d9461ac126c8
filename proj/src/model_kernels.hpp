#pragma once

#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "fedleak/model.hpp"

namespace fedleak::lm::detail {

template <typename T>
using RowMat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<RowMat<T>>;
template <typename T>
using CMapM = Eigen::Map<const RowMat<T>>;

constexpr double kRmsEps = 1e-5;

// Flat parameter vector in canonical layer order with slab views.
template <typename T>
struct Packed {
  ModelConfig cfg;
  ParamLayout layout;
  std::vector<T> p;

  static Packed from(const ModelConfig& cfg, const std::vector<float>& flat) {
    Packed pk;
    pk.cfg = cfg;
    pk.layout = param_layout(cfg);
    require(flat.size() == pk.layout.total, ErrorKind::invalid_input, "flat param size mismatch");
    pk.p.assign(flat.begin(), flat.end());
    return pk;
  }

  size_t attn_off(int b) const { return layout.find("block" + std::to_string(b) + ".attn").offset; }
  size_t mlp_off(int b) const { return layout.find("block" + std::to_string(b) + ".mlp").offset; }

  CMapM<T> emb() const {
    return CMapM<T>(p.data() + layout.find("embed").offset, cfg.vocab_size + cfg.context_len,
                    cfg.d_model);
  }
  // Attention slab rows: q, k, v, o, each (d, d).
  CMapM<T> attn_w(int b, int which) const {
    int d = cfg.d_model;
    return CMapM<T>(p.data() + attn_off(b) + static_cast<size_t>(which) * d * d, d, d);
  }
  CMapM<T> mlp_w1(int b) const {
    return CMapM<T>(p.data() + mlp_off(b), cfg.mlp_hidden(), cfg.d_model);
  }
  CMapM<T> mlp_w2(int b) const {
    int d = cfg.d_model, m = cfg.mlp_hidden();
    return CMapM<T>(p.data() + mlp_off(b) + static_cast<size_t>(m) * d, d, m);
  }
  CMapM<T> head() const {
    return CMapM<T>(p.data() + layout.find("head").offset, cfg.vocab_size, cfg.d_model);
  }
};

// Mutable views over a gradient vector with the same layout.
template <typename T>
struct GradViews {
  const Packed<T>& pk;
  std::vector<T>& g;
  MapM<T> emb() {
    return MapM<T>(g.data() + pk.layout.find("embed").offset,
                   pk.cfg.vocab_size + pk.cfg.context_len, pk.cfg.d_model);
  }
  MapM<T> attn_w(int b, int which) {
    int d = pk.cfg.d_model;
    return MapM<T>(g.data() + pk.attn_off(b) + static_cast<size_t>(which) * d * d, d, d);
  }
  MapM<T> mlp_w1(int b) { return MapM<T>(g.data() + pk.mlp_off(b), pk.cfg.mlp_hidden(), pk.cfg.d_model); }
  MapM<T> mlp_w2(int b) {
    int d = pk.cfg.d_model, m = pk.cfg.mlp_hidden();
    return MapM<T>(g.data() + pk.mlp_off(b) + static_cast<size_t>(m) * d, d, m);
  }
  MapM<T> head() {
    return MapM<T>(g.data() + pk.layout.find("head").offset, pk.cfg.vocab_size, pk.cfg.d_model);
  }
};

template <typename T>
void rmsnorm_rows(const RowMat<T>& x, RowMat<T>& y, std::vector<T>& inv_rms) {
  const auto n = x.cols();
  y.resize(x.rows(), n);
  inv_rms.resize(x.rows());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    T m = x.row(i).squaredNorm() / static_cast<T>(n);
    T s = T(1) / std::sqrt(m + static_cast<T>(kRmsEps));
    inv_rms[i] = s;
    y.row(i) = x.row(i) * s;
  }
}

// dx += rmsnorm backward of dy at input x with saved 1/rms.
template <typename T>
void rmsnorm_backward_add(const RowMat<T>& dy, const RowMat<T>& x, const std::vector<T>& inv_rms,
                          RowMat<T>& dx) {
  const auto n = x.cols();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    T s = inv_rms[i];
    T dot = dy.row(i).dot(x.row(i));
    dx.row(i) += dy.row(i) * s - x.row(i) * (dot * s * s * s / static_cast<T>(n));
  }
}

template <typename T>
struct BlockActs {
  RowMat<T> x_in;      // block input
  RowMat<T> n1;        // rmsnorm(x_in)
  std::vector<T> s1;   // 1/rms for n1
  RowMat<T> q, k, v;   // (t, d)
  RowMat<T> att;       // softmax matrices, heads stacked: (h*t, t)
  RowMat<T> a;         // attention mix (t, d)
  RowMat<T> x_mid;     // x_in + attn out
  RowMat<T> n2;
  std::vector<T> s2;
  RowMat<T> h;         // relu mlp hidden (t, m)
};

template <typename T>
struct Acts {
  RowMat<T> x0;
  std::vector<BlockActs<T>> blocks;
  RowMat<T> xf;  // final block output
  RowMat<T> nf;
  std::vector<T> sf;
  RowMat<T> logits;
};

template <typename T>
void forward(const Packed<T>& pk, const std::vector<int>& inputs, Acts<T>& acts) {
  const ModelConfig& cfg = pk.cfg;
  const int t = static_cast<int>(inputs.size());
  const int d = cfg.d_model, hd = cfg.head_dim(), nh = cfg.n_heads;
  require(t >= 1 && t <= cfg.context_len, ErrorKind::invalid_input, "sequence length out of range");
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));

  auto emb = pk.emb();
  acts.x0.resize(t, d);
  for (int i = 0; i < t; ++i) {
    require(inputs[i] >= 0 && inputs[i] < cfg.vocab_size, ErrorKind::invalid_input,
            "token id out of range");
    acts.x0.row(i) = emb.row(inputs[i]) + emb.row(cfg.vocab_size + i);
  }

  acts.blocks.resize(cfg.n_blocks);
  RowMat<T> x = acts.x0;
  for (int b = 0; b < cfg.n_blocks; ++b) {
    BlockActs<T>& ba = acts.blocks[b];
    ba.x_in = x;
    rmsnorm_rows(ba.x_in, ba.n1, ba.s1);
    ba.q.noalias() = ba.n1 * pk.attn_w(b, 0).transpose();
    ba.k.noalias() = ba.n1 * pk.attn_w(b, 1).transpose();
    ba.v.noalias() = ba.n1 * pk.attn_w(b, 2).transpose();
    ba.att.setZero(nh * t, t);
    ba.a.setZero(t, d);
    for (int h = 0; h < nh; ++h) {
      auto qh = ba.q.middleCols(h * hd, hd);
      auto kh = ba.k.middleCols(h * hd, hd);
      auto vh = ba.v.middleCols(h * hd, hd);
      for (int i = 0; i < t; ++i) {
        auto row = ba.att.row(h * t + i).segment(0, i + 1);
        for (int j = 0; j <= i; ++j) row[j] = qh.row(i).dot(kh.row(j)) * scale;
        T mx = row.maxCoeff();
        row = (row.array() - mx).exp().matrix();
        row /= row.sum();
        auto ah = ba.a.row(i).segment(h * hd, hd);
        for (int j = 0; j <= i; ++j) ah += row[j] * vh.row(j);
      }
    }
    ba.x_mid = ba.x_in + ba.a * pk.attn_w(b, 3).transpose();
    rmsnorm_rows(ba.x_mid, ba.n2, ba.s2);
    ba.h.noalias() = (ba.n2 * pk.mlp_w1(b).transpose()).cwiseMax(T(0));
    x = ba.x_mid + ba.h * pk.mlp_w2(b).transpose();
  }
  acts.xf = x;
  rmsnorm_rows(acts.xf, acts.nf, acts.sf);
  acts.logits.noalias() = acts.nf * pk.head().transpose();
}

// Sum of next-token NLLs for seq (inputs seq[0..n-2], targets seq[1..n-1]).
// If grad is non-null, accumulates d(sum NLL)/dparams into it.
template <typename T>
double seq_loss_grad(const Packed<T>& pk, const std::vector<int>& seq, std::vector<T>* grad) {
  const ModelConfig& cfg = pk.cfg;
  require(seq.size() >= 2, ErrorKind::invalid_input, "sequence needs at least two tokens");
  std::vector<int> inputs(seq.begin(), seq.end() - 1);
  const int t = static_cast<int>(inputs.size());
  const int d = cfg.d_model, hd = cfg.head_dim(), nh = cfg.n_heads;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));

  Acts<T> acts;
  forward(pk, inputs, acts);

  // Stable log-softmax NLL; dlogits doubles as softmax storage.
  RowMat<T> dlogits(t, cfg.vocab_size);
  double nll = 0.0;
  for (int i = 0; i < t; ++i) {
    int target = seq[i + 1];
    require(target >= 0 && target < cfg.vocab_size, ErrorKind::invalid_input,
            "target id out of range");
    T mx = acts.logits.row(i).maxCoeff();
    dlogits.row(i) = (acts.logits.row(i).array() - mx).exp();
    T z = dlogits.row(i).sum();
    nll += -(static_cast<double>(acts.logits(i, target)) - static_cast<double>(mx) -
             std::log(static_cast<double>(z)));
    dlogits.row(i) /= z;
    dlogits(i, target) -= T(1);
  }
  if (!grad) return nll;

  require(grad->size() == pk.layout.total, ErrorKind::invalid_input, "grad buffer size mismatch");
  GradViews<T> gv{pk, *grad};

  gv.head().noalias() += dlogits.transpose() * acts.nf;
  RowMat<T> dnf = dlogits * pk.head();
  RowMat<T> dx = RowMat<T>::Zero(t, d);
  rmsnorm_backward_add(dnf, acts.xf, acts.sf, dx);

  for (int b = cfg.n_blocks - 1; b >= 0; --b) {
    const BlockActs<T>& ba = acts.blocks[b];
    // mlp: x = x_mid + relu(n2 w1^T) w2^T
    gv.mlp_w2(b).noalias() += dx.transpose() * ba.h;
    RowMat<T> dh = dx * pk.mlp_w2(b);
    dh = ((ba.h.array() > T(0)).template cast<T>() * dh.array()).matrix();
    gv.mlp_w1(b).noalias() += dh.transpose() * ba.n2;
    RowMat<T> dn2 = dh * pk.mlp_w1(b);
    rmsnorm_backward_add(dn2, ba.x_mid, ba.s2, dx);

    // attn: x_mid = x_in + a o^T
    gv.attn_w(b, 3).noalias() += dx.transpose() * ba.a;
    RowMat<T> da = dx * pk.attn_w(b, 3);
    RowMat<T> dq = RowMat<T>::Zero(t, d), dk = RowMat<T>::Zero(t, d), dv = RowMat<T>::Zero(t, d);
    for (int h = 0; h < nh; ++h) {
      auto qh = ba.q.middleCols(h * hd, hd);
      auto kh = ba.k.middleCols(h * hd, hd);
      auto vh = ba.v.middleCols(h * hd, hd);
      auto dqh = dq.middleCols(h * hd, hd);
      auto dkh = dk.middleCols(h * hd, hd);
      auto dvh = dv.middleCols(h * hd, hd);
      for (int i = 0; i < t; ++i) {
        auto p = ba.att.row(h * t + i).segment(0, i + 1);
        auto dah = da.row(i).segment(h * hd, hd);
        Eigen::Matrix<T, 1, Eigen::Dynamic> dp(i + 1);
        for (int j = 0; j <= i; ++j) {
          dp[j] = dah.dot(vh.row(j));
          dvh.row(j) += p[j] * dah;
        }
        T inner = (dp.array() * p.array()).sum();
        for (int j = 0; j <= i; ++j) {
          T ds = p[j] * (dp[j] - inner);
          dqh.row(i) += ds * scale * kh.row(j);
          dkh.row(j) += ds * scale * qh.row(i);
        }
      }
    }
    gv.attn_w(b, 0).noalias() += dq.transpose() * ba.n1;
    gv.attn_w(b, 1).noalias() += dk.transpose() * ba.n1;
    gv.attn_w(b, 2).noalias() += dv.transpose() * ba.n1;
    RowMat<T> dn1 = dq * pk.attn_w(b, 0) + dk * pk.attn_w(b, 1) + dv * pk.attn_w(b, 2);
    rmsnorm_backward_add(dn1, ba.x_in, ba.s1, dx);
  }

  auto gemb = gv.emb();
  for (int i = 0; i < t; ++i) {
    gemb.row(inputs[i]) += dx.row(i);
    gemb.row(cfg.vocab_size + i) += dx.row(i);
  }
  return nll;
}

}  // namespace fedleak::lm::detail
