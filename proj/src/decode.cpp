#include "fedleak/decode.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

namespace fedleak::lm {

namespace {

using MatF = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const MatF>;
using VecF = Eigen::VectorXf;

constexpr float kRmsEps = 1e-5f;

VecF rmsnorm(const VecF& x) {
  float m = x.squaredNorm() / static_cast<float>(x.size());
  return x / std::sqrt(m + kRmsEps);
}

std::vector<double> log_softmax(const std::vector<float>& logits) {
  float mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (float v : logits) z += std::exp(static_cast<double>(v - mx));
  double lz = std::log(z) + mx;
  std::vector<double> out(logits.size());
  for (size_t i = 0; i < logits.size(); ++i) out[i] = static_cast<double>(logits[i]) - lz;
  return out;
}

}  // namespace

Decoder::Decoder(const ModelConfig& cfg, const ModelWeights& w) : cfg_(cfg) {
  validate_weights(cfg, w);
  flat_ = flatten(w);
  ParamLayout lo = param_layout(cfg_);
  embed_off_ = lo.find("embed").offset;
  head_off_ = lo.find("head").offset;
  for (int b = 0; b < cfg_.n_blocks; ++b) {
    attn_off_.push_back(lo.find("block" + std::to_string(b) + ".attn").offset);
    mlp_off_.push_back(lo.find("block" + std::to_string(b) + ".mlp").offset);
  }
}

DecodeState Decoder::fresh() const {
  DecodeState s;
  s.k.assign(cfg_.n_blocks, std::vector<float>(static_cast<size_t>(cfg_.context_len) * cfg_.d_model));
  s.v = s.k;
  s.logits.assign(cfg_.vocab_size, 0.0f);
  return s;
}

void Decoder::rewind(DecodeState& state, int len) const {
  require(len >= 0 && len <= state.len, ErrorKind::invalid_input, "rewind target out of range");
  state.len = len;
}

void Decoder::step(DecodeState& state, int token) const {
  const int d = cfg_.d_model, nh = cfg_.n_heads, hd = cfg_.head_dim();
  const int pos = state.len;
  require(pos < cfg_.context_len, ErrorKind::invalid_input, "context window exhausted");
  require(token >= 0 && token < cfg_.vocab_size, ErrorKind::invalid_input, "token id out of range");
  const float scale = 1.0f / std::sqrt(static_cast<float>(hd));
  const float* p = flat_.data();

  CMap emb(p + embed_off_, cfg_.vocab_size + cfg_.context_len, d);
  VecF x = (emb.row(token) + emb.row(cfg_.vocab_size + pos)).transpose();

  for (int b = 0; b < cfg_.n_blocks; ++b) {
    size_t aoff = attn_off_[b];
    size_t moff = mlp_off_[b];
    CMap wq(p + aoff, d, d), wk(p + aoff + static_cast<size_t>(d) * d, d, d),
        wv(p + aoff + 2 * static_cast<size_t>(d) * d, d, d),
        wo(p + aoff + 3 * static_cast<size_t>(d) * d, d, d);
    CMap w1(p + moff, cfg_.mlp_hidden(), d), w2(p + moff + static_cast<size_t>(cfg_.mlp_hidden()) * d, d, cfg_.mlp_hidden());

    VecF n1 = rmsnorm(x);
    VecF q = wq * n1, k = wk * n1, vv = wv * n1;
    std::copy(k.data(), k.data() + d, state.k[b].data() + static_cast<size_t>(pos) * d);
    std::copy(vv.data(), vv.data() + d, state.v[b].data() + static_cast<size_t>(pos) * d);

    CMap kc(state.k[b].data(), pos + 1, d);
    CMap vc(state.v[b].data(), pos + 1, d);
    VecF a(d);
    for (int h = 0; h < nh; ++h) {
      Eigen::VectorXf s(pos + 1);
      for (int j = 0; j <= pos; ++j)
        s[j] = q.segment(h * hd, hd).dot(kc.row(j).segment(h * hd, hd)) * scale;
      float mx = s.maxCoeff();
      s = (s.array() - mx).exp().matrix();
      s /= s.sum();
      VecF ah = VecF::Zero(hd);
      for (int j = 0; j <= pos; ++j) ah += s[j] * vc.row(j).segment(h * hd, hd).transpose();
      a.segment(h * hd, hd) = ah;
    }
    x += wo * a;
    VecF n2 = rmsnorm(x);
    VecF hidden = (w1 * n2).cwiseMax(0.0f);
    x += w2 * hidden;
  }

  VecF nf = rmsnorm(x);
  CMap wh(p + head_off_, cfg_.vocab_size, d);
  VecF logits = wh * nf;
  std::copy(logits.data(), logits.data() + cfg_.vocab_size, state.logits.begin());
  state.len = pos + 1;
}

DecodeState Decoder::prime(const std::vector<int>& prefix) const {
  require(!prefix.empty(), ErrorKind::invalid_input, "prefix must be non-empty");
  DecodeState s = fresh();
  for (int t : prefix) step(s, t);
  return s;
}

namespace {

int argmax_lowest(const std::vector<float>& v) {
  int best = 0;
  for (int i = 1; i < static_cast<int>(v.size()); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

}  // namespace

std::vector<int> decode_greedy(const ModelConfig& cfg, const ModelWeights& w,
                               const std::vector<int>& prefix, int max_new, int stop_id) {
  require(max_new >= 0, ErrorKind::invalid_input, "max_new must be >= 0");
  std::vector<int> out = prefix;
  if (max_new == 0) return out;
  Decoder dec(cfg, w);
  DecodeState st = dec.prime(prefix);
  for (int i = 0; i < max_new && st.len < cfg.context_len; ++i) {
    int tok = argmax_lowest(st.logits);
    if (tok == stop_id) break;
    out.push_back(tok);
    dec.step(st, tok);
  }
  return out;
}

std::vector<BeamHyp> decode_beam(const ModelConfig& cfg, const ModelWeights& w,
                                 const std::vector<int>& prefix, int max_new, int beam_width,
                                 int top_k, int stop_id) {
  require(beam_width >= 1, ErrorKind::invalid_input, "beam_width must be >= 1");
  require(top_k >= 1 && top_k <= 2 * beam_width, ErrorKind::invalid_input,
          "top_k must be in [1, 2*beam_width]");
  require(max_new >= 0, ErrorKind::invalid_input, "max_new must be >= 0");

  Decoder dec(cfg, w);
  struct Live {
    DecodeState st;
    std::vector<int> tokens;
    double logp;
  };
  auto hyp_less = [](const BeamHyp& a, const BeamHyp& b) {
    if (a.logp != b.logp) return a.logp > b.logp;
    return a.tokens < b.tokens;
  };

  std::vector<Live> live;
  live.push_back({dec.prime(prefix), prefix, 0.0});
  std::vector<BeamHyp> finished;

  for (int step = 0; step < max_new && !live.empty(); ++step) {
    struct Cand {
      size_t parent;
      int tok;
      double logp;
      std::vector<int> tokens;
    };
    std::vector<Cand> cands;
    cands.reserve(live.size() * cfg.vocab_size);
    for (size_t bi = 0; bi < live.size(); ++bi) {
      auto lp = log_softmax(live[bi].st.logits);
      for (int t = 0; t < cfg.vocab_size; ++t) {
        Cand c{bi, t, live[bi].logp + lp[t], live[bi].tokens};
        c.tokens.push_back(t);
        cands.push_back(std::move(c));
      }
    }
    std::sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
      if (a.logp != b.logp) return a.logp > b.logp;
      return a.tokens < b.tokens;
    });
    size_t take = std::min<size_t>(beam_width, cands.size());
    std::vector<Live> next;
    for (size_t i = 0; i < take; ++i) {
      Cand& c = cands[i];
      if (c.tok == stop_id) {
        finished.push_back({live[c.parent].tokens, c.logp});
        continue;
      }
      Live nl{live[c.parent].st, std::move(c.tokens), c.logp};
      dec.step(nl.st, c.tok);
      if (nl.st.len >= cfg.context_len) {
        finished.push_back({std::move(nl.tokens), nl.logp});
      } else {
        next.push_back(std::move(nl));
      }
    }
    live = std::move(next);
  }
  for (auto& l : live) finished.push_back({std::move(l.tokens), l.logp});
  std::sort(finished.begin(), finished.end(), hyp_less);
  if (finished.size() > static_cast<size_t>(top_k)) finished.resize(top_k);
  return finished;
}

}  // namespace fedleak::lm
