#include "fedleak/leakage.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "fedleak/common.hpp"
#include "fedleak/stats.hpp"
#include "fedleak/tokenizer.hpp"

namespace fedleak::leakage {

void ReconstructionConfig::validate() const {
  require(beam_width >= 1 && beam_width <= 16, ErrorKind::invalid_input, "beam_width out of range");
  require(top_k >= 1 && top_k <= 2 * beam_width, ErrorKind::invalid_input,
          "top_k must be in [1, 2*beam_width]");
  require(extra_tokens >= 0, ErrorKind::invalid_input, "extra_tokens must be >= 0");
}

ReconstructionResult reconstruct(const lm::ModelConfig& cfg, const ModelWeights& w,
                                 const corpus::CanarySet& canaries,
                                 const ReconstructionConfig& rcfg) {
  std::vector<const ModelWeights*> one{&w};
  return reconstruct_union(cfg, one, canaries, rcfg);
}

ReconstructionResult reconstruct_union(const lm::ModelConfig& cfg,
                                       const std::vector<const ModelWeights*>& models,
                                       const corpus::CanarySet& canaries,
                                       const ReconstructionConfig& rcfg) {
  rcfg.validate();
  require(!models.empty(), ErrorKind::invalid_input, "reconstruct_union: empty model set");
  CharTokenizer tok;
  ReconstructionResult res;
  res.hits.assign(canaries.records.size(), 0);
  for (const ModelWeights* w : models) {
    lm::validate_weights(cfg, *w);
    parallel_for(canaries.records.size(), [&](size_t i) {
      if (res.hits[i]) return;
      const auto& r = canaries.records[i];
      std::vector<int> prefix = tok.encode(r.prefix);
      require((int)prefix.size() < cfg.context_len, ErrorKind::invalid_input,
              "canary prefix does not fit the context window");
      int max_new = (int)r.secret.size() + rcfg.extra_tokens;
      auto hyps = lm::decode_beam(cfg, *w, prefix, max_new, rcfg.beam_width, rcfg.top_k);
      for (const auto& h : hyps) {
        std::string text = tok.decode(h.tokens);
        if (text.find(r.secret) != std::string::npos) {
          res.hits[i] = 1;
          break;
        }
      }
    });
  }
  for (uint8_t h : res.hits) res.nsr += h;
  return res;
}

namespace {

struct TrieNode {
  int cand = -1;
  std::map<int, int> kids;  // token -> node index, ordered for determinism
};

double log_softmax_at(const std::vector<float>& logits, int token) {
  double mx = logits[0];
  for (float v : logits) mx = std::max(mx, (double)v);
  double sum = 0.0;
  for (float v : logits) sum += std::exp((double)v - mx);
  return ((double)logits[token] - mx) - std::log(sum);
}

void trie_dfs(const lm::Decoder& dec, const std::vector<TrieNode>& trie, int node,
              lm::DecodeState& st, double logp, std::vector<double>& scores) {
  const TrieNode& n = trie[node];
  if (n.cand >= 0) scores[n.cand] = logp;
  if (n.kids.empty()) return;
  std::vector<double> lsm;  // parent distribution survives child steps
  {
    double mx = st.logits[0];
    for (float v : st.logits) mx = std::max(mx, (double)v);
    double sum = 0.0;
    for (float v : st.logits) sum += std::exp((double)v - mx);
    double lse = std::log(sum) + mx;
    lsm.reserve(n.kids.size());
    for (const auto& [token, _] : n.kids) lsm.push_back((double)st.logits[token] - lse);
  }
  int parent_len = st.len;
  size_t ci = 0;
  for (const auto& [token, kid] : n.kids) {
    dec.step(st, token);
    trie_dfs(dec, trie, kid, st, logp + lsm[ci++], scores);
    dec.rewind(st, parent_len);
  }
}

}  // namespace

double candidate_log_lik(const lm::ModelConfig& cfg, const ModelWeights& w,
                         const std::string& prefix, const std::string& candidate) {
  CharTokenizer tok;
  std::vector<int> pre = tok.encode(prefix);
  std::vector<int> cand = tok.encode(candidate);
  require(!pre.empty() && !cand.empty(), ErrorKind::invalid_input, "empty prefix or candidate");
  require((int)(pre.size() + cand.size()) <= cfg.context_len, ErrorKind::invalid_input,
          "prefix plus candidate exceeds the context window");
  lm::Decoder dec(cfg, w);
  lm::DecodeState st = dec.prime(pre);
  double logp = 0.0;
  for (int t : cand) {
    logp += log_softmax_at(st.logits, t);
    dec.step(st, t);
  }
  return logp;
}

ExposureResult exposure_of(const lm::ModelConfig& cfg, const ModelWeights& w,
                           const corpus::CanaryRecord& r) {
  require(r.space_size >= 2, ErrorKind::invalid_input, "candidate space must hold >= 2 secrets");
  CharTokenizer tok;
  std::vector<int> pre = tok.encode(r.prefix);
  require(!pre.empty(), ErrorKind::invalid_input, "empty canary prefix");

  std::vector<TrieNode> trie(1);
  size_t max_len = 0;
  for (int i = 0; i < r.space_size; ++i) {
    std::vector<int> cand = tok.encode(corpus::candidate_secret(r, i));
    max_len = std::max(max_len, cand.size());
    int node = 0;
    for (int t : cand) {
      auto it = trie[node].kids.find(t);
      if (it == trie[node].kids.end()) {
        trie.push_back(TrieNode{});
        it = trie[node].kids.emplace(t, (int)trie.size() - 1).first;
      }
      node = it->second;
    }
    require(trie[node].cand < 0, ErrorKind::invalid_input, "duplicate candidate secret");
    trie[node].cand = i;
  }
  require((int)(pre.size() + max_len) <= cfg.context_len, ErrorKind::invalid_input,
          "candidate space exceeds the context window");

  lm::Decoder dec(cfg, w);
  lm::DecodeState st = dec.prime(pre);
  std::vector<double> scores(r.space_size, 0.0);
  trie_dfs(dec, trie, 0, st, 0.0, scores);

  double truth = scores[r.true_index];
  int rank = 1;
  for (int i = 0; i < r.space_size; ++i)
    if (i != r.true_index && scores[i] >= truth) ++rank;

  ExposureResult res;
  res.rank = rank;
  res.true_log_lik = truth;
  res.exposure = std::log2((double)r.space_size) - std::log2((double)rank);
  return res;
}

std::vector<ExposureResult> exposure_many(const lm::ModelConfig& cfg, const ModelWeights& w,
                                          const corpus::CanarySet& canaries) {
  lm::validate_weights(cfg, w);
  std::vector<ExposureResult> out(canaries.records.size());
  parallel_for(canaries.records.size(),
               [&](size_t i) { out[i] = exposure_of(cfg, w, canaries.records[i]); });
  return out;
}

std::vector<TrendPoint> exposure_trend(const lm::ModelConfig& cfg, const SnapshotStore& store,
                                       const corpus::CanarySet& canaries) {
  std::vector<TrendPoint> trend;
  for (const auto& meta : store.globals()) {
    ModelWeights w = store.load(meta.round, "global");
    auto exps = exposure_many(cfg, w, canaries);
    TrendPoint p;
    p.round = meta.round;
    p.victim_present = meta.victim_present;
    double sum = 0.0;
    for (const auto& e : exps) sum += e.exposure;
    p.mean_exposure = exps.empty() ? 0.0 : sum / (double)exps.size();
    trend.push_back(p);
  }
  return trend;
}

void MiConfig::validate() const {
  require(max_fpr > 0.0 && max_fpr < 1.0, ErrorKind::invalid_input, "max_fpr must be in (0,1)");
}

double log_likelihood_ratio(const lm::ModelConfig& cfg, const ModelWeights& target,
                            const ModelWeights& reference, const std::string& text) {
  std::vector<int> seq = lm::to_sequence(cfg, text);
  return lm::seq_nll_sum(cfg, target, seq) - lm::seq_nll_sum(cfg, reference, seq);
}

namespace {

std::vector<double> llr_batch(const lm::ModelConfig& cfg, const ModelWeights& target,
                              const ModelWeights& reference,
                              const std::vector<std::string>& texts) {
  std::vector<double> out(texts.size());
  parallel_for(texts.size(),
               [&](size_t i) { out[i] = log_likelihood_ratio(cfg, target, reference, texts[i]); });
  return out;
}

void split_half(std::vector<double> vals, uint64_t seed, const char* purpose,
                std::vector<double>* cal, std::vector<double>* eval_half) {
  auto rng = make_rng(derive_seed(seed, purpose));
  std::shuffle(vals.begin(), vals.end(), rng);
  size_t half = vals.size() / 2;
  cal->assign(vals.begin(), vals.begin() + half);
  eval_half->assign(vals.begin() + half, vals.end());
}

}  // namespace

MiResult membership_inference(const lm::ModelConfig& cfg, const ModelWeights& target,
                              const ModelWeights& reference,
                              const std::vector<std::string>& members,
                              const std::vector<std::string>& non_members, const MiConfig& mcfg) {
  mcfg.validate();
  require(members.size() >= 2 && non_members.size() >= 2, ErrorKind::invalid_input,
          "membership inference needs >= 2 members and >= 2 non-members");
  std::vector<double> m_cal, m_eval, n_cal, n_eval;
  split_half(llr_batch(cfg, target, reference, members), mcfg.seed, "mi_members", &m_cal, &m_eval);
  split_half(llr_batch(cfg, target, reference, non_members), mcfg.seed, "mi_nonmembers", &n_cal,
             &n_eval);

  // (k+1)-th smallest calibration non-member score with k = floor(max_fpr*n):
  // predicting member strictly below it keeps the count-based FPR <= max_fpr.
  std::vector<double> sorted = n_cal;
  std::sort(sorted.begin(), sorted.end());
  size_t k = (size_t)std::floor(mcfg.max_fpr * (double)sorted.size());
  MiResult res;
  res.threshold = k < sorted.size() ? sorted[k]
                                    : std::numeric_limits<double>::infinity();
  int cal_fp = 0;
  for (double v : n_cal) cal_fp += v < res.threshold ? 1 : 0;
  res.calibration_fpr = n_cal.empty() ? 0.0 : (double)cal_fp / (double)n_cal.size();

  for (double v : m_eval) (v < res.threshold ? res.tp : res.fn)++;
  for (double v : n_eval) (v < res.threshold ? res.fp : res.tn)++;
  res.recall = res.tp + res.fn > 0 ? (double)res.tp / (double)(res.tp + res.fn) : 0.0;
  res.precision = res.tp + res.fp > 0 ? (double)res.tp / (double)(res.tp + res.fp) : 0.0;
  return res;
}

namespace {

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_double(const std::string& s) {
  try {
    size_t pos = 0;
    double v = std::stod(s, &pos);
    require(pos == s.size(), ErrorKind::io, "trailing characters in numeric field");
    return v;
  } catch (const std::invalid_argument&) {
    fail(ErrorKind::io, "malformed numeric field: " + s);
  } catch (const std::out_of_range&) {
    fail(ErrorKind::io, "numeric field out of range: " + s);
  }
}

}  // namespace

LeakageReport build_report(const std::string& config_hash, const std::string& subject,
                           const corpus::CanarySet& canaries, const ReconstructionResult& recon,
                           const std::vector<ExposureResult>& exposures,
                           double validation_perplexity, const std::optional<MiResult>& mi) {
  require(recon.hits.size() == canaries.records.size() &&
              exposures.size() == canaries.records.size(),
          ErrorKind::invalid_input, "report inputs not aligned with the canary set");
  LeakageReport rep;
  rep.config_hash = config_hash;
  rep.subject = subject;
  rep.n_canaries = (int)canaries.records.size();
  rep.nsr = recon.nsr;
  std::map<std::string, int> by_cat;
  for (size_t i = 0; i < canaries.records.size(); ++i)
    by_cat[corpus::category_name(canaries.records[i].category)] += recon.hits[i];
  rep.nsr_by_category.assign(by_cat.begin(), by_cat.end());
  rep.hits = recon.hits;
  rep.exposures.reserve(exposures.size());
  std::vector<double> vals;
  for (const auto& e : exposures) {
    rep.exposures.push_back(e.exposure);
    vals.push_back(e.exposure);
  }
  rep.mean_exposure = vals.empty() ? 0.0 : stats::mean(vals);
  rep.median_exposure = vals.empty() ? 0.0 : stats::median(vals);
  rep.validation_perplexity = validation_perplexity;
  if (mi) {
    rep.has_mi = true;
    rep.mi = *mi;
  }
  return rep;
}

void write_report(const std::string& path, const LeakageReport& rep) {
  std::ostringstream os;
  os << "fedleak_report 1\n";
  os << "config_hash " << rep.config_hash << "\n";
  os << "subject " << rep.subject << "\n";
  os << "n_canaries " << rep.n_canaries << "\n";
  os << "nsr " << rep.nsr << "\n";
  for (const auto& [cat, n] : rep.nsr_by_category) os << "nsr_category " << cat << " " << n << "\n";
  os << "mean_exposure " << g17(rep.mean_exposure) << "\n";
  os << "median_exposure " << g17(rep.median_exposure) << "\n";
  os << "validation_perplexity " << g17(rep.validation_perplexity) << "\n";
  for (size_t i = 0; i < rep.exposures.size(); ++i)
    os << "exposure " << i << " " << g17(rep.exposures[i]) << "\n";
  for (size_t i = 0; i < rep.hits.size(); ++i)
    os << "hit " << i << " " << (int)rep.hits[i] << "\n";
  os << "mi " << (rep.has_mi ? 1 : 0) << "\n";
  if (rep.has_mi) {
    os << "mi_threshold " << g17(rep.mi.threshold) << "\n";
    os << "mi_calibration_fpr " << g17(rep.mi.calibration_fpr) << "\n";
    os << "mi_counts " << rep.mi.tp << " " << rep.mi.fp << " " << rep.mi.tn << " " << rep.mi.fn
       << "\n";
    os << "mi_recall " << g17(rep.mi.recall) << "\n";
    os << "mi_precision " << g17(rep.mi.precision) << "\n";
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), ErrorKind::io, "cannot open report for writing: " + path);
  f << os.str();
  f.flush();
  require(f.good(), ErrorKind::io, "short write: " + path);
}

LeakageReport read_report(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::io, "cannot open report: " + path);
  LeakageReport rep;
  std::string line;
  bool header = false;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    std::istringstream is(line);
    std::string key;
    is >> key;
    if (!header) {
      std::string ver;
      is >> ver;
      require(key == "fedleak_report" && ver == "1", ErrorKind::io,
              "not a fedleak report: " + path);
      header = true;
      continue;
    }
    if (key == "config_hash") {
      is >> rep.config_hash;
    } else if (key == "subject") {
      std::string rest;
      std::getline(is, rest);
      rep.subject = rest.empty() ? "" : rest.substr(1);
    } else if (key == "n_canaries") {
      is >> rep.n_canaries;
    } else if (key == "nsr") {
      is >> rep.nsr;
    } else if (key == "nsr_category") {
      std::string cat;
      int n = 0;
      is >> cat >> n;
      rep.nsr_by_category.emplace_back(cat, n);
    } else if (key == "mean_exposure") {
      std::string v;
      is >> v;
      rep.mean_exposure = parse_double(v);
    } else if (key == "median_exposure") {
      std::string v;
      is >> v;
      rep.median_exposure = parse_double(v);
    } else if (key == "validation_perplexity") {
      std::string v;
      is >> v;
      rep.validation_perplexity = parse_double(v);
    } else if (key == "exposure") {
      size_t idx = 0;
      std::string v;
      is >> idx >> v;
      require(idx == rep.exposures.size(), ErrorKind::io, "exposure lines out of order");
      rep.exposures.push_back(parse_double(v));
    } else if (key == "hit") {
      size_t idx = 0;
      int v = 0;
      is >> idx >> v;
      require(idx == rep.hits.size(), ErrorKind::io, "hit lines out of order");
      rep.hits.push_back((uint8_t)v);
    } else if (key == "mi") {
      int flag = 0;
      is >> flag;
      rep.has_mi = flag != 0;
    } else if (key == "mi_threshold") {
      std::string v;
      is >> v;
      rep.mi.threshold = parse_double(v);
    } else if (key == "mi_calibration_fpr") {
      std::string v;
      is >> v;
      rep.mi.calibration_fpr = parse_double(v);
    } else if (key == "mi_counts") {
      is >> rep.mi.tp >> rep.mi.fp >> rep.mi.tn >> rep.mi.fn;
    } else if (key == "mi_recall") {
      std::string v;
      is >> v;
      rep.mi.recall = parse_double(v);
    } else if (key == "mi_precision") {
      std::string v;
      is >> v;
      rep.mi.precision = parse_double(v);
    } else {
      fail(ErrorKind::io, "unknown report field: " + key);
    }
    require(!is.fail(), ErrorKind::io, "malformed report line: " + line);
  }
  require(header, ErrorKind::io, "empty report: " + path);
  return rep;
}

}  // namespace fedleak::leakage
