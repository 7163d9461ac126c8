#include "fedleak/defenses.hpp"

#include <cmath>
#include <fstream>
#include <unordered_set>

#include "fedleak/common.hpp"

namespace fedleak::defenses {

void DpConfig::validate() const {
  require(clip > 0.0 && std::isfinite(clip), ErrorKind::configuration,
          "dp clip norm must be positive");
  require(sigma >= 0.0 && std::isfinite(sigma), ErrorKind::configuration,
          "dp sigma must be >= 0");
}

double dp_delta(size_t n_clients) {
  require(n_clients > 0, ErrorKind::invalid_input, "dp_delta needs n_clients > 0");
  return std::pow((double)n_clients, -1.1);
}

DpCombiner::DpCombiner(const DpConfig& cfg) : cfg_(cfg) { cfg_.validate(); }

void DpCombiner::combine(const std::vector<std::vector<float>>& per_sample,
                         std::vector<float>& out, uint64_t step_seed) const {
  require(!per_sample.empty(), ErrorKind::invalid_input, "combine: empty batch");
  size_t dim = per_sample[0].size();
  for (const auto& g : per_sample)
    require(g.size() == dim, ErrorKind::invalid_input, "combine: ragged per-sample gradients");

  // Same accumulation arithmetic as the plain-mean combiner, so with a large
  // clip norm and sigma == 0 the output is bit-identical to no defense.
  out.assign(dim, 0.0f);
  for (const auto& g : per_sample) {
    double sq = 0.0;
    for (float v : g) sq += (double)v * (double)v;
    double norm = std::sqrt(sq);
    if (norm > cfg_.clip) {
      double scale = cfg_.clip / norm;
      for (size_t i = 0; i < dim; ++i) out[i] += (float)((double)g[i] * scale);
    } else {
      for (size_t i = 0; i < dim; ++i) out[i] += g[i];
    }
  }
  const float inv = 1.0f / static_cast<float>(per_sample.size());
  for (auto& v : out) v *= inv;

  if (cfg_.sigma > 0.0) {
    auto rng = make_rng(derive_seed(step_seed, "dp_noise"));
    std::normal_distribution<double> noise(0.0, cfg_.sigma * cfg_.clip / (double)per_sample.size());
    for (auto& v : out) v = (float)((double)v + noise(rng));
  }
}

std::vector<ScrubRule> default_scrub_rules() {
  std::vector<ScrubRule> rules;
  rules.push_back({"credit_card", std::regex(R"(\d{4}-\d{4}-\d{4}-\d{4})")});
  rules.push_back({"phone", std::regex(R"(\d{3}-\d{3}-\d{4})")});
  rules.push_back({"email", std::regex(R"([a-z][a-z0-9]*\d{2}@[a-z]+\.(net|com|org|io|edu))")});
  rules.push_back({"address", std::regex(R"(\d{1,3} [A-Z][a-z]+ (St|Ave|Rd|Ln|Blvd|Ct|Way|Dr), [A-Z]{2} \d{5})")});
  return rules;
}

std::vector<ScrubRule> load_scrub_rules(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::configuration, "cannot open scrub rules file: " + path);
  std::vector<ScrubRule> rules;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    size_t sp = line.find(' ');
    require(sp != std::string::npos && sp > 0 && sp + 1 < line.size(), ErrorKind::configuration,
            "scrub rules line " + std::to_string(lineno) + ": expected 'category pattern'");
    try {
      rules.push_back({line.substr(0, sp), std::regex(line.substr(sp + 1))});
    } catch (const std::regex_error& e) {
      fail(ErrorKind::configuration,
           "scrub rules line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  require(!rules.empty(), ErrorKind::configuration, "scrub rules file has no rules: " + path);
  return rules;
}

ScrubStats scrub(corpus::Corpus& corpus, const std::vector<ScrubRule>& rules) {
  ScrubStats stats;
  for (auto& line : corpus.lines) {
    int hits = 0;
    for (const auto& rule : rules) {
      auto begin = std::sregex_iterator(line.begin(), line.end(), rule.pattern);
      hits += (int)std::distance(begin, std::sregex_iterator());
      line = std::regex_replace(line, rule.pattern, "<UNK>");
    }
    if (hits > 0) {
      stats.lines_touched += 1;
      stats.replacements += hits;
    }
  }
  return stats;
}

size_t deduplicate(corpus::Corpus& corpus) {
  std::unordered_set<std::string> seen;
  std::vector<std::string> kept;
  kept.reserve(corpus.lines.size());
  for (auto& line : corpus.lines)
    if (seen.insert(line).second) kept.push_back(std::move(line));
  size_t removed = corpus.lines.size() - kept.size();
  corpus.lines = std::move(kept);
  return removed;
}

}  // namespace fedleak::defenses
