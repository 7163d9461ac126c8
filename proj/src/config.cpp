#include "fedleak/config.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fedleak/stats.hpp"

namespace fedleak::config {

namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

[[noreturn]] void bad_key(const std::string& section, const std::string& key) {
  fail(ErrorKind::configuration,
       "unknown config key '" + key + "' in section [" + section + "]");
}

int to_int(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    long long x = std::stoll(v, &pos);
    require(pos == v.size(), ErrorKind::configuration, "trailing characters in " + key);
    require(x >= INT32_MIN && x <= INT32_MAX, ErrorKind::configuration, key + " out of range");
    return (int)x;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorKind::configuration, "expected integer for " + key + ", got '" + v + "'");
  }
}

uint64_t to_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    unsigned long long x = std::stoull(v, &pos);
    require(pos == v.size(), ErrorKind::configuration, "trailing characters in " + key);
    return (uint64_t)x;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorKind::configuration, "expected unsigned integer for " + key + ", got '" + v + "'");
  }
}

double to_double(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    double x = std::stod(v, &pos);
    require(pos == v.size(), ErrorKind::configuration, "trailing characters in " + key);
    require(std::isfinite(x), ErrorKind::configuration, key + " must be finite");
    return x;
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    fail(ErrorKind::configuration, "expected number for " + key + ", got '" + v + "'");
  }
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  fail(ErrorKind::configuration, "expected true/false for " + key + ", got '" + v + "'");
}

std::vector<int> to_int_list(const std::string& key, const std::string& v) {
  std::vector<int> out;
  if (v.empty()) return out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(to_int(key, trim(item)));
  return out;
}

std::string g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

void apply_key(RunConfig& c, const std::string& section, const std::string& key,
               const std::string& v) {
  if (section.empty() || section == "run") {
    if (key == "seed") c.seed = to_u64(key, v);
    else if (key == "out_dir") c.out_dir = v;
    else bad_key(section.empty() ? "run" : section, key);
  } else if (section == "model") {
    if (key == "vocab_size") c.model.vocab_size = to_int(key, v);
    else if (key == "context_len") c.model.context_len = to_int(key, v);
    else if (key == "n_blocks") c.model.n_blocks = to_int(key, v);
    else if (key == "d_model") c.model.d_model = to_int(key, v);
    else if (key == "n_heads") c.model.n_heads = to_int(key, v);
    else bad_key(section, key);
  } else if (section == "data") {
    if (key == "regular_lines") c.data.regular_lines = to_int(key, v);
    else if (key == "pretrain_lines") c.data.pretrain_lines = to_int(key, v);
    else if (key == "pretrain_epochs") c.data.pretrain_epochs = to_int(key, v);
    else if (key == "pretrain_lr") c.data.pretrain_lr = to_double(key, v);
    else if (key == "validation_lines") c.data.validation_lines = to_int(key, v);
    else if (key == "canaries") c.data.canaries = to_int(key, v);
    else if (key == "space_size") c.data.space_size = to_int(key, v);
    else if (key == "repetitions") c.data.repetitions = to_int(key, v);
    else if (key == "attacker_regular_lines") c.data.attacker_regular_lines = to_int(key, v);
    else if (key == "attacker_canaries") c.data.attacker_canaries = to_int(key, v);
    else bad_key(section, key);
  } else if (section == "fed") {
    if (key == "rounds") c.fed.n_rounds = to_int(key, v);
    else if (key == "clients") c.fed.n_clients = to_int(key, v);
    else if (key == "clients_per_round") c.fed.clients_per_round = to_int(key, v);
    else if (key == "local_epochs") c.fed.local_epochs = to_int(key, v);
    else if (key == "lr") c.fed.lr = to_double(key, v);
    else if (key == "lr_final_frac") c.fed.lr_final_frac = to_double(key, v);
    else if (key == "optimizer") c.fed.optimizer = lm::optimizer_from_string(v);
    else if (key == "batch_size") c.fed.batch_size = to_int(key, v);
    else if (key == "baseline") c.fed.baseline = v;
    else if (key == "oracle") c.fed.oracle = to_bool(key, v);
    else if (key == "victims") c.fed.victim_ids = to_int_list(key, v);
    else if (key == "adversaries") c.fed.adversary_ids = to_int_list(key, v);
    else if (key == "victim_round_fraction") c.victim_round_fraction = to_double(key, v);
    else bad_key(section, key);
  } else if (section == "attack") {
    if (key == "mode") c.attack.mode = attack::mode_from_string(v);
    else if (key == "mdm") c.attack.mdm = attack::mdm_from_string(v);
    else if (key == "alpha") c.attack.alpha = to_double(key, v);
    else bad_key(section, key);
  } else if (section == "vri") {
    if (key == "t_test") c.attack.vri.variant = stats::variant_from_string(v);
    else if (key == "significance") c.attack.vri.significance = to_double(key, v);
    else if (key == "top_k_layers") c.attack.vri.top_k_layers = to_int(key, v);
    else if (key == "ref_epochs") c.attack.vri.ref_epochs = to_int(key, v);
    else if (key == "ref_lr") c.attack.vri.ref_lr = to_double(key, v);
    else if (key == "batch_size") c.attack.vri.batch_size = to_int(key, v);
    else bad_key(section, key);
  } else if (section == "swo") {
    if (key == "steps") c.attack.swo.steps = to_int(key, v);
    else if (key == "lr") c.attack.swo.lr = to_double(key, v);
    else if (key == "clip") c.attack.swo.clip = to_double(key, v);
    else if (key == "norm_cap") c.attack.swo.norm_cap = to_double(key, v);
    else if (key == "optimizer") c.attack.swo.optimizer = lm::optimizer_from_string(v);
    else bad_key(section, key);
  } else if (section == "wtl") {
    if (key == "n_pairs") c.attack.wtl.n_pairs = to_int(key, v);
    else if (key == "ft_epochs") c.attack.wtl.ft_epochs = to_int(key, v);
    else if (key == "ft_lr") c.attack.wtl.ft_lr = to_double(key, v);
    else if (key == "ft_batch_size") c.attack.wtl.ft_batch_size = to_int(key, v);
    else if (key == "hidden") c.attack.wtl.hidden = to_int(key, v);
    else if (key == "epochs") c.attack.wtl.epochs = to_int(key, v);
    else if (key == "lr") c.attack.wtl.lr = to_double(key, v);
    else if (key == "val_fraction") c.attack.wtl.val_fraction = to_double(key, v);
    else bad_key(section, key);
  } else if (section == "recon") {
    if (key == "beam_width") c.recon.beam_width = to_int(key, v);
    else if (key == "top_k") c.recon.top_k = to_int(key, v);
    else if (key == "extra_tokens") c.recon.extra_tokens = to_int(key, v);
    else bad_key(section, key);
  } else if (section == "mi") {
    if (key == "max_fpr") c.mi.max_fpr = to_double(key, v);
    else bad_key(section, key);
  } else if (section == "defenses") {
    if (key == "dp") c.defenses.dp = to_bool(key, v);
    else if (key == "dp_clip") c.defenses.dp_clip = to_double(key, v);
    else if (key == "dp_sigma") c.defenses.dp_sigma = to_double(key, v);
    else if (key == "scrub") c.defenses.scrub = to_bool(key, v);
    else if (key == "scrub_rules") c.defenses.scrub_rules = v;
    else if (key == "dedup") c.defenses.dedup = to_bool(key, v);
    else bad_key(section, key);
  } else {
    fail(ErrorKind::configuration, "unknown config section [" + section + "]");
  }
}

}  // namespace

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  std::istringstream is(text);
  std::string raw;
  std::string section;
  int lineno = 0;
  while (std::getline(is, raw)) {
    ++lineno;
    std::string line = trim(raw);
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = trim(line.substr(0, hash));
    if (line.empty()) continue;
    if (line.front() == '[') {
      require(line.back() == ']', ErrorKind::configuration,
              "malformed section header at line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      require(!section.empty(), ErrorKind::configuration,
              "empty section name at line " + std::to_string(lineno));
      continue;
    }
    size_t eq = line.find('=');
    require(eq != std::string::npos, ErrorKind::configuration,
            "expected key = value at line " + std::to_string(lineno));
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    require(!key.empty(), ErrorKind::configuration,
            "empty key at line " + std::to_string(lineno));
    apply_key(c, section, key, value);
  }
  c.validate();
  return c;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::configuration, "cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

void RunConfig::validate() const {
  model.validate();
  fed.validate();
  // Nested validators throw their own module kinds; here the bad value came
  // from a config file, so surface it as a configuration error.
  try {
    attack.validate();
    recon.validate();
    mi.validate();
  } catch (const Error& e) {
    fail(ErrorKind::configuration, e.what());
  }
  require(victim_round_fraction >= 0.0 && victim_round_fraction <= 1.0, ErrorKind::configuration,
          "victim_round_fraction must be in [0,1]");
  require(data.regular_lines > 0 && data.pretrain_lines >= 0 && data.validation_lines > 0,
          ErrorKind::configuration, "data sizes must be positive");
  int pool = data.regular_lines - data.pretrain_lines - data.validation_lines;
  require(pool >= fed.n_clients, ErrorKind::configuration,
          "regular_lines leaves fewer than one line per client");
  require(data.canaries >= 0 && data.repetitions >= 0, ErrorKind::configuration,
          "canaries and repetitions must be >= 0");
  require(data.space_size >= 2, ErrorKind::configuration, "space_size must be >= 2");
  require(data.attacker_regular_lines > 0 && data.attacker_canaries > 0,
          ErrorKind::configuration, "attacker reference corpora must be non-empty");
  require(data.pretrain_epochs >= 0, ErrorKind::configuration, "pretrain_epochs must be >= 0");
  if (data.canaries > 0)
    require(!fed.victim_ids.empty(), ErrorKind::configuration,
            "canaries configured but no victim clients");
  if (attack.mode == attack::Mode::dynamic || attack.mode == attack::Mode::dynamic_plus)
    require(!fed.adversary_ids.empty(), ErrorKind::configuration,
            "dynamic attack modes need adversary clients");
  if (defenses.dp) {
    defenses::DpConfig d{defenses.dp_clip, defenses.dp_sigma};
    d.validate();
  }
}

std::string RunConfig::canonical() const {
  std::ostringstream os;
  os << "seed " << seed << "\n";
  os << "out_dir " << out_dir << "\n";
  os << "model " << model.vocab_size << " " << model.context_len << " " << model.n_blocks << " "
     << model.d_model << " " << model.n_heads << "\n";
  os << "data " << data.regular_lines << " " << data.pretrain_lines << " " << data.pretrain_epochs
     << " " << g17(data.pretrain_lr) << " " << data.validation_lines << " " << data.canaries
     << " " << data.space_size << " " << data.repetitions << " " << data.attacker_regular_lines
     << " " << data.attacker_canaries << "\n";
  os << "fed " << fed.n_rounds << " " << fed.n_clients << " " << fed.clients_per_round << " "
     << fed.local_epochs << " " << g17(fed.lr) << " " << g17(fed.lr_final_frac) << " "
     << (fed.optimizer == lm::Optimizer::adam ? "adam" : "sgd") << " " << fed.batch_size << " "
     << fed.baseline << " " << (fed.oracle ? 1 : 0) << " victims=" << join_ints(fed.victim_ids)
     << " adversaries=" << join_ints(fed.adversary_ids) << " "
     << g17(victim_round_fraction) << "\n";
  os << "attack " << attack::mode_name(attack.mode) << " " << attack::mdm_name(attack.mdm) << " "
     << g17(attack.alpha) << "\n";
  os << "vri " << stats::variant_name(attack.vri.variant) << " " << g17(attack.vri.significance)
     << " " << attack.vri.top_k_layers << " " << attack.vri.ref_epochs << " "
     << g17(attack.vri.ref_lr) << " " << attack.vri.batch_size << "\n";
  os << "swo " << attack.swo.steps << " " << g17(attack.swo.lr) << " " << g17(attack.swo.clip)
     << " " << g17(attack.swo.norm_cap) << " "
     << (attack.swo.optimizer == lm::Optimizer::adam ? "adam" : "sgd") << "\n";
  os << "wtl " << attack.wtl.n_pairs << " " << attack.wtl.ft_epochs << " "
     << g17(attack.wtl.ft_lr) << " " << attack.wtl.ft_batch_size << " " << attack.wtl.hidden
     << " " << attack.wtl.epochs << " " << g17(attack.wtl.lr) << " "
     << g17(attack.wtl.val_fraction) << "\n";
  os << "recon " << recon.beam_width << " " << recon.top_k << " " << recon.extra_tokens << "\n";
  os << "mi " << g17(mi.max_fpr) << "\n";
  os << "defenses " << (defenses.dp ? 1 : 0) << " " << g17(defenses.dp_clip) << " "
     << g17(defenses.dp_sigma) << " " << (defenses.scrub ? 1 : 0) << " "
     << (defenses.scrub_rules.empty() ? "-" : defenses.scrub_rules) << " "
     << (defenses.dedup ? 1 : 0) << "\n";
  return os.str();
}

uint64_t RunConfig::hash_u64() const { return fnv1a64(canonical()); }

std::string RunConfig::hash() const { return hex64(hash_u64()); }

}  // namespace fedleak::config
