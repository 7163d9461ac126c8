#include "fedleak/runspec.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>

#include "fedleak/train.hpp"

namespace fedleak::runspec {

namespace fs = std::filesystem;

namespace {

uint64_t base_key(const config::RunConfig& cfg, size_t max_line_len) {
  std::ostringstream os;
  os << "base " << cfg.model.vocab_size << " " << cfg.model.context_len << " "
     << cfg.model.n_blocks << " " << cfg.model.d_model << " " << cfg.model.n_heads << " "
     << cfg.seed << " " << cfg.data.regular_lines << " " << cfg.data.pretrain_lines << " "
     << cfg.data.pretrain_epochs << " " << cfg.data.pretrain_lr << " " << cfg.fed.batch_size
     << " " << max_line_len;
  return fnv1a64(os.str());
}

ModelWeights pretrain_base(const config::RunConfig& cfg, const lm::ModelConfig& mcfg,
                           const std::vector<std::string>& pretrain_lines,
                           const std::string& cache_dir, size_t max_line_len) {
  uint64_t key = base_key(cfg, max_line_len);
  std::string cache_path;
  if (!cache_dir.empty()) {
    fs::create_directories(cache_dir);
    cache_path = cache_dir + "/base_" + hex64(key) + ".fltw";
    if (fs::exists(cache_path)) {
      Flags flags;
      ModelWeights w = load_checkpoint(cache_path, &flags);
      for (const auto& [k, v] : flags)
        if (k == "base_key")
          require(v == hex64(key), ErrorKind::io, "cached base has a mismatched key");
      lm::validate_weights(mcfg, w);
      return w;
    }
  }
  ModelWeights w = lm::init_model(mcfg);
  if (!pretrain_lines.empty() && cfg.data.pretrain_epochs > 0) {
    lm::TrainOptions opt;
    opt.epochs = cfg.data.pretrain_epochs;
    opt.lr = cfg.data.pretrain_lr;
    opt.batch_size = cfg.fed.batch_size;
    opt.seed = derive_seed(cfg.seed, "pretrain");
    w = lm::train_local(mcfg, w, pretrain_lines, opt);
  }
  if (!cache_path.empty()) save_checkpoint(cache_path, w, {{"base_key", hex64(key)}});
  return w;
}

std::vector<uint8_t> victim_round_mask(const config::RunConfig& cfg) {
  if (cfg.victim_round_fraction >= 1.0) return {};
  int n = cfg.fed.n_rounds;
  int allowed = (int)std::ceil(cfg.victim_round_fraction * n);
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  auto rng = make_rng(derive_seed(cfg.seed, "victim_rounds"));
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<uint8_t> mask(n, 0);
  for (int i = 0; i < allowed; ++i) mask[order[i]] = 1;
  return mask;
}

}  // namespace

Experiment prepare(const config::RunConfig& cfg, const std::string& cache_dir) {
  cfg.validate();
  Experiment exp;
  exp.cfg = cfg;
  exp.cfg.attack.vri.seed = derive_seed(cfg.seed, "vri");
  exp.cfg.attack.wtl.seed = derive_seed(cfg.seed, "wtl");
  exp.cfg.mi.seed = derive_seed(cfg.seed, "mi");
  exp.mcfg = cfg.model;
  exp.mcfg.seed = cfg.seed;
  exp.mcfg.validate();

  size_t max_line_len = std::min<size_t>(62, (size_t)exp.mcfg.context_len - 2);

  corpus::Corpus pool =
      corpus::generate_regular((size_t)cfg.data.regular_lines, derive_seed(cfg.seed, "regular"),
                               max_line_len);
  auto begin = pool.lines.begin();
  std::vector<std::string> pretrain(begin, begin + cfg.data.pretrain_lines);
  exp.validation.assign(begin + cfg.data.pretrain_lines,
                        begin + cfg.data.pretrain_lines + cfg.data.validation_lines);
  corpus::Corpus client_pool;
  client_pool.lines.assign(begin + cfg.data.pretrain_lines + cfg.data.validation_lines,
                           pool.lines.end());

  corpus::CanaryConfig ccfg;
  ccfg.n_canaries = cfg.data.canaries;
  ccfg.space_size = cfg.data.space_size;
  ccfg.seed = derive_seed(cfg.seed, "canaries");
  ccfg.max_text_len = max_line_len;
  exp.canaries = corpus::generate_canaries(ccfg);

  exp.clients = corpus::partition_clients(client_pool, cfg.fed.n_clients,
                                          derive_seed(cfg.seed, "partition"));
  corpus::insert_canaries(exp.clients, exp.canaries, cfg.fed.victim_ids, cfg.data.repetitions,
                          derive_seed(cfg.seed, "insert"));

  if (cfg.defenses.scrub) {
    auto rules = cfg.defenses.scrub_rules.empty()
                     ? defenses::default_scrub_rules()
                     : defenses::load_scrub_rules(cfg.defenses.scrub_rules);
    for (auto& c : exp.clients) {
      auto s = defenses::scrub(c, rules);
      exp.scrub_stats.lines_touched += s.lines_touched;
      exp.scrub_stats.replacements += s.replacements;
    }
  }
  if (cfg.defenses.dedup)
    for (auto& c : exp.clients) exp.dedup_removed += defenses::deduplicate(c);

  exp.d_reg = corpus::generate_regular((size_t)cfg.data.attacker_regular_lines,
                                       derive_seed(cfg.seed, "attacker_reg"), max_line_len)
                  .lines;
  corpus::CanaryConfig acfg = ccfg;
  acfg.n_canaries = cfg.data.attacker_canaries;
  acfg.seed = derive_seed(cfg.seed, "attacker_sen");
  exp.d_sen = corpus::canary_texts(corpus::generate_disjoint_canaries(acfg, exp.canaries));

  exp.fcfg = cfg.fed;
  exp.fcfg.seed = derive_seed(cfg.seed, "fed");
  exp.fcfg.victim_allowed = victim_round_mask(cfg);
  if (cfg.defenses.dp) {
    exp.dp = std::make_unique<defenses::DpCombiner>(
        defenses::DpConfig{cfg.defenses.dp_clip, cfg.defenses.dp_sigma});
    exp.fcfg.combiner = exp.dp.get();
  }
  exp.fcfg.validate();

  exp.base = pretrain_base(cfg, exp.mcfg, pretrain, cache_dir, max_line_len);
  return exp;
}

SnapshotStore open_or_create_store(const Experiment& exp, const std::string& dir) {
  if (SnapshotStore::exists(dir)) {
    SnapshotStore store = SnapshotStore::open(dir);
    require(store.config_hash() == exp.cfg.hash_u64(), ErrorKind::configuration,
            "snapshot store was produced by a different configuration");
    return store;
  }
  fs::create_directories(dir);
  return SnapshotStore::create(dir, exp.cfg.hash_u64(), exp.fcfg.n_rounds, exp.fcfg.oracle,
                               exp.fcfg.baseline);
}

fed::RunResult train(Experiment& exp, SnapshotStore& store) {
  std::unique_ptr<attack::DynamicAdversary> hook;
  if (exp.cfg.attack.mode == attack::Mode::dynamic ||
      exp.cfg.attack.mode == attack::Mode::dynamic_plus) {
    const auto& assets = ensure_assets(exp, exp.cfg.out_dir + "/assets");
    hook = std::make_unique<attack::DynamicAdversary>(assets, exp.cfg.attack, store);
  }
  return fed::run_training(exp.mcfg, exp.fcfg, exp.base, exp.clients, store, hook.get());
}

namespace {

void save_layers(const std::string& path, const std::vector<std::string>& layers) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), ErrorKind::io, "cannot write " + path);
  for (const auto& l : layers) f << l << "\n";
  require(f.good(), ErrorKind::io, "short write: " + path);
}

std::vector<std::string> load_layers(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  require(f.good(), ErrorKind::io, "cannot read " + path);
  std::vector<std::string> layers;
  std::string line;
  while (std::getline(f, line))
    if (!line.empty()) layers.push_back(line);
  require(!layers.empty(), ErrorKind::io, "empty layer list: " + path);
  return layers;
}

}  // namespace

const attack::AttackAssets& ensure_assets(Experiment& exp, const std::string& dir) {
  bool want_wtl = exp.cfg.attack.mdm == attack::MdmMethod::wtl;
  if (exp.assets && (!want_wtl || exp.assets->wtl)) return *exp.assets;

  std::string gr, gs, ly, wtl;
  if (!dir.empty()) {
    fs::create_directories(dir);
    gr = dir + "/refs_regular.fltw";
    gs = dir + "/refs_sensitive.fltw";
    ly = dir + "/layers.txt";
    wtl = dir + "/wtl.fltw";
  }

  if (!exp.assets) {
    attack::AttackAssets assets;
    assets.mcfg = exp.mcfg;
    assets.base = exp.base;
    if (!gr.empty() && fs::exists(gr) && fs::exists(gs) && fs::exists(ly)) {
      Flags fr, fsn;
      assets.refs.g_r = load_checkpoint(gr, &fr);
      assets.refs.g_s = load_checkpoint(gs, &fsn);
      for (const auto& flags : {fr, fsn})
        for (const auto& [k, v] : flags)
          if (k == "config_hash")
            require(v == exp.cfg.hash(), ErrorKind::io,
                    "cached attack assets have a mismatched config hash");
      assets.layers = load_layers(ly);
    } else {
      assets.refs = forensics::build_references(exp.mcfg, exp.base, exp.d_reg, exp.d_sen,
                                                exp.cfg.attack.vri);
      assets.layers = forensics::select_sensitive_layers(exp.mcfg, exp.base, assets.refs.g_s,
                                                         exp.cfg.attack.vri.top_k_layers);
      if (!gr.empty()) {
        Flags flags{{"config_hash", exp.cfg.hash()}};
        save_checkpoint(gr, assets.refs.g_r, flags);
        save_checkpoint(gs, assets.refs.g_s, flags);
        save_layers(ly, assets.layers);
      }
    }
    exp.assets = std::move(assets);
  }

  if (want_wtl && !exp.assets->wtl) {
    if (!wtl.empty() && fs::exists(wtl)) {
      exp.assets->wtl = mdm::load_wtl(wtl);
    } else {
      exp.assets->wtl = mdm::wtl_train(exp.mcfg, exp.base, exp.d_reg, exp.d_sen,
                                       exp.assets->layers, exp.cfg.attack.wtl);
      if (!wtl.empty()) mdm::save_wtl(wtl, *exp.assets->wtl);
    }
  }
  return *exp.assets;
}

double validation_perplexity(const Experiment& exp, const ModelWeights& w) {
  return lm::perplexity(exp.mcfg, w, exp.validation);
}

}  // namespace fedleak::runspec
