#include "fedleak/attack.hpp"

#include <algorithm>

namespace fedleak::attack {

Mode mode_from_string(const std::string& s) {
  if (s == "static") return Mode::static_rounds;
  if (s == "static_plus") return Mode::static_plus;
  if (s == "dynamic") return Mode::dynamic;
  if (s == "dynamic_plus") return Mode::dynamic_plus;
  fail(ErrorKind::configuration, "unknown attack mode: " + s);
}

const char* mode_name(Mode m) {
  switch (m) {
    case Mode::static_rounds: return "static";
    case Mode::static_plus: return "static_plus";
    case Mode::dynamic: return "dynamic";
    case Mode::dynamic_plus: return "dynamic_plus";
  }
  fail(ErrorKind::invalid_input, "bad attack mode value");
}

MdmMethod mdm_from_string(const std::string& s) {
  if (s == "none") return MdmMethod::none;
  if (s == "swo") return MdmMethod::swo;
  if (s == "wtl") return MdmMethod::wtl;
  fail(ErrorKind::configuration, "unknown mdm method: " + s);
}

const char* mdm_name(MdmMethod m) {
  switch (m) {
    case MdmMethod::none: return "none";
    case MdmMethod::swo: return "swo";
    case MdmMethod::wtl: return "wtl";
  }
  fail(ErrorKind::invalid_input, "bad mdm method value");
}

void AttackConfig::validate() const {
  require(alpha >= 0.0 && alpha <= 1.0, ErrorKind::configuration, "alpha must be in [0,1]");
  require(vri.significance > 0.0 && vri.significance < 1.0, ErrorKind::configuration,
          "vri significance must be in (0,1)");
  swo.validate();
  wtl.validate();
}

AttackAssets build_assets(const lm::ModelConfig& mcfg, const ModelWeights& base,
                          const std::vector<std::string>& d_reg,
                          const std::vector<std::string>& d_sen, const AttackConfig& cfg) {
  cfg.validate();
  AttackAssets assets;
  assets.mcfg = mcfg;
  assets.base = base;
  assets.refs = forensics::build_references(mcfg, base, d_reg, d_sen, cfg.vri);
  assets.layers =
      forensics::select_sensitive_layers(mcfg, base, assets.refs.g_s, cfg.vri.top_k_layers);
  if (cfg.mdm == MdmMethod::wtl)
    assets.wtl = mdm::wtl_train(mcfg, base, d_reg, d_sen, assets.layers, cfg.wtl);
  return assets;
}

ModelWeights process_snapshot(const AttackAssets& assets, const AttackConfig& cfg,
                              const ModelWeights& snap) {
  switch (cfg.mdm) {
    case MdmMethod::none: return snap;
    case MdmMethod::swo: return mdm::apply_swo(snap, assets.refs.g_r, assets.layers, cfg.swo);
    case MdmMethod::wtl:
      require(assets.wtl.has_value(), ErrorKind::mdm, "wtl regressor was not trained");
      return mdm::apply_wtl(snap, *assets.wtl, assets.layers);
  }
  fail(ErrorKind::invalid_input, "bad mdm method value");
}

namespace {

std::vector<int> truth_rounds(const SnapshotStore& store) {
  std::vector<int> rounds;
  for (const auto& meta : store.globals())
    if (meta.victim_present) rounds.push_back(meta.round);
  return rounds;
}

}  // namespace

AttackOutput run_attack(const SnapshotStore& store, const AttackAssets& assets,
                        const AttackConfig& cfg) {
  cfg.validate();
  AttackOutput out;
  out.selection.truth = truth_rounds(store);

  std::string kind = "global";
  if (cfg.mode == Mode::static_plus || cfg.mode == Mode::dynamic_plus) {
    out.selection.used_ground_truth = true;
    out.selection.rounds = out.selection.truth;
    if (cfg.mode == Mode::dynamic_plus) {
      require(store.oracle(), ErrorKind::forensics,
              "dynamic_plus needs victim-side snapshots (oracle store)");
      kind = "victim_local";
    }
  } else {
    auto verdicts = forensics::vri_over_store(store, assets.base, assets.refs, assets.layers,
                                              cfg.vri);
    for (const auto& rv : verdicts)
      if (rv.verdict.victim) out.selection.rounds.push_back(rv.round);
  }

  out.models.reserve(out.selection.rounds.size());
  for (int r : out.selection.rounds)
    out.models.push_back(process_snapshot(assets, cfg, store.load(r, kind)));
  return out;
}

ModelWeights aggregate_snapshots(const std::vector<ModelWeights>& models) {
  require(!models.empty(), ErrorKind::aggregation, "cannot aggregate an empty snapshot set");
  std::vector<const ModelWeights*> ptrs;
  std::vector<double> coeffs;
  for (const auto& m : models) {
    ptrs.push_back(&m);
    coeffs.push_back(1.0 / (double)models.size());
  }
  return weighted_sum(ptrs, coeffs);
}

DynamicAdversary::DynamicAdversary(const AttackAssets& assets, const AttackConfig& cfg,
                                   const SnapshotStore& store)
    : assets_(assets), cfg_(cfg), store_(store) {
  cfg_.validate();
  require(cfg_.mode == Mode::dynamic || cfg_.mode == Mode::dynamic_plus,
          ErrorKind::configuration, "dynamic adversary needs a dynamic attack mode");
  if (cfg_.mode == Mode::dynamic_plus)
    require(store_.oracle(), ErrorKind::configuration,
            "dynamic_plus needs victim-side snapshots (oracle store)");
}

void DynamicAdversary::refresh() {
  int avail = store_.contiguous_rounds();
  bool changed = false;
  for (int r = scanned_; r < avail; ++r) {
    bool is_victim = false;
    std::string kind = "global";
    if (cfg_.mode == Mode::dynamic_plus) {
      for (const auto& meta : store_.globals())
        if (meta.round == r) is_victim = meta.victim_present;
      kind = "victim_local";
    } else {
      ModelWeights g_i = store_.load(r, "global");
      is_victim = forensics::identify_victim_round(g_i, assets_.base, assets_.refs,
                                                   assets_.layers, cfg_.vri)
                      .victim;
    }
    if (is_victim) {
      identified_.push_back(r);
      processed_.emplace(r, process_snapshot(assets_, cfg_, store_.load(r, kind)));
      changed = true;
    }
  }
  scanned_ = avail;
  if (changed) {
    std::vector<ModelWeights> models;
    models.reserve(processed_.size());
    for (const auto& [round, w] : processed_) models.push_back(w);
    g_a_ = aggregate_snapshots(models);
  }
}

ModelWeights DynamicAdversary::update(int /*round*/, int /*client*/,
                                      const ModelWeights& /*global*/, ModelWeights local) {
  refresh();
  if (!g_a_) return local;  // no evidence yet, stay honest
  return fed::adversary_inject(local, *g_a_, cfg_.alpha);
}

Baseline baseline_from_string(const std::string& s) {
  if (s == "lr") return Baseline::lr;
  if (s == "ir") return Baseline::ir;
  if (s == "fp") return Baseline::fp;
  if (s == "mu") return Baseline::mu;
  fail(ErrorKind::configuration, "unknown baseline: " + s);
}

const char* baseline_name(Baseline b) {
  switch (b) {
    case Baseline::lr: return "lr";
    case Baseline::ir: return "ir";
    case Baseline::fp: return "fp";
    case Baseline::mu: return "mu";
  }
  fail(ErrorKind::invalid_input, "bad baseline value");
}

AttackOutput run_baseline(const SnapshotStore& store, Baseline b) {
  int rounds = store.contiguous_rounds();
  require(rounds > 0, ErrorKind::forensics, "store has no settled rounds");
  AttackOutput out;
  out.selection.truth = truth_rounds(store);
  switch (b) {
    case Baseline::lr: {
      out.selection.rounds = {rounds - 1};
      out.models.push_back(store.load(rounds - 1, "global"));
      break;
    }
    case Baseline::ir: {
      out.selection.used_ground_truth = true;
      out.selection.rounds = out.selection.truth;
      for (int r : out.selection.rounds) out.models.push_back(store.load(r, "global"));
      break;
    }
    case Baseline::fp: {
      require(store.baseline() == "fp", ErrorKind::configuration,
              "fp baseline needs a forced-participation run");
      out.selection.rounds = {rounds - 1};
      out.models.push_back(store.load(rounds - 1, "global"));
      break;
    }
    case Baseline::mu: {
      require(store.baseline() == "mu", ErrorKind::configuration,
              "mu baseline needs a malicious-update run");
      require(store.oracle(), ErrorKind::configuration,
              "mu baseline needs victim-side snapshots (oracle store)");
      out.selection.used_ground_truth = true;
      int last_victim = -1;
      for (int r : out.selection.truth)
        if (store.has(r, "victim_local")) last_victim = std::max(last_victim, r);
      require(last_victim >= 0, ErrorKind::forensics, "no victim-side snapshot in the store");
      out.selection.rounds = {last_victim};
      out.models.push_back(store.load(last_victim, "victim_local"));
      break;
    }
  }
  return out;
}

IdentificationScore score_identification(const std::vector<int>& identified,
                                          const std::vector<int>& truth) {
  std::vector<int> id_sorted = identified, truth_sorted = truth;
  std::sort(id_sorted.begin(), id_sorted.end());
  std::sort(truth_sorted.begin(), truth_sorted.end());
  IdentificationScore s;
  for (int r : id_sorted)
    (std::binary_search(truth_sorted.begin(), truth_sorted.end(), r) ? s.tp : s.fp)++;
  for (int r : truth_sorted)
    if (!std::binary_search(id_sorted.begin(), id_sorted.end(), r)) s.fn++;
  s.precision = s.tp + s.fp > 0 ? (double)s.tp / (double)(s.tp + s.fp) : 0.0;
  s.recall = s.tp + s.fn > 0 ? (double)s.tp / (double)(s.tp + s.fn) : 0.0;
  return s;
}

}  // namespace fedleak::attack
