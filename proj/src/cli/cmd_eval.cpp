#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>

#include "cli_common.hpp"

namespace fedleak::cli {

namespace {

size_t max_line_len(const runspec::Experiment& exp) {
  return std::min<size_t>(62, (size_t)exp.mcfg.context_len - 2);
}

std::optional<leakage::MiResult> run_mi(runspec::Experiment& exp, const ModelWeights& target) {
  if (exp.canaries.records.size() < 2) return std::nullopt;
  corpus::CanaryConfig ccfg;
  ccfg.n_canaries = (int)exp.canaries.records.size();
  ccfg.space_size = exp.cfg.data.space_size;
  ccfg.seed = exp.cfg.mi.seed;
  ccfg.max_text_len = max_line_len(exp);
  auto non_members =
      corpus::canary_texts(corpus::generate_disjoint_canaries(ccfg, exp.canaries));
  return leakage::membership_inference(exp.mcfg, target, exp.base,
                                       corpus::canary_texts(exp.canaries), non_members,
                                       exp.cfg.mi);
}

}  // namespace

namespace {

EvalOutcome finish_outcome(runspec::Experiment& exp, SnapshotStore& store,
                           const std::string& subject, attack::AttackOutput&& output) {
  EvalOutcome outcome;
  outcome.output = std::move(output);
  const auto& models = outcome.output.models;
  if (models.empty()) {
    // The attack identified nothing; report zero leakage against the final global.
    leakage::ReconstructionResult recon;
    recon.hits.assign(exp.canaries.records.size(), 0);
    std::vector<leakage::ExposureResult> exps(exp.canaries.records.size());
    int last = store.contiguous_rounds() - 1;
    require(last >= 0, ErrorKind::forensics, "store has no settled rounds");
    ModelWeights final_global = store.load(last, "global");
    outcome.report =
        leakage::build_report(exp.cfg.hash(), subject, exp.canaries, recon, exps,
                              runspec::validation_perplexity(exp, final_global), std::nullopt);
    outcome.report.exposures.clear();
    return outcome;
  }

  std::vector<const ModelWeights*> ptrs;
  for (const auto& m : models) ptrs.push_back(&m);
  auto recon = leakage::reconstruct_union(exp.mcfg, ptrs, exp.canaries, exp.cfg.recon);
  ModelWeights agg = attack::aggregate_snapshots(models);
  auto exposures = leakage::exposure_many(exp.mcfg, agg, exp.canaries);
  double ppx = runspec::validation_perplexity(exp, agg);
  outcome.report = leakage::build_report(exp.cfg.hash(), subject, exp.canaries, recon, exposures,
                                         ppx, run_mi(exp, agg));
  return outcome;
}

}  // namespace

EvalOutcome evaluate_subject(runspec::Experiment& exp, SnapshotStore& store,
                             const std::string& subject) {
  attack::AttackOutput output;
  if (subject == "attack") {
    const auto& assets = runspec::ensure_assets(exp, assets_dir(exp));
    output = attack::run_attack(store, assets, exp.cfg.attack);
  } else if (subject == "base") {
    output.models.push_back(exp.base);
  } else {
    output = attack::run_baseline(store, attack::baseline_from_string(subject));
  }
  return finish_outcome(exp, store, subject, std::move(output));
}

int cmd_eval(const EvalArgs& args) {
  runspec::Experiment exp = load_experiment(args);
  require(SnapshotStore::exists(store_dir(exp)), ErrorKind::io,
          "no snapshot store under " + store_dir(exp) + "; run train first");
  SnapshotStore store = runspec::open_or_create_store(exp, store_dir(exp));

  EvalOutcome outcome;
  std::string subject = args.subject;
  if (!args.models.empty()) {
    subject = "custom";
    attack::AttackOutput output;
    for (const auto& path : args.models) {
      ModelWeights w = load_checkpoint(path);
      lm::validate_weights(exp.mcfg, w);
      output.models.push_back(std::move(w));
    }
    outcome = finish_outcome(exp, store, subject, std::move(output));
  } else {
    outcome = evaluate_subject(exp, store, subject);
  }
  const auto& rep = outcome.report;
  leakage::write_report(exp.cfg.out_dir + "/report_" + subject + ".txt", rep);

  {
    std::string path = exp.cfg.out_dir + "/exposure_" + subject + ".csv";
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(f.good(), ErrorKind::io, "cannot write " + path);
    f << "canary,category,exposure,hit\n";
    for (size_t i = 0; i < rep.exposures.size(); ++i)
      f << exp.canaries.records[i].id << ","
        << corpus::category_name(exp.canaries.records[i].category) << "," << rep.exposures[i]
        << "," << (i < rep.hits.size() ? (int)rep.hits[i] : 0) << "\n";
    require(f.good(), ErrorKind::io, "short write: " + path);
  }

  if (args.trend) {
    auto trend = leakage::exposure_trend(exp.mcfg, store, exp.canaries);
    std::string path = exp.cfg.out_dir + "/trend.csv";
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(f.good(), ErrorKind::io, "cannot write " + path);
    f << "round,victim_present,mean_exposure\n";
    char buf[64];
    for (const auto& p : trend) {
      std::snprintf(buf, sizeof buf, "%.17g", p.mean_exposure);
      f << p.round << "," << (p.victim_present ? 1 : 0) << "," << buf << "\n";
    }
    require(f.good(), ErrorKind::io, "short write: " + path);
  }

  std::cout << "subject " << rep.subject << "\n";
  std::cout << "nsr " << rep.nsr << " / " << rep.n_canaries << "\n";
  std::cout << "mean_exposure " << rep.mean_exposure << "\n";
  std::cout << "median_exposure " << rep.median_exposure << "\n";
  std::cout << "validation_perplexity " << rep.validation_perplexity << "\n";
  if (rep.has_mi)
    std::cout << "mi recall " << rep.mi.recall << " precision " << rep.mi.precision
              << " (calibration fpr " << rep.mi.calibration_fpr << ")\n";
  return 0;
}

}  // namespace fedleak::cli
