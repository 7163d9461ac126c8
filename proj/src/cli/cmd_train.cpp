#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "cli_common.hpp"

namespace fedleak::cli {

namespace fs = std::filesystem;

std::string resolve_out_dir(const std::string& configured, const std::string& flag_override) {
  if (!flag_override.empty()) return flag_override;
  if (const char* env = std::getenv("FEDLEAK_OUT"); env && *env) return env;
  return configured;
}

runspec::Experiment load_experiment(const CommonArgs& args) {
  config::RunConfig cfg = config::load_config_file(args.config_path);
  cfg.out_dir = resolve_out_dir(cfg.out_dir, args.out_override);
  fs::create_directories(cfg.out_dir);
  return runspec::prepare(cfg, cfg.out_dir + "/cache");
}

std::string store_dir(const runspec::Experiment& exp) { return exp.cfg.out_dir + "/store"; }
std::string assets_dir(const runspec::Experiment& exp) { return exp.cfg.out_dir + "/assets"; }

namespace {

// Regenerated from the manifest after every run, so resumed and fresh runs
// leave identical files.
void write_rounds_csv(const std::string& path, const runspec::Experiment& exp,
                      const SnapshotStore& store) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  require(f.good(), ErrorKind::io, "cannot open " + path);
  f << "round,lr,participants,victims\n";
  char lr[64];
  for (const auto& meta : store.globals()) {
    std::snprintf(lr, sizeof lr, "%.17g", exp.fcfg.round_lr(meta.round));
    f << meta.round << "," << lr << ",";
    for (size_t i = 0; i < meta.participants.size(); ++i)
      f << (i ? ";" : "") << meta.participants[i];
    f << ",";
    for (size_t i = 0; i < meta.victims.size(); ++i) f << (i ? ";" : "") << meta.victims[i];
    f << "\n";
  }
  require(f.good(), ErrorKind::io, "short write: " + path);
}

}  // namespace

int cmd_train(const CommonArgs& args) {
  runspec::Experiment exp = load_experiment(args);
  SnapshotStore store = runspec::open_or_create_store(exp, store_dir(exp));
  int before = store.contiguous_rounds();
  fed::RunResult result = runspec::train(exp, store);
  write_rounds_csv(exp.cfg.out_dir + "/rounds.csv", exp, store);
  save_checkpoint(exp.cfg.out_dir + "/final.fltw", result.final_weights,
                  {{"config_hash", exp.cfg.hash()}});
  double ppx = runspec::validation_perplexity(exp, result.final_weights);
  std::cout << "config_hash " << exp.cfg.hash() << "\n";
  std::cout << "rounds_executed " << result.logs.size() << " (resumed at " << before << ")\n";
  std::cout << "validation_perplexity " << ppx << "\n";
  if (exp.cfg.defenses.dp)
    std::cout << "dp clip " << exp.cfg.defenses.dp_clip << " sigma " << exp.cfg.defenses.dp_sigma
              << " delta_label " << defenses::dp_delta((size_t)exp.fcfg.n_clients) << "\n";
  if (exp.cfg.defenses.scrub)
    std::cout << "scrub lines_touched " << exp.scrub_stats.lines_touched << " replacements "
              << exp.scrub_stats.replacements << "\n";
  if (exp.cfg.defenses.dedup) std::cout << "dedup removed " << exp.dedup_removed << "\n";
  return 0;
}

}  // namespace fedleak::cli
