#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "cli_common.hpp"

namespace fedleak::cli {

namespace fs = std::filesystem;

int cmd_attack(const AttackArgs& args) {
  runspec::Experiment exp = load_experiment(args);
  require(SnapshotStore::exists(store_dir(exp)), ErrorKind::io,
          "no snapshot store under " + store_dir(exp) + "; run train first");
  SnapshotStore store = runspec::open_or_create_store(exp, store_dir(exp));

  bool baseline = !args.baseline.empty();
  attack::AttackOutput out;
  if (baseline) {
    out = attack::run_baseline(store, attack::baseline_from_string(args.baseline));
  } else {
    const auto& assets = runspec::ensure_assets(exp, assets_dir(exp));
    out = attack::run_attack(store, assets, exp.cfg.attack);
  }
  auto score = attack::score_identification(out.selection.rounds, out.selection.truth);

  std::string dir = exp.cfg.out_dir + (baseline ? "/baseline_" + args.baseline : "/attack");
  fs::create_directories(dir);
  {
    std::ofstream f(dir + "/selection.txt", std::ios::binary | std::ios::trunc);
    require(f.good(), ErrorKind::io, "cannot write selection.txt");
    f << "config_hash " << exp.cfg.hash() << "\n";
    f << "mode " << (baseline ? args.baseline : attack::mode_name(exp.cfg.attack.mode)) << "\n";
    f << "mdm " << (baseline ? "none" : attack::mdm_name(exp.cfg.attack.mdm)) << "\n";
    f << "used_ground_truth " << (out.selection.used_ground_truth ? 1 : 0) << "\n";
    f << "rounds";
    for (int r : out.selection.rounds) f << " " << r;
    f << "\n";
    f << "truth";
    for (int r : out.selection.truth) f << " " << r;
    f << "\n";
    f << "precision " << score.precision << "\n";
    f << "recall " << score.recall << "\n";
    require(f.good(), ErrorKind::io, "short write: selection.txt");
  }
  for (size_t i = 0; i < out.models.size(); ++i) {
    char name[64];
    std::snprintf(name, sizeof name, "/model_round_%04d.fltw", out.selection.rounds[i]);
    save_checkpoint(dir + name, out.models[i],
                    {{"config_hash", exp.cfg.hash()},
                     {"round", std::to_string(out.selection.rounds[i])}});
  }
  if (!out.models.empty())
    save_checkpoint(dir + "/aggregate.fltw", attack::aggregate_snapshots(out.models),
                    {{"config_hash", exp.cfg.hash()}});

  std::cout << "selected_rounds " << out.selection.rounds.size() << " of "
            << store.contiguous_rounds() << "\n";
  std::cout << "identification precision " << score.precision << " recall " << score.recall
            << "\n";
  return 0;
}

}  // namespace fedleak::cli
