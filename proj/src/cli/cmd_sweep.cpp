#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "cli_common.hpp"

namespace fedleak::cli {

int cmd_sweep(const SweepArgs& args) {
  require(!args.repetitions.empty(), ErrorKind::configuration, "no repetition counts given");
  config::RunConfig root = config::load_config_file(args.config_path);
  if (!args.out_override.empty()) root.out_dir = args.out_override;
  std::filesystem::create_directories(root.out_dir);

  std::string csv_path = root.out_dir + "/sweep.csv";
  std::vector<std::string> rows;
  for (int reps : args.repetitions) {
    require(reps >= 0, ErrorKind::configuration, "repetition counts must be >= 0");
    config::RunConfig cfg = root;
    cfg.data.repetitions = reps;
    cfg.out_dir = root.out_dir + "/reps_" + std::to_string(reps);

    runspec::Experiment exp = runspec::prepare(cfg, root.out_dir + "/cache");
    SnapshotStore store = runspec::open_or_create_store(exp, store_dir(exp));
    runspec::train(exp, store);
    EvalOutcome outcome = evaluate_subject(exp, store, "attack");
    leakage::write_report(cfg.out_dir + "/report_attack.txt", outcome.report);

    char buf[160];
    std::snprintf(buf, sizeof buf, "%d,%d,%d,%.17g,%.17g,%.17g", reps, outcome.report.nsr,
                  outcome.report.n_canaries, outcome.report.mean_exposure,
                  outcome.report.median_exposure, outcome.report.validation_perplexity);
    rows.push_back(buf);
    std::cout << "repetitions " << reps << " nsr " << outcome.report.nsr << "/"
              << outcome.report.n_canaries << " mean_exposure "
              << outcome.report.mean_exposure << "\n";
  }

  std::ofstream f(csv_path, std::ios::binary | std::ios::trunc);
  require(f.good(), ErrorKind::io, "cannot write " + csv_path);
  f << "repetitions,nsr,n_canaries,mean_exposure,median_exposure,validation_perplexity\n";
  for (const auto& r : rows) f << r << "\n";
  require(f.good(), ErrorKind::io, "short write: " + csv_path);
  return 0;
}

}  // namespace fedleak::cli
