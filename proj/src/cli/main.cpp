#include <iostream>

#include "CLI11.hpp"
#include "cli_common.hpp"

int main(int argc, char** argv) {
  using namespace fedleak;

  CLI::App app{"fedleak: federated-learning privacy-leakage laboratory"};
  app.require_subcommand(1);

  cli::CommonArgs train_args, vri_args;
  cli::AttackArgs attack_args;
  cli::EvalArgs eval_args;
  cli::SweepArgs sweep_args;

  auto add_common = [](CLI::App* sub, cli::CommonArgs& args) {
    sub->add_option("--config", args.config_path, "experiment config file")->required();
    sub->add_option("--out", args.out_override, "override the configured out_dir");
  };

  auto* train = app.add_subcommand("train", "run or resume federated training");
  add_common(train, train_args);

  auto* atk = app.add_subcommand("attack", "select and post-process victim snapshots");
  add_common(atk, attack_args);
  atk->add_option("--baseline", attack_args.baseline,
                  "emit a baseline snapshot set (lr | ir | fp | mu) instead of attacking");

  auto* eval = app.add_subcommand("eval", "leakage report for an attack or baseline");
  add_common(eval, eval_args);
  eval->add_option("--subject", eval_args.subject,
                   "attack | lr | ir | fp | mu | base (default attack)");
  eval->add_option("--models", eval_args.models, "evaluate these checkpoints instead")
      ->expected(-1);
  eval->add_flag("--trend", eval_args.trend, "also write the per-round exposure trend");

  auto* vri = app.add_subcommand("vri", "per-round victim identification over the store");
  add_common(vri, vri_args);

  auto* sweep = app.add_subcommand("sweep", "train/attack/eval across canary repetitions");
  add_common(sweep, sweep_args);
  sweep->add_option("--repetitions", sweep_args.repetitions, "repetition counts to sweep")
      ->required();

  int rc = 0;
  train->callback([&] { rc = cli::cmd_train(train_args); });
  atk->callback([&] { rc = cli::cmd_attack(attack_args); });
  eval->callback([&] { rc = cli::cmd_eval(eval_args); });
  vri->callback([&] { rc = cli::cmd_vri(vri_args); });
  sweep->callback([&] { rc = cli::cmd_sweep(sweep_args); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.kind() == ErrorKind::configuration || e.kind() == ErrorKind::capacity ? 2 : 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return rc;
}
