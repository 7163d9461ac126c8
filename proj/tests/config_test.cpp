#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "doctest.h"
#include "fedleak/common.hpp"
#include "fedleak/config.hpp"

using namespace fedleak;
using namespace fedleak::config;

namespace {

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::invalid_input;
}

// Smallest text that passes validation: the default canary count needs at
// least one victim client.
const char* kMinimal = "[fed]\nvictims = 3\n";

}  // namespace

TEST_CASE("config: defaults survive a minimal parse") {
  RunConfig c = parse_config(kMinimal);
  CHECK(c.seed == 1);
  CHECK(c.out_dir == "runs/out");
  CHECK(c.model.vocab_size == 96);
  CHECK(c.model.context_len == 64);
  CHECK(c.model.n_blocks == 4);
  CHECK(c.model.d_model == 64);
  CHECK(c.model.n_heads == 2);
  CHECK(c.data.regular_lines == 4000);
  CHECK(c.data.pretrain_lines == 1500);
  CHECK(c.data.pretrain_epochs == 3);
  CHECK(c.data.pretrain_lr == doctest::Approx(1e-3));
  CHECK(c.data.validation_lines == 128);
  CHECK(c.data.canaries == 20);
  CHECK(c.data.space_size == 4096);
  CHECK(c.data.repetitions == 10);
  CHECK(c.data.attacker_regular_lines == 256);
  CHECK(c.data.attacker_canaries == 20);
  CHECK(c.fed.n_rounds == 40);
  CHECK(c.fed.n_clients == 100);
  CHECK(c.fed.clients_per_round == 20);
  CHECK(c.fed.local_epochs == 1);
  CHECK(c.fed.lr == doctest::Approx(5e-3));
  CHECK(c.fed.lr_final_frac == doctest::Approx(0.1));
  CHECK(c.fed.optimizer == lm::Optimizer::adam);
  CHECK(c.fed.batch_size == 8);
  CHECK(c.fed.baseline == "none");
  CHECK_FALSE(c.fed.oracle);
  CHECK(c.fed.victim_ids == std::vector<int>{3});
  CHECK(c.fed.adversary_ids.empty());
  CHECK(c.victim_round_fraction == 1.0);
  CHECK(c.attack.mode == attack::Mode::static_rounds);
  CHECK(c.attack.mdm == attack::MdmMethod::none);
  CHECK(c.attack.alpha == 0.5);
  CHECK(c.attack.vri.variant == stats::TTestVariant::paired);
  CHECK(c.attack.vri.significance == 0.05);
  CHECK(c.attack.vri.top_k_layers == 0);
  CHECK(c.attack.vri.ref_epochs == 2);
  CHECK(c.attack.swo.steps == 500);
  CHECK(c.attack.swo.norm_cap == 2.0);
  CHECK(c.attack.wtl.n_pairs == 16);
  CHECK(c.attack.wtl.val_fraction == 0.25);
  CHECK(c.recon.beam_width == 3);
  CHECK(c.recon.top_k == 3);
  CHECK(c.recon.extra_tokens == 4);
  CHECK(c.mi.max_fpr == 0.10);
  CHECK_FALSE(c.defenses.dp);
  CHECK(c.defenses.dp_clip == 0.01);
  CHECK(c.defenses.dp_sigma == 0.0);
  CHECK_FALSE(c.defenses.scrub);
  CHECK(c.defenses.scrub_rules.empty());
  CHECK_FALSE(c.defenses.dedup);
}

TEST_CASE("config: every section parses and overrides") {
  std::string text =
      "# experiment file\r\n"
      "seed = 99\n"
      "out_dir = runs/exp1  # inline comment\n"
      "\n"
      "[model]\n"
      "vocab_size = 96\n"
      "context_len = 48\n"
      "n_blocks = 2\n"
      "d_model = 32\n"
      "n_heads = 4\n"
      "[data]\n"
      "regular_lines = 900\n"
      "pretrain_lines = 300\n"
      "pretrain_epochs = 1\n"
      "pretrain_lr = 0.002\n"
      "validation_lines = 64\n"
      "canaries = 8\n"
      "space_size = 64\n"
      "repetitions = 5\n"
      "attacker_regular_lines = 100\n"
      "attacker_canaries = 8\n"
      "  [fed]  \n"
      "rounds = 12\n"
      "clients = 10\n"
      "clients_per_round = 4\n"
      "local_epochs = 2\n"
      "lr = 0.01\n"
      "lr_final_frac = 0.5\n"
      "optimizer = sgd\n"
      "batch_size = 4\n"
      "baseline = fp\n"
      "oracle = true\n"
      "victims = 3, 7 ,1\n"
      "adversaries = 2\n"
      "victim_round_fraction = 0.5\n"
      "[attack]\n"
      "mode = dynamic\n"
      "mdm = wtl\n"
      "alpha = 0.25\n"
      "[vri]\n"
      "t_test = welch\n"
      "significance = 0.01\n"
      "top_k_layers = 2\n"
      "ref_epochs = 3\n"
      "ref_lr = 0.004\n"
      "batch_size = 16\n"
      "[swo]\n"
      "steps = 250\n"
      "lr = 0.002\n"
      "clip = 1.5\n"
      "norm_cap = 3\n"
      "optimizer = sgd\n"
      "[wtl]\n"
      "n_pairs = 4\n"
      "ft_epochs = 1\n"
      "ft_lr = 0.001\n"
      "ft_batch_size = 2\n"
      "hidden = 16\n"
      "epochs = 50\n"
      "lr = 0.005\n"
      "val_fraction = 0.5\n"
      "[recon]\n"
      "beam_width = 4\n"
      "top_k = 8\n"
      "extra_tokens = 2\n"
      "[mi]\n"
      "max_fpr = 0.2\n"
      "[defenses]\n"
      "dp = true\n"
      "dp_clip = 0.5\n"
      "dp_sigma = 0.1\n"
      "scrub = true\n"
      "scrub_rules = rules.txt\n"
      "dedup = true\n";
  RunConfig c = parse_config(text);
  CHECK(c.seed == 99);
  CHECK(c.out_dir == "runs/exp1");
  CHECK(c.model.context_len == 48);
  CHECK(c.model.n_blocks == 2);
  CHECK(c.model.d_model == 32);
  CHECK(c.model.n_heads == 4);
  CHECK(c.data.regular_lines == 900);
  CHECK(c.data.pretrain_lines == 300);
  CHECK(c.data.pretrain_epochs == 1);
  CHECK(c.data.pretrain_lr == 0.002);
  CHECK(c.data.validation_lines == 64);
  CHECK(c.data.canaries == 8);
  CHECK(c.data.space_size == 64);
  CHECK(c.data.repetitions == 5);
  CHECK(c.data.attacker_regular_lines == 100);
  CHECK(c.data.attacker_canaries == 8);
  CHECK(c.fed.n_rounds == 12);
  CHECK(c.fed.n_clients == 10);
  CHECK(c.fed.clients_per_round == 4);
  CHECK(c.fed.local_epochs == 2);
  CHECK(c.fed.lr == 0.01);
  CHECK(c.fed.lr_final_frac == 0.5);
  CHECK(c.fed.optimizer == lm::Optimizer::sgd);
  CHECK(c.fed.batch_size == 4);
  CHECK(c.fed.baseline == "fp");
  CHECK(c.fed.oracle);
  CHECK(c.fed.victim_ids == std::vector<int>{3, 7, 1});
  CHECK(c.fed.adversary_ids == std::vector<int>{2});
  CHECK(c.victim_round_fraction == 0.5);
  CHECK(c.attack.mode == attack::Mode::dynamic);
  CHECK(c.attack.mdm == attack::MdmMethod::wtl);
  CHECK(c.attack.alpha == 0.25);
  CHECK(c.attack.vri.variant == stats::TTestVariant::welch);
  CHECK(c.attack.vri.significance == 0.01);
  CHECK(c.attack.vri.top_k_layers == 2);
  CHECK(c.attack.vri.ref_epochs == 3);
  CHECK(c.attack.vri.ref_lr == 0.004);
  CHECK(c.attack.vri.batch_size == 16);
  CHECK(c.attack.swo.steps == 250);
  CHECK(c.attack.swo.lr == 0.002);
  CHECK(c.attack.swo.clip == 1.5);
  CHECK(c.attack.swo.norm_cap == 3.0);
  CHECK(c.attack.swo.optimizer == lm::Optimizer::sgd);
  CHECK(c.attack.wtl.n_pairs == 4);
  CHECK(c.attack.wtl.ft_epochs == 1);
  CHECK(c.attack.wtl.ft_lr == 0.001);
  CHECK(c.attack.wtl.ft_batch_size == 2);
  CHECK(c.attack.wtl.hidden == 16);
  CHECK(c.attack.wtl.epochs == 50);
  CHECK(c.attack.wtl.lr == 0.005);
  CHECK(c.attack.wtl.val_fraction == 0.5);
  CHECK(c.recon.beam_width == 4);
  CHECK(c.recon.top_k == 8);
  CHECK(c.recon.extra_tokens == 2);
  CHECK(c.mi.max_fpr == 0.2);
  CHECK(c.defenses.dp);
  CHECK(c.defenses.dp_clip == 0.5);
  CHECK(c.defenses.dp_sigma == 0.1);
  CHECK(c.defenses.scrub);
  CHECK(c.defenses.scrub_rules == "rules.txt");
  CHECK(c.defenses.dedup);
}

TEST_CASE("config: run section is the unnamed default") {
  RunConfig a = parse_config(std::string("seed = 7\n") + kMinimal);
  RunConfig b = parse_config(std::string("[run]\nseed = 7\n") + kMinimal);
  CHECK(a.seed == 7);
  CHECK(b.seed == 7);
  CHECK(a.hash() == b.hash());
}

TEST_CASE("config: malformed text is a configuration error") {
  auto bad = [](const std::string& text) {
    CHECK(kind_of([&] { parse_config(text); }) == ErrorKind::configuration);
  };
  bad("");                                  // canaries without victims
  bad("bogus = 1\n");                       // unknown key, default section
  bad("[model]\nwidth = 3\n");              // unknown key
  bad("[nope]\nx = 1\n");                   // unknown section
  bad("[fed\nrounds = 2\n");                // unterminated header
  bad("[]\n");                              // empty section name
  bad("[fed]\nrounds\n");                   // missing '='
  bad("[fed]\n= 5\n");                      // empty key
  bad("[fed]\nrounds = 2.5\nvictims = 1\n");   // trailing characters
  bad("[fed]\nrounds = abc\nvictims = 1\n");   // not an integer
  bad("[fed]\nlr = inf\nvictims = 1\n");       // non-finite
  bad("[fed]\nlr = soon\nvictims = 1\n");      // not a number
  bad("[fed]\noracle = yes\nvictims = 1\n");   // not a bool
  bad("[fed]\nvictims = 1,,2\n");              // empty list item
  bad("[fed]\noptimizer = rmsprop\nvictims = 1\n");
  bad("[attack]\nmode = sneaky\n[fed]\nvictims = 1\n");
  bad("[attack]\nmdm = both\n[fed]\nvictims = 1\n");
  bad("[vri]\nt_test = student\n[fed]\nvictims = 1\n");
}

TEST_CASE("config: validation cross-checks") {
  auto bad = [](const std::string& text) {
    CHECK(kind_of([&] { parse_config(text); }) == ErrorKind::configuration);
  };
  // Client pool smaller than the client count.
  bad("[data]\nregular_lines = 1700\n[fed]\nvictims = 0\n");
  // Dynamic modes need adversary clients.
  bad("[attack]\nmode = dynamic\n[fed]\nvictims = 1\n");
  bad("[attack]\nmode = dynamic_plus\n[fed]\nvictims = 1\n");
  bad(std::string("[fed]\nvictim_round_fraction = 1.5\nvictims = 1\n"));
  bad(std::string("[fed]\nvictim_round_fraction = -0.1\nvictims = 1\n"));
  bad("[data]\nspace_size = 1\n[fed]\nvictims = 1\n");
  bad("[data]\nattacker_regular_lines = 0\n[fed]\nvictims = 1\n");
  bad("[attack]\nalpha = 1.5\n[fed]\nvictims = 1\n");
  bad("[vri]\nsignificance = 1\n[fed]\nvictims = 1\n");
  bad("[swo]\nsteps = 0\n[fed]\nvictims = 1\n");
  bad("[wtl]\nn_pairs = 1\n[fed]\nvictims = 1\n");
  bad("[recon]\nbeam_width = 3\ntop_k = 7\n[fed]\nvictims = 1\n");
  bad("[mi]\nmax_fpr = -0.1\n[fed]\nvictims = 1\n");
  // DP parameters are only checked when the defense is on.
  bad("[defenses]\ndp = true\ndp_clip = 0\n[fed]\nvictims = 1\n");
  CHECK_NOTHROW(parse_config("[defenses]\ndp_clip = 0\n[fed]\nvictims = 1\n"));
  // No canaries, no victim requirement.
  CHECK_NOTHROW(parse_config("[data]\ncanaries = 0\n"));
  // Dynamic with a disjoint adversary set is fine.
  CHECK_NOTHROW(
      parse_config("[attack]\nmode = dynamic\n[fed]\nvictims = 1\nadversaries = 2\n"));
}

TEST_CASE("config: hash depends on values, not formatting") {
  RunConfig a = parse_config("[fed]\nvictims = 3\nrounds = 12\n");
  RunConfig b = parse_config(
      "# comment\n\n  [fed]\n  rounds   =   12  # same thing\nvictims= 3\n");
  CHECK(a.canonical() == b.canonical());
  CHECK(a.hash() == b.hash());
  CHECK(a.hash_u64() == b.hash_u64());
  CHECK(a.hash() == hex64(a.hash_u64()));
  CHECK(a.hash().size() == 16);

  RunConfig c = parse_config("[fed]\nvictims = 3\nrounds = 13\n");
  CHECK(a.hash() != c.hash());
  RunConfig d = parse_config(std::string("seed = 2\n") + kMinimal);
  CHECK(parse_config(kMinimal).hash() != d.hash());
  // Victim list order is part of the identity.
  RunConfig e1 = parse_config("[fed]\nvictims = 3,7\n");
  RunConfig e2 = parse_config("[fed]\nvictims = 7,3\n");
  CHECK(e1.hash() != e2.hash());
}

TEST_CASE("config: file loading") {
  namespace fs = std::filesystem;
  fs::path dir = fs::temp_directory_path() / "fedleak_config_test";
  fs::create_directories(dir);
  fs::path p = dir / "run.ini";
  {
    std::ofstream f(p);
    f << "seed = 11\n" << kMinimal;
  }
  RunConfig c = load_config_file(p.string());
  CHECK(c.seed == 11);
  CHECK(kind_of([&] { load_config_file((dir / "missing.ini").string()); }) ==
        ErrorKind::configuration);
  fs::remove_all(dir);
}
