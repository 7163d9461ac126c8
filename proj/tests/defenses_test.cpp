#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "fedleak/defenses.hpp"
#include "fedleak/model.hpp"

using namespace fedleak;
using namespace fedleak::defenses;

TEST_CASE("dp config and delta label") {
  DpConfig cfg;
  cfg.validate();
  cfg.clip = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = DpConfig{};
  cfg.sigma = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);

  CHECK(dp_delta(100) == doctest::Approx(std::pow(100.0, -1.1)).epsilon(1e-15));
  CHECK(dp_delta(1) == doctest::Approx(1.0));
  CHECK_THROWS_AS(dp_delta(0), Error);
}

TEST_CASE("dp combiner clips to the hand oracle") {
  DpConfig cfg;
  cfg.clip = 1.0;
  cfg.sigma = 0.0;
  DpCombiner comb(cfg);

  // sample norm 5 clips by 1/5; sub-threshold sample passes through raw
  std::vector<std::vector<float>> grads{{3.0f, 4.0f}, {0.3f, 0.0f}};
  std::vector<float> out;
  comb.combine(grads, out, 1);
  REQUIRE(out.size() == 2);
  CHECK(out[0] == doctest::Approx((3.0 / 5.0 + 0.3) / 2.0).epsilon(1e-7));
  CHECK(out[1] == doctest::Approx((4.0 / 5.0 + 0.0) / 2.0).epsilon(1e-7));

  // clipped sample lands exactly on the clip norm
  std::vector<std::vector<float>> one{{3.0f, 4.0f}};
  comb.combine(one, out, 1);
  CHECK(std::sqrt(out[0] * out[0] + out[1] * out[1]) == doctest::Approx(1.0).epsilon(1e-6));

  CHECK_THROWS_AS(comb.combine({}, out, 1), Error);
  CHECK_THROWS_AS(comb.combine({{1.0f}, {1.0f, 2.0f}}, out, 1), Error);  // ragged
}

TEST_CASE("sub-threshold gradients pass through bit-identically") {
  DpConfig cfg;
  cfg.clip = 100.0;
  cfg.sigma = 0.0;
  DpCombiner dp(cfg);
  lm::GradCombiner plain;

  std::vector<std::vector<float>> grads{{0.125f, -0.5f, 0.0625f}, {1.0f, 0.25f, -2.0f},
                                        {0.3f, 0.7f, -0.1f}};
  std::vector<float> a, b;
  dp.combine(grads, a, 42);
  plain.combine(grads, b, 42);
  CHECK(a == b);  // exact float equality
}

TEST_CASE("dp training path with huge clip and zero sigma equals no defense") {
  lm::ModelConfig mcfg;
  mcfg.context_len = 24;
  mcfg.n_blocks = 1;
  mcfg.d_model = 8;
  mcfg.n_heads = 2;
  mcfg.seed = 12;
  auto base = lm::init_model(mcfg);
  std::vector<std::string> lines{"the analyst counted the maps", "a shy painter slept",
                                 "two plumbers traded mugs", "the curator waved twice"};

  DpConfig cfg;
  cfg.clip = 1e6;
  cfg.sigma = 0.0;
  DpCombiner dp(cfg);

  lm::TrainOptions opt;
  opt.epochs = 2;
  opt.lr = 1e-3;
  opt.batch_size = 2;
  opt.seed = 77;
  auto plain_w = lm::train_local(mcfg, base, lines, opt);
  opt.combiner = &dp;
  auto dp_w = lm::train_local(mcfg, base, lines, opt);
  for (const auto& [name, t] : plain_w.items()) CHECK(t.data == dp_w.at(name).data);
}

TEST_CASE("dp noise is seeded and sigma-scaled") {
  DpConfig cfg;
  cfg.clip = 1.0;
  cfg.sigma = 2.0;
  DpCombiner comb(cfg);
  std::vector<std::vector<float>> grads{{0.1f, 0.2f, -0.1f, 0.05f}};

  std::vector<float> a, b, c;
  comb.combine(grads, a, 9);
  comb.combine(grads, b, 9);
  comb.combine(grads, c, 10);
  CHECK(a == b);   // same step seed reproduces the draw
  CHECK(a != c);   // different step seed differs

  // noise centered on the clipped mean: the deviation is plausibly scaled
  std::vector<float> clean;
  DpConfig quiet = cfg;
  quiet.sigma = 0.0;
  DpCombiner(quiet).combine(grads, clean, 9);
  double dev = 0.0;
  for (size_t i = 0; i < a.size(); ++i) dev = std::max(dev, std::abs((double)a[i] - clean[i]));
  CHECK(dev > 0.0);
  CHECK(dev < 2.0 * cfg.sigma * cfg.clip * 10.0);
}

TEST_CASE("default scrub rules hit every secret category") {
  corpus::Corpus c;
  c.lines = {
      "Call the office line at 347-981-0042 today",
      "Billing card number 4111-2323-9988-0001 stays",
      "Forward the invoice to kelora07@bluepine.com now",
      "Ship the parcel to 82 Maple St, AZ 85001 soon",
      "no secrets in this line",
  };
  auto stats = scrub(c, default_scrub_rules());
  CHECK(stats.lines_touched == 4);
  CHECK(stats.replacements == 4);
  CHECK(c.lines[0] == "Call the office line at <UNK> today");
  CHECK(c.lines[1] == "Billing card number <UNK> stays");
  CHECK(c.lines[2] == "Forward the invoice to <UNK> now");
  CHECK(c.lines[3] == "Ship the parcel to <UNK> soon");
  CHECK(c.lines[4] == "no secrets in this line");

  // card rule outranks the phone rule on the longer digit shape
  corpus::Corpus both;
  both.lines = {"cards 1111-2222-3333-4444 and phone 555-111-2222"};
  auto s2 = scrub(both, default_scrub_rules());
  CHECK(s2.replacements == 2);
  CHECK(both.lines[0] == "cards <UNK> and phone <UNK>");

  corpus::Corpus vec;
  vec.lines = {"call 454-652-6061"};
  auto s3 = scrub(vec, default_scrub_rules());
  CHECK(s3.replacements == 1);
  CHECK(vec.lines[0] == "call <UNK>");
}

TEST_CASE("scrub is idempotent") {
  corpus::Corpus c;
  c.lines = {"Call 347-981-0042 and card 4111-2323-9988-0001",
             "Forward to kelora07@crestview.edu please"};
  scrub(c, default_scrub_rules());
  auto once = c.lines;
  auto stats = scrub(c, default_scrub_rules());
  CHECK(stats.replacements == 0);
  CHECK(c.lines == once);
}

TEST_CASE("generated canaries are scrubbed in full") {
  corpus::CanaryConfig ccfg;
  ccfg.n_canaries = 20;
  ccfg.space_size = 64;
  ccfg.seed = 14;
  auto set = corpus::generate_canaries(ccfg);
  corpus::Corpus c;
  c.lines = corpus::canary_texts(set);
  auto stats = scrub(c, default_scrub_rules());
  CHECK(stats.lines_touched == 20);
  for (size_t i = 0; i < c.lines.size(); ++i)
    CHECK(c.lines[i].find(set.records[i].secret) == std::string::npos);
}

TEST_CASE("scrub rules load from a file") {
  auto dir = std::filesystem::temp_directory_path() / "fedleak_test_scrub";
  std::filesystem::create_directories(dir);
  auto path = (dir / "rules.txt").string();
  {
    std::ofstream f(path);
    f << "# custom rules\n";
    f << "\n";
    f << "code \\d{3}x\\d{3}\n";
    f << "word secret [a-z]+\n";
  }
  auto rules = load_scrub_rules(path);
  REQUIRE(rules.size() == 2);
  CHECK(rules[0].category == "code");

  corpus::Corpus c;
  c.lines = {"value 123x456 plus secret handshake here"};
  auto stats = scrub(c, rules);
  CHECK(stats.replacements == 2);
  CHECK(c.lines[0] == "value <UNK> plus <UNK> here");

  {
    std::ofstream f((dir / "bad.txt").string());
    f << "broken ([unclosed\n";
  }
  CHECK_THROWS_AS(load_scrub_rules((dir / "bad.txt").string()), Error);
  {
    std::ofstream f((dir / "empty.txt").string());
    f << "# only comments\n";
  }
  CHECK_THROWS_AS(load_scrub_rules((dir / "empty.txt").string()), Error);
  CHECK_THROWS_AS(load_scrub_rules((dir / "missing.txt").string()), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("deduplicate keeps first occurrences in order") {
  corpus::Corpus c;
  c.lines = {"a", "b", "a", "c", "b", "a"};
  CHECK(deduplicate(c) == 3);
  CHECK(c.lines == std::vector<std::string>{"a", "b", "c"});
  CHECK(deduplicate(c) == 0);

  corpus::Corpus canary;
  canary.lines.assign(10, "Call me at 555-010-0042");
  canary.lines.insert(canary.lines.begin() + 4, "other line");
  CHECK(deduplicate(canary) == 9);
  CHECK(canary.lines.size() == 2);
}
