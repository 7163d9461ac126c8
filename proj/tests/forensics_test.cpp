#include <cmath>

#include "doctest.h"
#include "fedleak/corpus.hpp"
#include "fedleak/forensics.hpp"
#include "fedleak/train.hpp"

using namespace fedleak;
using namespace fedleak::forensics;

namespace {

lm::ModelConfig two_block_cfg() {
  lm::ModelConfig cfg;
  cfg.context_len = 24;
  cfg.n_blocks = 2;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.seed = 4;
  return cfg;
}

}  // namespace

TEST_CASE("layer_delta matches the frobenius oracle") {
  ModelWeights a, b;
  a.add("x", Tensor({2}, {0.0f, 0.0f}));
  a.add("y", Tensor({2}, {1.0f, 1.0f}));
  b.add("x", Tensor({2}, {0.0f, 2.0f}));
  b.add("y", Tensor({2}, {1.0f, 1.0f}));
  auto d = layer_delta(a, b, {"x", "y"});
  REQUIRE(d.size() == 2);
  CHECK(d[0].first == "x");
  CHECK(d[0].second == doctest::Approx(2.0).epsilon(1e-12));  // ||(0,-2)||
  CHECK(d[1].second == doctest::Approx(0.0));
  CHECK_THROWS_AS(layer_delta(a, b, {}), Error);
  CHECK_THROWS_AS(layer_delta(a, b, {"z"}), Error);
}

TEST_CASE("select_sensitive_layers ranks by drift") {
  auto cfg = two_block_cfg();
  auto base = lm::init_model(cfg);
  auto tuned = base;
  // candidates: block0.attn, block0.mlp, block1.attn, block1.mlp
  tuned.at("block1.mlp").data[0] += 5.0f;
  tuned.at("block0.attn").data[0] += 3.0f;
  tuned.at("block1.attn").data[0] += 1.0f;
  tuned.at("embed").data[0] += 100.0f;  // embed/head are never candidates

  auto top2 = select_sensitive_layers(cfg, base, tuned, 2);
  REQUIRE(top2.size() == 2);
  // canonical order within the selection
  CHECK(top2[0] == "block0.attn");
  CHECK(top2[1] == "block1.mlp");

  auto top_default = select_sensitive_layers(cfg, base, tuned, 0);
  CHECK(top_default.size() == 3);  // ceil(0.75 * 4)

  CHECK_THROWS_AS(select_sensitive_layers(cfg, base, tuned, 5), Error);
  CHECK_THROWS_AS(select_sensitive_layers(cfg, base, tuned, -1), Error);
}

TEST_CASE("classify_deltas follows the reject/accept rule") {
  VriConfig vcfg;
  vcfg.significance = 0.05;
  std::vector<double> dr{1.0, 1.1, 0.9, 1.0, 1.05};
  std::vector<double> ds{3.0, 3.2, 2.9, 3.1, 3.0};

  // profile matching the sensitive reference -> victim
  auto v1 = classify_deltas({3.05, 3.15, 2.95, 3.05, 3.02}, dr, ds, vcfg);
  CHECK(v1.vs_regular.reject);
  CHECK_FALSE(v1.vs_sensitive.reject);
  CHECK(v1.victim);

  // profile matching the regular reference -> not victim
  auto v2 = classify_deltas({1.02, 1.08, 0.92, 1.01, 1.04}, dr, ds, vcfg);
  CHECK_FALSE(v2.vs_regular.reject);
  CHECK(v2.vs_sensitive.reject);
  CHECK_FALSE(v2.victim);

  // profile far from both -> rejected by both, not victim
  auto v3 = classify_deltas({9.0, 9.2, 8.9, 9.1, 9.0}, dr, ds, vcfg);
  CHECK(v3.vs_regular.reject);
  CHECK(v3.vs_sensitive.reject);
  CHECK_FALSE(v3.victim);

  CHECK(v1.delta_i.size() == 5);
  CHECK_THROWS_AS(classify_deltas({1.0}, {1.0}, {1.0}, vcfg), Error);        // < 2 layers
  CHECK_THROWS_AS(classify_deltas({1, 2}, {1, 2, 3}, {1, 2}, vcfg), Error);  // misaligned

  VriConfig welch = vcfg;
  welch.variant = stats::TTestVariant::welch;
  auto v4 = classify_deltas({3.05, 3.15, 2.95, 3.05, 3.02}, dr, ds, welch);
  CHECK(v4.victim);
}

TEST_CASE("references and round identification separate victim from regular rounds") {
  auto cfg = two_block_cfg();
  auto base = lm::init_model(cfg);

  auto reg_corpus = corpus::generate_regular(24, 31, 62);
  std::vector<std::string> d_reg(reg_corpus.lines.begin(), reg_corpus.lines.begin() + 16);
  std::vector<std::string> d_sen{"Call me at 555-0192 now", "Card 4111-2222 on file",
                                 "pin code is 884422 ok", "Reach 202-555-0144 today"};

  VriConfig vcfg;
  vcfg.ref_epochs = 2;
  vcfg.ref_lr = 2e-3;
  vcfg.batch_size = 4;
  vcfg.seed = 3;
  auto refs = build_references(cfg, base, d_reg, d_sen, vcfg);

  // the two references must themselves differ
  auto moved = frobenius_diff(refs.g_r.at("block0.mlp"), refs.g_s.at("block0.mlp"));
  CHECK(moved > 0.0);

  std::vector<std::string> layers{"block0.attn", "block0.mlp", "block1.attn", "block1.mlp"};

  // a global that trained on sensitive text should look like g_s
  lm::TrainOptions opt;
  opt.epochs = 2;
  opt.lr = 2e-3;
  opt.batch_size = 4;
  opt.seed = 77;
  std::vector<std::string> victim_lines = d_reg;
  victim_lines.insert(victim_lines.end(), d_sen.begin(), d_sen.end());
  auto g_victim = lm::train_local(cfg, base, victim_lines, opt);
  auto g_regular = lm::train_local(cfg, base, d_reg, opt);

  auto vv = identify_victim_round(g_victim, base, refs, layers, vcfg);
  auto vr = identify_victim_round(g_regular, base, refs, layers, vcfg);
  // deltas of the sensitive-trained round must sit closer to the sensitive
  // reference profile; assert the ordering even if significance is marginal
  double gap_v = 0, gap_r = 0;
  auto ds = vv.delta_i;  // reuse sizes
  auto d_s_ref = layer_delta(refs.g_s, base, layers);
  auto d_r_ref = layer_delta(refs.g_r, base, layers);
  for (size_t i = 0; i < layers.size(); ++i) {
    gap_v += std::abs(vv.delta_i[i] - d_s_ref[i].second);
    gap_r += std::abs(vr.delta_i[i] - d_s_ref[i].second);
  }
  CHECK(gap_v < gap_r);
  (void)ds;
  (void)d_r_ref;

  CHECK_THROWS_AS(build_references(cfg, base, {}, d_sen, vcfg), Error);
}
