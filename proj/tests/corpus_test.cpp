#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "fedleak/corpus.hpp"
#include "fedleak/tokenizer.hpp"

using namespace fedleak;
using namespace fedleak::corpus;

TEST_CASE("ingest normalizes lines") {
  auto dir = std::filesystem::temp_directory_path() / "fedleak_test_ingest";
  std::filesystem::create_directories(dir);
  auto path = (dir / "in.txt").string();
  {
    std::ofstream out(path, std::ios::binary);
    out << "plain line\r\n";
    out << "tab\there  \n";
    out << "\n";                // dropped
    out << "   \n";             // whitespace only, dropped
    out << "caf\xc3\xa9\n";     // é outside alphabet -> '?'
    out << "last";              // no trailing newline
  }
  auto c = ingest(path);
  REQUIRE(c.lines.size() == 4);
  CHECK(c.lines[0] == "plain line");
  CHECK(c.lines[1] == "tab here");
  CHECK(c.lines[2] == "caf?");
  CHECK(c.lines[3] == "last");

  {
    std::ofstream out((dir / "bad.txt").string(), std::ios::binary);
    out << "ok\n" << "\xc3(" << "\n";  // invalid UTF-8 continuation
  }
  CHECK_THROWS_AS(ingest((dir / "bad.txt").string()), Error);
  CHECK_THROWS_AS(ingest((dir / "missing.txt").string()), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("generate_regular is seeded, unique, digit-free, bounded") {
  auto a = generate_regular(300, 42, 62);
  auto b = generate_regular(300, 42, 62);
  auto c = generate_regular(300, 43, 62);
  CHECK(a.lines == b.lines);
  CHECK(a.lines != c.lines);
  REQUIRE(a.lines.size() == 300);
  // the template grammar tops out below the pipeline's 62-char budget, but a
  // tighter cap is a capacity error
  CHECK_THROWS_AS(generate_regular(300, 42, 30), Error);

  CharTokenizer tok;
  std::set<std::string> seen;
  for (const auto& line : a.lines) {
    CHECK(line.size() <= 62);
    CHECK(!line.empty());
    CHECK(seen.insert(line).second);
    CHECK(line.find_first_of("0123456789") == std::string::npos);
    CHECK_NOTHROW(tok.encode(line));
  }
}

TEST_CASE("canary generation invariants") {
  CanaryConfig cfg;
  cfg.n_canaries = 20;
  cfg.space_size = 64;
  cfg.seed = 7;
  cfg.max_text_len = 62;
  auto set = generate_canaries(cfg);
  REQUIRE(set.records.size() == 20);

  std::map<CanaryCategory, std::set<std::string>> secrets;
  int cat_counts[4] = {0, 0, 0, 0};
  for (const auto& r : set.records) {
    ++cat_counts[static_cast<int>(r.category)];
    CHECK(r.space_size == 64);
    CHECK(r.true_index >= 0);
    CHECK(r.true_index < r.space_size);
    CHECK(candidate_secret(r, r.true_index) == r.secret);
    CHECK(r.full_text() == r.prefix + r.secret);
    CHECK(r.full_text().size() <= 62);
    CHECK(r.client_id == -1);
    CHECK(secrets[r.category].insert(r.secret).second);  // unique within category

    // candidates are pairwise distinct; the numeric formats are fixed-width
    bool fixed_width = r.category == CanaryCategory::phone ||
                       r.category == CanaryCategory::credit_card;
    std::set<std::string> cands;
    for (int i = 0; i < r.space_size; ++i) {
      auto s = candidate_secret(r, i);
      if (fixed_width) CHECK(s.size() == r.secret.size());
      CHECK(cands.insert(s).second);
    }
    CHECK_THROWS_AS(candidate_secret(r, -1), Error);
    CHECK_THROWS_AS(candidate_secret(r, r.space_size), Error);
  }
  for (int n : cat_counts) CHECK(n == 5);  // even split over 4 categories

  auto again = generate_canaries(cfg);
  for (size_t i = 0; i < set.records.size(); ++i) {
    CHECK(again.records[i].secret == set.records[i].secret);
    CHECK(again.records[i].prefix == set.records[i].prefix);
  }
}

TEST_CASE("canary capacity errors") {
  CanaryConfig cfg;
  cfg.n_canaries = 40;
  cfg.space_size = 8;  // 10 per category > 8 distinct secrets
  CHECK_THROWS_AS(generate_canaries(cfg), Error);
}

TEST_CASE("disjoint canaries avoid originals") {
  CanaryConfig cfg;
  cfg.n_canaries = 16;
  cfg.space_size = 32;
  cfg.seed = 9;
  auto base = generate_canaries(cfg);
  auto other = generate_disjoint_canaries(cfg, base);
  REQUIRE(other.records.size() == 16);
  std::set<std::string> base_texts;
  for (const auto& r : base.records) base_texts.insert(r.full_text());
  for (const auto& r : other.records) {
    CHECK(!base_texts.count(r.full_text()));
    CHECK(candidate_secret(r, r.true_index) == r.secret);
  }
  auto texts = canary_texts(other);
  REQUIRE(texts.size() == 16);
  CHECK(texts[0] == other.records[0].full_text());
}

TEST_CASE("partition preserves the line multiset") {
  auto all = generate_regular(103, 5, 62);
  auto shards = partition_clients(all, 10, 77);
  REQUIRE(shards.size() == 10);
  // 103 = 10*10 + 3: first three clients get 11
  for (int i = 0; i < 10; ++i) CHECK(shards[i].lines.size() == (i < 3 ? 11u : 10u));

  std::multiset<std::string> orig(all.lines.begin(), all.lines.end()), got;
  for (const auto& s : shards) got.insert(s.lines.begin(), s.lines.end());
  CHECK(orig == got);

  auto shards2 = partition_clients(all, 10, 77);
  for (int i = 0; i < 10; ++i) CHECK(shards[i].lines == shards2[i].lines);
  CHECK_THROWS_AS(partition_clients(all, 0, 1), Error);
  CHECK_THROWS_AS(partition_clients(all, 104, 1), Error);  // more clients than lines
}

TEST_CASE("insert_canaries round-robins victims and repeats texts") {
  auto all = generate_regular(60, 6, 62);
  auto shards = partition_clients(all, 6, 1);
  CanaryConfig ccfg;
  ccfg.n_canaries = 8;
  ccfg.space_size = 16;
  ccfg.seed = 2;
  auto set = generate_canaries(ccfg);

  std::vector<int> victims{4, 1};  // unordered on purpose
  auto before = shards;
  insert_canaries(shards, set, victims, 3, 99);

  // round-robin over victims sorted by id: canary 0 -> 1, canary 1 -> 4, ...
  for (size_t i = 0; i < set.records.size(); ++i)
    CHECK(set.records[i].client_id == (i % 2 == 0 ? 1 : 4));
  for (const auto& r : set.records) {
    CHECK(r.reps == 3);
    const auto& lines = shards[r.client_id].lines;
    CHECK(std::count(lines.begin(), lines.end(), r.full_text()) == 3);
  }
  // non-victims untouched
  for (int c : {0, 2, 3, 5}) CHECK(shards[c].lines == before[c].lines);
  // victim shards grew by exactly reps * (their canary count)
  CHECK(shards[1].lines.size() == before[1].lines.size() + 3 * 4);
  CHECK(shards[4].lines.size() == before[4].lines.size() + 3 * 4);

  CHECK_THROWS_AS(insert_canaries(shards, set, {}, 1, 1), Error);    // no victims
  CHECK_THROWS_AS(insert_canaries(shards, set, {9}, 1, 1), Error);   // bad client id
}

TEST_CASE("category names round-trip") {
  for (auto c : {CanaryCategory::phone, CanaryCategory::credit_card, CanaryCategory::email,
                 CanaryCategory::address})
    CHECK(category_from_string(category_name(c)) == c);
  CHECK_THROWS_AS(category_from_string("ssn"), Error);
}
