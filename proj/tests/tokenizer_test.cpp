#include "doctest.h"
#include "fedleak/tokenizer.hpp"

using namespace fedleak;

TEST_CASE("tokenizer round-trips printable ascii") {
  CharTokenizer tok;
  CHECK(tok.vocab_size() == 96);
  CHECK(tok.stop_id() == 95);

  std::string all;
  for (char c = 0x20; c <= 0x7e; ++c) all += c;
  auto ids = tok.encode(all);
  REQUIRE(ids.size() == all.size());
  for (size_t i = 0; i < ids.size(); ++i) CHECK(ids[i] == static_cast<int>(all[i]) - 0x20);
  CHECK(tok.decode(ids) == all);
}

TEST_CASE("tokenizer fixed mappings") {
  CharTokenizer tok;
  CHECK(tok.encode(" ") == std::vector<int>{0});
  CHECK(tok.encode("~") == std::vector<int>{94});
  CHECK(tok.encode("0") == std::vector<int>{16});
  CHECK(tok.encode("A") == std::vector<int>{33});
}

TEST_CASE("tokenizer rejects out-of-alphabet bytes") {
  CharTokenizer tok;
  CHECK_FALSE(tok.encodable('\n'));
  CHECK_FALSE(tok.encodable('\t'));
  CHECK(tok.encodable(' '));
  CHECK_THROWS_AS(tok.encode("a\nb"), Error);
  CHECK_THROWS_AS(tok.encode(std::string(1, '\x7f')), Error);
  CHECK_THROWS_AS(tok.decode({96}), Error);
  CHECK_THROWS_AS(tok.decode({-1}), Error);
}

TEST_CASE("decode skips stop tokens") {
  CharTokenizer tok;
  CHECK(tok.decode({33, 95, 34, 95}) == "AB");
  CHECK(tok.decode({95}) == "");
  CHECK(tok.decode({}) == "");
}
