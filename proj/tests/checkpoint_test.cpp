#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "fedleak/checkpoint.hpp"

using namespace fedleak;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* tag) {
  auto p = fs::temp_directory_path() / (std::string("fedleak_test_") + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ModelWeights random_weights(uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> dist(0.0f, 1.0f);
  ModelWeights w;
  Tensor a({3, 4});
  for (auto& v : a.data) v = dist(rng);
  Tensor b({5});
  for (auto& v : b.data) v = dist(rng);
  w.add("layer.a", std::move(a));
  w.add("layer.b", std::move(b));
  return w;
}

}  // namespace

TEST_CASE("checkpoint round-trip is bit-exact") {
  auto dir = temp_dir("ckpt_rt");
  auto w = random_weights(7);
  w.at("layer.a").data[0] = -0.0f;  // signed zero must survive
  auto path = (dir / "w.fltw").string();
  save_checkpoint(path, w, {{"config_hash", "abc"}, {"note", "x y"}});

  Flags flags;
  auto r = load_checkpoint(path, &flags);
  REQUIRE(r.same_layout(w));
  for (const auto& [name, t] : w.items()) {
    const auto& rt = r.at(name).data;
    for (size_t i = 0; i < t.data.size(); ++i) {
      // compare representations, not values, to catch -0.0 vs 0.0
      uint32_t want, got;
      std::memcpy(&want, &t.data[i], 4);
      std::memcpy(&got, &rt[i], 4);
      CHECK(want == got);
    }
  }
  REQUIRE(flags.size() == 2);
  CHECK(flags[0].first == "config_hash");
  CHECK(flags[0].second == "abc");
  CHECK(flags[1].second == "x y");

  // a second save of identical content writes identical bytes
  auto path2 = (dir / "w2.fltw").string();
  save_checkpoint(path2, w, {{"config_hash", "abc"}, {"note", "x y"}});
  std::ifstream f1(path, std::ios::binary), f2(path2, std::ios::binary);
  std::string b1((std::istreambuf_iterator<char>(f1)), {});
  std::string b2((std::istreambuf_iterator<char>(f2)), {});
  CHECK(b1 == b2);
  fs::remove_all(dir);
}

TEST_CASE("checkpoint rejects corruption") {
  auto dir = temp_dir("ckpt_bad");
  auto w = random_weights(9);
  auto path = (dir / "w.fltw").string();
  save_checkpoint(path, w);

  auto corrupt = [&](size_t offset, char c, const char* tag) {
    auto p = (dir / (std::string("bad_") + tag + ".fltw")).string();
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    bytes[offset] = c;
    std::ofstream out(p, std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.close();
    CHECK_THROWS_AS(load_checkpoint(p), Error);
  };
  corrupt(0, 'X', "magic");

  // truncated payload
  {
    std::ifstream in(path, std::ios::binary);
    std::string bytes((std::istreambuf_iterator<char>(in)), {});
    std::ofstream out((dir / "trunc.fltw").string(), std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() - 8));
    out.close();
    CHECK_THROWS_AS(load_checkpoint((dir / "trunc.fltw").string()), Error);
  }
  CHECK_THROWS_AS(load_checkpoint((dir / "missing.fltw").string()), Error);
  fs::remove_all(dir);
}

TEST_CASE("snapshot store append, load, resume") {
  auto dir = temp_dir("store");
  auto sdir = (dir / "store").string();
  CHECK_FALSE(SnapshotStore::exists(sdir));
  auto store = SnapshotStore::create(sdir, 0x1234abcdULL, 5, true, "none");
  CHECK(SnapshotStore::exists(sdir));

  auto w0 = random_weights(0), w1 = random_weights(1), v1 = random_weights(2);
  SnapshotMeta m0{0, "global", "", {1, 2}, {}, false};
  SnapshotMeta m1{1, "global", "", {2, 7}, {7}, true};
  SnapshotMeta mv{1, "victim_local", "", {7}, {7}, true};
  store.append(m0, w0);
  store.append(m1, w1);
  store.append(mv, v1);

  CHECK(store.contiguous_rounds() == 2);
  CHECK(store.has(1, "victim_local"));
  CHECK_FALSE(store.has(2, "global"));
  CHECK(store.globals().size() == 2);
  CHECK(store.globals()[1].victims == std::vector<int>{7});
  CHECK(store.globals()[1].victim_present);

  auto re = SnapshotStore::open(sdir);
  CHECK(re.config_hash() == 0x1234abcdULL);
  CHECK(re.total_rounds() == 5);
  CHECK(re.oracle());
  CHECK(re.baseline() == "none");
  REQUIRE(re.snapshots().size() == 3);
  CHECK(re.snapshots()[1].participants == std::vector<int>{2, 7});
  auto lw = re.load(1, "global");
  CHECK(lw.at("layer.a").data == w1.at("layer.a").data);
  CHECK_THROWS_AS(re.load(3, "global"), Error);
  CHECK_THROWS_AS(re.append(m0, w0), Error);  // duplicate round+kind

  // gap in rounds stops the contiguous count
  SnapshotMeta m3{3, "global", "", {1}, {}, false};
  re.append(m3, w0);
  CHECK(re.contiguous_rounds() == 2);

  CHECK_THROWS_AS(SnapshotStore::open((dir / "nope").string()), Error);
  fs::remove_all(dir);
}
