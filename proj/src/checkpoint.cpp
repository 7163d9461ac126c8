#include "fedleak/checkpoint.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace fedleak {

namespace fs = std::filesystem;

static_assert(sizeof(float) == 4, "float32 container assumes 4-byte float");

namespace {

constexpr char kMagic[5] = {'F', 'L', 'T', 'W', '1'};

std::vector<int64_t> parse_dims(const std::string& s) {
  std::vector<int64_t> dims;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, 'x')) {
    require(!part.empty() && part.find_first_not_of("0123456789") == std::string::npos,
            ErrorKind::io, "bad tensor dims in manifest: " + s);
    dims.push_back(std::stoll(part));
  }
  require(!dims.empty(), ErrorKind::io, "empty tensor dims in manifest");
  return dims;
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> v;
  if (s.empty() || s == "-") return v;
  std::stringstream ss(s);
  std::string part;
  while (std::getline(ss, part, ',')) v.push_back(std::stoi(part));
  return v;
}

void atomic_write(const std::string& path, const std::string& content) {
  std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::io, "cannot open for write: " + tmp);
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    require(out.good(), ErrorKind::io, "write failed: " + tmp);
  }
  fs::rename(tmp, path);
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelWeights& weights, const Flags& flags) {
  require(weights.finite(), ErrorKind::io, "refusing to save non-finite weights");
  std::string manifest;
  uint64_t offset = 0;
  for (const auto& [name, t] : weights.items()) {
    manifest += "tensor " + name + " " + t.shape_str() + " " + std::to_string(offset) + "\n";
    offset += t.numel() * sizeof(float);
  }
  for (const auto& [k, v] : flags) manifest += "flag " + k + " " + v + "\n";

  std::string blob;
  blob.reserve(5 + 4 + manifest.size() + offset);
  blob.append(kMagic, 5);
  uint32_t mlen = static_cast<uint32_t>(manifest.size());
  unsigned char lenb[4] = {static_cast<unsigned char>(mlen & 0xff),
                           static_cast<unsigned char>((mlen >> 8) & 0xff),
                           static_cast<unsigned char>((mlen >> 16) & 0xff),
                           static_cast<unsigned char>((mlen >> 24) & 0xff)};
  blob.append(reinterpret_cast<char*>(lenb), 4);
  blob += manifest;
  for (const auto& [name, t] : weights.items()) {
    size_t pos = blob.size();
    blob.resize(pos + t.numel() * sizeof(float));
    std::memcpy(blob.data() + pos, t.data.data(), t.numel() * sizeof(float));
  }
  atomic_write(path, blob);
}

ModelWeights load_checkpoint(const std::string& path, Flags* flags_out) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::io, "cannot open checkpoint: " + path);
  std::string blob((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require(blob.size() >= 9 && std::memcmp(blob.data(), kMagic, 5) == 0, ErrorKind::io,
          "bad checkpoint magic: " + path);
  const unsigned char* lenb = reinterpret_cast<const unsigned char*>(blob.data() + 5);
  uint32_t mlen = static_cast<uint32_t>(lenb[0]) | (static_cast<uint32_t>(lenb[1]) << 8) |
                  (static_cast<uint32_t>(lenb[2]) << 16) | (static_cast<uint32_t>(lenb[3]) << 24);
  require(blob.size() >= 9 + static_cast<size_t>(mlen), ErrorKind::io,
          "truncated checkpoint manifest: " + path);
  std::string manifest = blob.substr(9, mlen);
  const char* data = blob.data() + 9 + mlen;
  size_t data_len = blob.size() - 9 - mlen;

  ModelWeights out;
  Flags flags;
  std::stringstream ss(manifest);
  std::string line;
  while (std::getline(ss, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "tensor") {
      std::string name, dims_s, off_s;
      ls >> name >> dims_s >> off_s;
      require(!name.empty() && !dims_s.empty() && !off_s.empty(), ErrorKind::io,
              "bad tensor line: " + line);
      Tensor t(parse_dims(dims_s));
      uint64_t off = std::stoull(off_s);
      require(off + t.numel() * sizeof(float) <= data_len, ErrorKind::io,
              "tensor data out of range: " + name);
      std::memcpy(t.data.data(), data + off, t.numel() * sizeof(float));
      out.add(name, std::move(t));
    } else if (kind == "flag") {
      std::string k;
      ls >> k;
      std::string v;
      std::getline(ls, v);
      if (!v.empty() && v[0] == ' ') v.erase(0, 1);
      flags.emplace_back(k, v);
    } else {
      fail(ErrorKind::io, "unknown manifest entry '" + kind + "' in " + path);
    }
  }
  require(out.size() > 0, ErrorKind::io, "checkpoint holds no tensors: " + path);
  require(out.finite(), ErrorKind::io, "checkpoint holds non-finite values: " + path);
  if (flags_out) *flags_out = std::move(flags);
  return out;
}

SnapshotStore SnapshotStore::create(const std::string& dir, uint64_t config_hash,
                                    int total_rounds, bool oracle, const std::string& baseline) {
  fs::create_directories(dir);
  SnapshotStore s;
  s.dir_ = dir;
  s.config_hash_ = config_hash;
  s.total_rounds_ = total_rounds;
  s.oracle_ = oracle;
  s.baseline_ = baseline;
  s.write_manifest();
  return s;
}

bool SnapshotStore::exists(const std::string& dir) {
  return fs::exists(fs::path(dir) / "store.manifest");
}

SnapshotStore SnapshotStore::open(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "store.manifest");
  require(in.good(), ErrorKind::io, "cannot open store manifest in " + dir);
  SnapshotStore s;
  s.dir_ = dir;
  std::string line;
  bool header = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string kind;
    ls >> kind;
    if (kind == "store") {
      header = true;
    } else if (kind == "config_hash") {
      std::string h;
      ls >> h;
      s.config_hash_ = std::stoull(h, nullptr, 16);
    } else if (kind == "total_rounds") {
      ls >> s.total_rounds_;
    } else if (kind == "oracle") {
      int v;
      ls >> v;
      s.oracle_ = v != 0;
    } else if (kind == "baseline") {
      ls >> s.baseline_;
    } else if (kind == "snapshot") {
      SnapshotMeta m;
      std::string parts, victims;
      ls >> m.round >> m.kind >> m.file >> parts >> victims >> m.victim_present;
      m.participants = split_ints(parts);
      m.victims = split_ints(victims);
      require(fs::exists(fs::path(dir) / m.file), ErrorKind::io,
              "manifest references missing file: " + m.file);
      s.metas_.push_back(std::move(m));
    } else {
      fail(ErrorKind::io, "unknown store manifest entry: " + kind);
    }
  }
  require(header, ErrorKind::io, "store manifest missing header: " + dir);
  return s;
}

void SnapshotStore::write_manifest() const {
  std::string m = "store 1\n";
  m += "config_hash " + hex64(config_hash_) + "\n";
  m += "total_rounds " + std::to_string(total_rounds_) + "\n";
  m += "oracle " + std::to_string(oracle_ ? 1 : 0) + "\n";
  m += "baseline " + baseline_ + "\n";
  for (const auto& s : metas_) {
    m += "snapshot " + std::to_string(s.round) + " " + s.kind + " " + s.file + " " +
         (s.participants.empty() ? "-" : join_ints(s.participants)) + " " +
         (s.victims.empty() ? "-" : join_ints(s.victims)) + " " +
         std::to_string(s.victim_present ? 1 : 0) + "\n";
  }
  atomic_write((fs::path(dir_) / "store.manifest").string(), m);
}

void SnapshotStore::append(const SnapshotMeta& meta, const ModelWeights& weights) {
  require(meta.kind == "global" || meta.kind == "victim_local", ErrorKind::invalid_input,
          "unknown snapshot kind: " + meta.kind);
  require(!oracle_ ? meta.kind != "victim_local" : true, ErrorKind::invalid_input,
          "victim_local snapshots require oracle mode");
  require(!has(meta.round, meta.kind), ErrorKind::invalid_input,
          "duplicate snapshot round " + std::to_string(meta.round) + " " + meta.kind);
  SnapshotMeta m = meta;
  m.file = "round_" + std::to_string(m.round) + "_" + m.kind + ".fltw";
  save_checkpoint((fs::path(dir_) / m.file).string(), weights,
                  {{"round", std::to_string(m.round)}, {"kind", m.kind}});
  metas_.push_back(m);
  write_manifest();
}

bool SnapshotStore::has(int round, const std::string& kind) const {
  for (const auto& m : metas_)
    if (m.round == round && m.kind == kind) return true;
  return false;
}

ModelWeights SnapshotStore::load(int round, const std::string& kind) const {
  for (const auto& m : metas_)
    if (m.round == round && m.kind == kind)
      return load_checkpoint((fs::path(dir_) / m.file).string());
  fail(ErrorKind::io, "no snapshot round " + std::to_string(round) + " kind " + kind);
}

std::vector<SnapshotMeta> SnapshotStore::globals() const {
  std::vector<SnapshotMeta> out;
  for (const auto& m : metas_)
    if (m.kind == "global") out.push_back(m);
  std::sort(out.begin(), out.end(),
            [](const SnapshotMeta& a, const SnapshotMeta& b) { return a.round < b.round; });
  return out;
}

int SnapshotStore::contiguous_rounds() const {
  int r = 0;
  while (has(r, "global")) ++r;
  return r;
}

}  // namespace fedleak
