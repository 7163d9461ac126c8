#include "fedleak/corpus.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <unordered_set>

namespace fedleak::corpus {

namespace {

const std::vector<std::string> kSubjects = {
    "the analyst", "the gardener", "our neighbor", "the archivist", "a young clerk",
    "the innkeeper", "two plumbers", "the sailors", "a shy painter", "the teachers",
    "the curator", "an old friend", "the brewers", "a tall dancer", "the rangers",
    "the florist"};

const std::vector<std::string> kVerbs = {
    "described", "repainted", "organized", "inspected", "borrowed", "sketched",
    "repaired", "measured", "polished", "bundled", "weighed", "labeled",
    "counted", "stacked", "traded", "admired"};

const std::vector<std::string> kObjects = {
    "the old ledger", "a wooden bench", "the brass lamp", "the city maps", "a velvet chair",
    "the iron gate", "three red kites", "the tin roof", "a chipped mug", "the long fence",
    "the glass case", "a linen banner", "the stone well", "the oak shelf", "a copper kettle",
    "the rope bridge"};

const std::vector<std::string> kTails = {
    "after lunch", "before the storm", "near the harbor", "during the fair",
    "on a rainy morning", "behind the mill", "without any help", "in early spring",
    "beside the canal", "for the festival", "under the awning", "at closing time",
    "against the wind", "while it snowed", "by candlelight", "after the parade"};

const std::vector<std::string> kNamePrefixes = {
    "an", "bel", "cor", "dan", "el", "fan", "gal", "han", "ir", "jas", "kel",
    "lor", "mar", "nel", "or", "pam", "quin", "ros", "sam", "tam", "ul", "vic",
    "wen", "xen", "yar", "zan", "bri", "cla", "dre", "fel", "gre", "hol"};

const std::vector<std::string> kNameSuffixes = {
    "a", "o", "ia", "en", "ino", "ara", "ett", "is", "ora", "ius", "el", "ina",
    "on", "ey", "ur", "ine", "as", "ot", "um", "ib", "ile", "ade", "ern", "os",
    "ika", "ude", "ale", "ith", "oy", "ese", "ant", "ule"};

const std::vector<std::string> kStreetBases = {
    "Maple", "Cedar", "Oak", "Birch", "Walnut", "Chestnut", "Willow", "Aspen",
    "Elm", "Spruce", "Juniper", "Magnolia", "Dogwood", "Sycamore", "Poplar", "Hickory",
    "Laurel", "Alder", "Hawthorn", "Linden", "Rowan", "Hazel", "Cypress", "Redwood",
    "Sequoia", "Cottonwood", "Mulberry", "Pecan", "Olive", "Palmetto", "Tamarack", "Beech"};

const std::vector<std::string> kStreetSuffixes = {"St", "Ave", "Rd", "Ln", "Blvd", "Ct", "Way", "Dr"};

const std::vector<std::string> kStates = {
    "AL", "AK", "AZ", "AR", "CA", "CO", "CT", "DE", "FL", "GA", "HI", "ID", "IL",
    "IN", "IA", "KS", "KY", "LA", "ME", "MD", "MA", "MI", "MN", "MS", "MO", "MT",
    "NE", "NV", "NH", "NJ", "NM", "NY", "NC", "ND", "OH", "OK", "OR", "PA", "RI",
    "SC", "SD", "TN", "TX", "UT", "VT", "VA", "WA", "WV", "WI", "WY"};

const std::vector<std::string> kDomains = {
    "orbitmail.net", "crestview.edu", "lakeshore.org", "bluepine.com",
    "stonegate.io", "fernhill.net", "midtown.org", "harborview.edu"};

const std::vector<std::string> kPhonePrefixes = {
    "Call the office line at ", "My direct work number is ", "Reach our support desk at ",
    "The after hours line is ", "Text the courier at ", "Dial the front desk at "};

const std::vector<std::string> kCardPrefixes = {
    "Card on file: ", "Billing card number ", "Use corporate card ",
    "Charge it to card ", "Saved payment card ", "Refund goes to card "};

const std::vector<std::string> kEmailPrefixes = {
    "Send the minutes to ", "Forward the invoice to ", "Email the draft to ",
    "CC the manager at ", "Write to me at ", "Reply directly to "};

const std::vector<std::string> kAddressPrefixes = {
    "Ship the parcel to ", "Deliver the box to ", "Mail the forms to ",
    "The new office is at ", "Invoices go to ", "My mailing address is "};

std::string street_name(int idx) {
  return kStreetBases[idx / 8] + " " + kStreetSuffixes[idx % 8];
}

std::string synth_name(int idx) { return kNamePrefixes[idx / 32] + kNameSuffixes[idx % 32]; }

std::string pad_int(int v, int width) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%0*d", width, v);
  return buf;
}

bool valid_utf8(const std::string& s) {
  size_t i = 0;
  while (i < s.size()) {
    unsigned char c = s[i];
    size_t extra = c < 0x80 ? 0 : (c >> 5) == 0x6 ? 1 : (c >> 4) == 0xe ? 2 : (c >> 3) == 0x1e ? 3 : 4;
    if (extra == 4) return false;
    if (i + extra >= s.size() && extra > 0) return false;
    for (size_t j = 1; j <= extra; ++j)
      if ((static_cast<unsigned char>(s[i + j]) >> 6) != 0x2) return false;
    i += extra + 1;
  }
  return true;
}

}  // namespace

const char* category_name(CanaryCategory c) {
  switch (c) {
    case CanaryCategory::phone: return "phone";
    case CanaryCategory::credit_card: return "credit_card";
    case CanaryCategory::email: return "email";
    case CanaryCategory::address: return "address";
  }
  return "?";
}

CanaryCategory category_from_string(const std::string& s) {
  if (s == "phone") return CanaryCategory::phone;
  if (s == "credit_card") return CanaryCategory::credit_card;
  if (s == "email") return CanaryCategory::email;
  if (s == "address") return CanaryCategory::address;
  fail(ErrorKind::configuration, "unknown canary category: " + s);
}

Corpus ingest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::ingestion, "cannot read corpus file: " + path);
  std::string raw((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  require(valid_utf8(raw), ErrorKind::ingestion, "corpus file is not valid UTF-8: " + path);

  Corpus out;
  std::string line;
  auto flush = [&] {
    while (!line.empty() && (line.back() == ' ' || line.back() == '\t' || line.back() == '\r'))
      line.pop_back();
    if (!line.empty()) out.lines.push_back(line);
    line.clear();
  };
  for (size_t i = 0; i < raw.size(); ++i) {
    unsigned char c = raw[i];
    if (c == '\n') {
      flush();
    } else if (c == '\t') {
      line += ' ';
    } else if (c == '\r') {
      // handled by trailing strip
      line += '\r';
    } else if (c >= 0x20 && c <= 0x7e) {
      line += static_cast<char>(c);
    } else if (c >= 0x80) {
      // non-ASCII codepoint: emit one placeholder for the lead byte only
      line += '?';
      while (i + 1 < raw.size() && (static_cast<unsigned char>(raw[i + 1]) >> 6) == 0x2) ++i;
    }
    // other control bytes are dropped
  }
  flush();
  require(!out.lines.empty(), ErrorKind::ingestion, "corpus file has no usable lines: " + path);
  return out;
}

Corpus generate_regular(size_t n_lines, uint64_t seed, size_t max_len) {
  size_t space = kSubjects.size() * kVerbs.size() * kObjects.size() * kTails.size();
  require(n_lines <= space / 2, ErrorKind::capacity, "requested more regular lines than available");
  auto rng = make_rng(derive_seed(seed, "textgen"));
  std::unordered_set<std::string> seen;
  Corpus out;
  out.lines.reserve(n_lines);
  while (out.lines.size() < n_lines) {
    std::string s = kSubjects[rng() % kSubjects.size()] + " " + kVerbs[rng() % kVerbs.size()] +
                    " " + kObjects[rng() % kObjects.size()] + " " + kTails[rng() % kTails.size()] +
                    ".";
    require(s.size() <= max_len, ErrorKind::capacity, "generated line exceeds max_len");
    if (seen.insert(s).second) out.lines.push_back(std::move(s));
  }
  return out;
}

namespace {

int space_cap(CanaryCategory cat) {
  switch (cat) {
    case CanaryCategory::phone:
    case CanaryCategory::credit_card:
      return 10000;
    case CanaryCategory::email:
      return static_cast<int>(kNamePrefixes.size() * kNameSuffixes.size()) * 100;
    case CanaryCategory::address:
      return 999 * static_cast<int>(kStreetBases.size() * kStreetSuffixes.size());
  }
  return 0;
}

CanarySet generate_canaries_impl(const CanaryConfig& cfg,
                                 const std::unordered_set<std::string>& forbidden,
                                 uint64_t salt) {
  require(cfg.n_canaries >= 1, ErrorKind::invalid_input, "n_canaries must be >= 1");
  require(cfg.space_size >= 2, ErrorKind::invalid_input, "space_size must be >= 2");
  for (CanaryCategory cat : {CanaryCategory::phone, CanaryCategory::credit_card,
                             CanaryCategory::email, CanaryCategory::address})
    require(cfg.space_size <= space_cap(cat), ErrorKind::invalid_input,
            "space_size exceeds enumerable candidates for " + std::string(category_name(cat)));

  int per_cat[4] = {0, 0, 0, 0};
  for (int i = 0; i < cfg.n_canaries; ++i) per_cat[i % 4]++;
  for (int c = 0; c < 4; ++c)
    require(per_cat[c] <= cfg.space_size, ErrorKind::capacity,
            "more canaries requested than the randomness space can keep unique");

  std::unordered_set<int> used_idx[4];
  CanarySet set;
  for (int i = 0; i < cfg.n_canaries; ++i) {
    CanaryRecord r;
    r.id = i;
    r.category = static_cast<CanaryCategory>(i % 4);
    r.space_size = cfg.space_size;
    auto rng = make_rng(derive_seed(cfg.seed ^ salt, "canary", static_cast<uint64_t>(i)));
    switch (r.category) {
      case CanaryCategory::phone:
        r.prefix = kPhonePrefixes[rng() % kPhonePrefixes.size()];
        r.fixed = {pad_int(200 + static_cast<int>(rng() % 800), 3),
                   pad_int(200 + static_cast<int>(rng() % 800), 3)};
        break;
      case CanaryCategory::credit_card:
        r.prefix = kCardPrefixes[rng() % kCardPrefixes.size()];
        r.fixed = {pad_int(1000 + static_cast<int>(rng() % 9000), 4),
                   pad_int(1000 + static_cast<int>(rng() % 9000), 4),
                   pad_int(1000 + static_cast<int>(rng() % 9000), 4)};
        break;
      case CanaryCategory::email:
        r.prefix = kEmailPrefixes[rng() % kEmailPrefixes.size()];
        r.fixed = {kDomains[rng() % kDomains.size()]};
        break;
      case CanaryCategory::address:
        r.prefix = kAddressPrefixes[rng() % kAddressPrefixes.size()];
        r.fixed = {kStates[rng() % kStates.size()],
                   pad_int(10000 + static_cast<int>(rng() % 90000), 5)};
        break;
    }
    int cat = static_cast<int>(r.category);
    int idx = static_cast<int>(rng() % static_cast<uint64_t>(cfg.space_size));
    int attempts = 0;
    while (used_idx[cat].count(idx) || forbidden.count(candidate_secret(r, idx)) > 0) {
      idx = (idx + 1) % cfg.space_size;
      require(++attempts <= cfg.space_size, ErrorKind::capacity,
              "randomness space exhausted while placing canaries");
    }
    used_idx[cat].insert(idx);
    r.true_index = idx;
    r.secret = candidate_secret(r, idx);
    require(r.full_text().size() <= cfg.max_text_len, ErrorKind::invalid_input,
            "canary text exceeds max_text_len");
    set.records.push_back(std::move(r));
  }
  return set;
}

}  // namespace

CanarySet generate_canaries(const CanaryConfig& cfg) {
  return generate_canaries_impl(cfg, {}, 0);
}

CanarySet generate_disjoint_canaries(const CanaryConfig& cfg, const CanarySet& avoid) {
  std::unordered_set<std::string> forbidden;
  for (const auto& r : avoid.records) forbidden.insert(r.secret);
  return generate_canaries_impl(cfg, forbidden, 0x5eedu);
}

std::string candidate_secret(const CanaryRecord& r, int index) {
  require(index >= 0 && index < r.space_size, ErrorKind::invalid_input,
          "candidate index out of range");
  switch (r.category) {
    case CanaryCategory::phone:
      return r.fixed[0] + "-" + r.fixed[1] + "-" + pad_int(index, 4);
    case CanaryCategory::credit_card:
      return r.fixed[0] + "-" + r.fixed[1] + "-" + r.fixed[2] + "-" + pad_int(index, 4);
    case CanaryCategory::email: {
      int names = static_cast<int>(kNamePrefixes.size() * kNameSuffixes.size());
      return synth_name(index % names) + pad_int(index / names, 2) + "@" + r.fixed[0];
    }
    case CanaryCategory::address: {
      int streets = static_cast<int>(kStreetBases.size() * kStreetSuffixes.size());
      return std::to_string(1 + index % 999) + " " + street_name((index / 999) % streets) + ", " +
             r.fixed[0] + " " + r.fixed[1];
    }
  }
  fail(ErrorKind::invalid_input, "bad canary category");
}

std::vector<Corpus> partition_clients(const Corpus& all, int n_clients, uint64_t seed) {
  require(n_clients >= 1, ErrorKind::invalid_input, "n_clients must be >= 1");
  require(all.lines.size() >= static_cast<size_t>(n_clients), ErrorKind::invalid_input,
          "fewer lines than clients");
  std::vector<size_t> order(all.lines.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  auto rng = make_rng(derive_seed(seed, "partition"));
  std::shuffle(order.begin(), order.end(), rng);

  size_t base = all.lines.size() / n_clients;
  size_t rem = all.lines.size() % n_clients;
  std::vector<Corpus> shards(n_clients);
  size_t pos = 0;
  for (int c = 0; c < n_clients; ++c) {
    size_t take = base + (static_cast<size_t>(c) < rem ? 1 : 0);
    for (size_t i = 0; i < take; ++i) shards[c].lines.push_back(all.lines[order[pos++]]);
  }
  return shards;
}

void insert_canaries(std::vector<Corpus>& client_corpora, CanarySet& canaries,
                     const std::vector<int>& victim_ids, int reps, uint64_t seed) {
  require(!victim_ids.empty(), ErrorKind::invalid_input, "no victims given");
  require(reps >= 0, ErrorKind::invalid_input, "reps must be >= 0");
  std::vector<int> victims = victim_ids;
  std::sort(victims.begin(), victims.end());
  for (int v : victims)
    require(v >= 0 && v < static_cast<int>(client_corpora.size()), ErrorKind::invalid_input,
            "victim id out of range");
  for (size_t j = 0; j < canaries.records.size(); ++j) {
    CanaryRecord& r = canaries.records[j];
    r.client_id = victims[j % victims.size()];
    r.reps = reps;
    auto rng = make_rng(derive_seed(seed, "insert", j));
    auto& lines = client_corpora[r.client_id].lines;
    for (int c = 0; c < reps; ++c) {
      size_t pos = rng() % (lines.size() + 1);
      lines.insert(lines.begin() + pos, r.full_text());
    }
  }
}

std::vector<std::string> canary_texts(const CanarySet& set) {
  std::vector<std::string> out;
  out.reserve(set.records.size());
  for (const auto& r : set.records) out.push_back(r.full_text());
  return out;
}

}  // namespace fedleak::corpus
