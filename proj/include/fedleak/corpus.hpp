#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fedleak/common.hpp"

namespace fedleak::corpus {

struct Corpus {
  std::vector<std::string> lines;
};

// Reads UTF-8 text, one line per sequence: strips trailing whitespace and CR,
// maps tabs to spaces, replaces bytes outside the tokenizer alphabet with '?',
// drops empty lines. Errors on unreadable files or invalid UTF-8.
Corpus ingest(const std::string& path);

// Seeded template-grammar sentences without digits (secrets are the only
// digit-bearing text in the lab). Lines are unique and at most max_len chars.
Corpus generate_regular(size_t n_lines, uint64_t seed, size_t max_len = 62);

enum class CanaryCategory { phone, credit_card, email, address };

const char* category_name(CanaryCategory c);
CanaryCategory category_from_string(const std::string& s);

struct CanaryConfig {
  int n_canaries = 20;
  int space_size = 4096;  // truncated randomness space |R| per canary
  uint64_t seed = 1;
  size_t max_text_len = 62;
};

struct CanaryRecord {
  int id = 0;
  CanaryCategory category = CanaryCategory::phone;
  std::string prefix;        // template text ending right before the secret
  std::string secret;
  int space_size = 0;
  int true_index = 0;        // secret == candidate_secret(*this, true_index)
  std::vector<std::string> fixed;  // per-category fixed fields
  int client_id = -1;        // assigned victim, -1 before insertion
  int reps = 0;

  std::string full_text() const { return prefix + secret; }
};

struct CanarySet {
  std::vector<CanaryRecord> records;
};

// Unique secrets per category come from sampling enumeration indices without
// replacement; capacity error when a category needs more than space_size.
CanarySet generate_canaries(const CanaryConfig& cfg);

// The candidate secret for enumeration index i in the canary's space;
// candidate_secret(r, r.true_index) == r.secret.
std::string candidate_secret(const CanaryRecord& r, int index);

// Near-equal shards; the first (total % n_clients) clients get one extra line.
std::vector<Corpus> partition_clients(const Corpus& all, int n_clients, uint64_t seed);

// Round-robin canaries over victims (ordered by client id); inserts reps
// copies of each full text at seeded random positions of the victim shard.
void insert_canaries(std::vector<Corpus>& client_corpora, CanarySet& canaries,
                     const std::vector<int>& victim_ids, int reps, uint64_t seed);

// Fresh canaries matching the generation templates but disjoint secrets;
// used for reference corpora and membership-inference non-members.
CanarySet generate_disjoint_canaries(const CanaryConfig& cfg, const CanarySet& avoid);

std::vector<std::string> canary_texts(const CanarySet& set);

}  // namespace fedleak::corpus
