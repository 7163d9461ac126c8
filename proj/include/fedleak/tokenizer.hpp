#pragma once

#include <string>
#include <vector>

#include "fedleak/common.hpp"

namespace fedleak {

// Char-level tokenizer over printable ASCII 0x20..0x7e plus one stop token.
class CharTokenizer {
 public:
  static constexpr int kVocab = 96;
  static constexpr int kStop = 95;

  int vocab_size() const { return kVocab; }
  int stop_id() const { return kStop; }

  bool encodable(char c) const { return c >= 0x20 && c <= 0x7e; }

  // Errors on bytes outside the alphabet.
  std::vector<int> encode(const std::string& text) const;
  // Inverse of encode; stop tokens are skipped.
  std::string decode(const std::vector<int>& ids) const;
};

}  // namespace fedleak
