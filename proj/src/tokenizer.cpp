#include "fedleak/tokenizer.hpp"

namespace fedleak {

std::vector<int> CharTokenizer::encode(const std::string& text) const {
  std::vector<int> ids;
  ids.reserve(text.size());
  for (char c : text) {
    require(encodable(c), ErrorKind::invalid_input,
            "untokenizable byte " + std::to_string(static_cast<unsigned char>(c)));
    ids.push_back(c - 0x20);
  }
  return ids;
}

std::string CharTokenizer::decode(const std::vector<int>& ids) const {
  std::string s;
  s.reserve(ids.size());
  for (int id : ids) {
    require(id >= 0 && id < kVocab, ErrorKind::invalid_input, "token id out of range");
    if (id == kStop) continue;
    s += static_cast<char>(id + 0x20);
  }
  return s;
}

}  // namespace fedleak
