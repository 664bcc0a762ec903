#include "hpm/prompt/vocabulary.hpp"

#include <cctype>

#include "hpm/errors.hpp"

namespace hpm {

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

Vocabulary::Vocabulary(std::size_t pseudo_slots, std::size_t visual_slots)
    : pseudo_slots_(pseudo_slots), visual_slots_(visual_slots) {
  for (const char* s : {"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"}) add(s);
  for (std::size_t k = 0; k < pseudo_slots; ++k) add("[P" + std::to_string(k) + "]");
  for (std::size_t k = 0; k < visual_slots; ++k) add("[V" + std::to_string(k) + "]");
}

Vocabulary Vocabulary::from_tokens(const std::vector<std::string>& tokens,
                                   std::size_t pseudo_slots, std::size_t visual_slots) {
  Vocabulary v(pseudo_slots, visual_slots);
  const std::size_t reserved = v.size();
  if (tokens.size() < reserved) throw ContractError("vocabulary list shorter than reserved block");
  for (std::size_t i = 0; i < reserved; ++i) {
    if (tokens[i] != v.tokens_[i]) {
      throw ContractError("vocabulary reserved token mismatch at " + std::to_string(i));
    }
  }
  for (std::size_t i = reserved; i < tokens.size(); ++i) {
    if (v.add(tokens[i]) != i) throw ContractError("duplicate vocabulary entry " + tokens[i]);
  }
  return v;
}

TokenId Vocabulary::add(const std::string& word) {
  auto [it, inserted] = index_.emplace(word, tokens_.size());
  if (inserted) tokens_.push_back(word);
  return it->second;
}

void Vocabulary::add_all(const std::vector<std::string>& words) {
  for (const auto& w : words) add(w);
}

bool Vocabulary::contains(const std::string& word) const { return index_.count(word) > 0; }

TokenId Vocabulary::id(const std::string& word) const {
  auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= tokens_.size()) throw ContractError("token id out of range");
  return tokens_[id];
}

TokenId Vocabulary::pseudo_id(std::size_t k) const {
  if (k >= pseudo_slots_) {
    throw ContractError("pattern needs more than " + std::to_string(pseudo_slots_) +
                        " pseudo-token ids");
  }
  return 5 + k;
}

TokenId Vocabulary::visual_id(std::size_t k) const {
  if (k >= visual_slots_) {
    throw ContractError("more than " + std::to_string(visual_slots_) + " visual tokens requested");
  }
  return 5 + pseudo_slots_ + k;
}

bool Vocabulary::is_pseudo(TokenId id) const { return id >= 5 && id < 5 + pseudo_slots_; }

bool Vocabulary::is_visual(TokenId id) const {
  return id >= 5 + pseudo_slots_ && id < 5 + pseudo_slots_ + visual_slots_;
}

}  // namespace hpm
