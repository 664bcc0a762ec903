#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace hpm {

using TokenId = std::size_t;

// Lowercased whitespace tokenization.
std::vector<std::string> tokenize(std::string_view text);

// Closed word-level vocabulary. Layout:
//   0 [PAD], 1 [UNK], 2 [CLS], 3 [SEP], 4 [MASK],
//   then `pseudo_slots` reserved pseudo-token ids [P0]..,
//   then `visual_slots` reserved visual placeholders [V0]..,
//   then ordinary words in insertion order.
class Vocabulary {
 public:
  static constexpr TokenId kPad = 0;
  static constexpr TokenId kUnk = 1;
  static constexpr TokenId kCls = 2;
  static constexpr TokenId kSep = 3;
  static constexpr TokenId kMask = 4;

  explicit Vocabulary(std::size_t pseudo_slots = 16, std::size_t visual_slots = 5);

  // Rebuilds a vocabulary from its full token list (as stored in a manifest).
  static Vocabulary from_tokens(const std::vector<std::string>& tokens, std::size_t pseudo_slots,
                                std::size_t visual_slots);

  TokenId add(const std::string& word);
  void add_all(const std::vector<std::string>& words);

  bool contains(const std::string& word) const;
  // Unknown words map to kUnk.
  TokenId id(const std::string& word) const;
  const std::string& token(TokenId id) const;

  std::size_t size() const { return tokens_.size(); }
  std::size_t pseudo_slots() const { return pseudo_slots_; }
  std::size_t visual_slots() const { return visual_slots_; }
  TokenId pseudo_id(std::size_t k) const;
  TokenId visual_id(std::size_t k) const;
  bool is_pseudo(TokenId id) const;
  bool is_visual(TokenId id) const;

  const std::vector<std::string>& tokens() const { return tokens_; }

 private:
  std::size_t pseudo_slots_;
  std::size_t visual_slots_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

}  // namespace hpm
