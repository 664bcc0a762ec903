#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "hpm/prompt/pattern.hpp"
#include "hpm/prompt/vocabulary.hpp"

namespace hpm {

struct Span {
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  std::size_t size() const { return end - begin; }
  bool operator==(const Span&) const = default;
};

// A pattern instantiated for one sample: the token sequence plus maps from
// pattern slots to sequence positions.
struct HybridInput {
  std::vector<TokenId> token_ids;
  std::size_t n = 0;
  // (MaskSlot index, position), ordered by mask index.
  std::vector<std::pair<int, std::size_t>> mask_positions;
  std::vector<std::size_t> pseudo_positions;
  std::vector<std::size_t> visual_positions;
  Span text_span;
  std::optional<Span> aspect_span;

  std::vector<std::size_t> mask_position_list() const;
};

// Emits the token sequence for `pattern`. SoftRun tokens take consecutive
// reserved pseudo ids (one distinct id per soft position); {vision} emits
// `n_visual` reserved visual placeholder ids.
HybridInput compile_input(const PromptPattern& pattern, const Vocabulary& vocab,
                          const std::vector<std::string>& text_tokens,
                          const std::optional<std::vector<std::string>>& aspect_tokens,
                          std::size_t n_visual, std::size_t max_len);

}  // namespace hpm
