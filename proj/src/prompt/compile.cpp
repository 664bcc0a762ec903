#include "hpm/prompt/compile.hpp"

#include <algorithm>

#include "hpm/errors.hpp"

namespace hpm {

std::vector<std::size_t> HybridInput::mask_position_list() const {
  std::vector<std::size_t> out;
  out.reserve(mask_positions.size());
  for (const auto& [idx, pos] : mask_positions) out.push_back(pos);
  return out;
}

HybridInput compile_input(const PromptPattern& pattern, const Vocabulary& vocab,
                          const std::vector<std::string>& text_tokens,
                          const std::optional<std::vector<std::string>>& aspect_tokens,
                          std::size_t n_visual, std::size_t max_len) {
  const bool aspect_level = pattern.level == TaskLevel::Aspect;
  if (aspect_level && !aspect_tokens) {
    throw ContractError("aspect-level pattern requires aspect tokens");
  }
  if (!aspect_level && aspect_tokens) {
    throw ContractError("sentence-level pattern must not be given aspect tokens");
  }
  if (pattern.has_visual_slot() && n_visual == 0) {
    throw ContractError("pattern has a {vision} slot but n_visual is 0");
  }
  if (!pattern.has_visual_slot() && n_visual != 0) {
    throw ContractError("n_visual given for a pattern without a {vision} slot");
  }
  if (pattern.mask_count() == 0) throw ContractError("pattern has no [MASK] slot");

  HybridInput in;
  auto& ids = in.token_ids;
  std::size_t next_pseudo = 0;
  for (const auto& seg : pattern.segments) {
    if (auto* b = std::get_if<Boundary>(&seg)) {
      ids.push_back(b->kind == BoundaryKind::Cls ? Vocabulary::kCls : Vocabulary::kSep);
    } else if (auto* h = std::get_if<HardText>(&seg)) {
      for (const auto& t : h->tokens) ids.push_back(vocab.id(t));
    } else if (auto* r = std::get_if<SoftRun>(&seg)) {
      for (int k = 0; k < r->length; ++k) {
        in.pseudo_positions.push_back(ids.size());
        ids.push_back(vocab.pseudo_id(next_pseudo++));
      }
    } else if (auto* m = std::get_if<MaskSlot>(&seg)) {
      in.mask_positions.emplace_back(m->index, ids.size());
      ids.push_back(Vocabulary::kMask);
    } else if (std::holds_alternative<TextSlot>(seg)) {
      in.text_span.begin = ids.size();
      for (const auto& t : text_tokens) ids.push_back(vocab.id(t));
      in.text_span.end = ids.size();
    } else if (std::holds_alternative<AspectSlot>(seg)) {
      Span span{ids.size(), ids.size()};
      for (const auto& t : *aspect_tokens) ids.push_back(vocab.id(t));
      span.end = ids.size();
      in.aspect_span = span;
    } else if (std::holds_alternative<VisualSlot>(seg)) {
      for (std::size_t k = 0; k < n_visual; ++k) {
        in.visual_positions.push_back(ids.size());
        ids.push_back(vocab.visual_id(k));
      }
    }
  }
  in.n = ids.size();
  if (in.n > max_len) {
    throw LengthError("compiled input has " + std::to_string(in.n) +
                      " tokens, model max length is " + std::to_string(max_len));
  }
  std::sort(in.mask_positions.begin(), in.mask_positions.end());
  return in;
}

}  // namespace hpm
