#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace hpm {

enum class BoundaryKind { Cls, Sep };

struct Boundary {
  BoundaryKind kind;
  bool operator==(const Boundary&) const = default;
};
// Consecutive bare words in the DSL form one HardText segment.
struct HardText {
  std::vector<std::string> tokens;
  bool operator==(const HardText&) const = default;
};
// A run of learnable pseudo tokens. Length 0 only appears in ablation patterns.
struct SoftRun {
  int length;
  bool operator==(const SoftRun&) const = default;
};
struct MaskSlot {
  int index;
  bool operator==(const MaskSlot&) const = default;
};
struct TextSlot {
  bool operator==(const TextSlot&) const = default;
};
struct AspectSlot {
  bool operator==(const AspectSlot&) const = default;
};
struct VisualSlot {
  bool operator==(const VisualSlot&) const = default;
};

using Segment =
    std::variant<Boundary, HardText, SoftRun, MaskSlot, TextSlot, AspectSlot, VisualSlot>;

enum class TaskLevel { Sentence, Aspect };

std::string_view to_string(TaskLevel level);

struct PromptPattern {
  std::vector<Segment> segments;
  TaskLevel level = TaskLevel::Sentence;
  std::optional<int> uniform_soft_length;

  std::size_t mask_count() const;
  std::size_t soft_token_count() const;
  bool has_visual_slot() const;
  bool has_aspect_slot() const;
  std::vector<int> mask_indices() const;

  bool operator==(const PromptPattern&) const = default;
};

struct ParseOptions {
  // Permits {soft:0}; used by the no-learnable-prompt ablation.
  bool ablation_mode = false;
  int min_soft_length = 1;
  int max_soft_length = 3;
};

// Grammar: whitespace-separated items
//   [CLS] [SEP] [MASK:k] {soft:p} {text} {aspect} {vision} <bare word>
// plus directives `level=sentence|aspect` and `uniform=N`.
// Without a level directive the level is ASPECT iff {aspect} occurs.
PromptPattern parse_pattern(std::string_view dsl, const ParseOptions& options = {});

// Reads a pattern file: '#' lines are comments, remaining lines are joined.
PromptPattern load_pattern_file(const std::string& path, const ParseOptions& options = {});

// Canonical DSL text; parse_pattern(render_pattern(p)) == p.
std::string render_pattern(const PromptPattern& pattern);

inline constexpr std::string_view kRuleVisionZ = "RULE_VISION_Z";
inline constexpr std::string_view kRuleAspectIntegrity = "RULE_ASPECT_INTEGRITY";
inline constexpr std::string_view kRuleMaskPresent = "RULE_MASK_PRESENT";
inline constexpr std::string_view kRuleVisionPresent = "RULE_VISION_PRESENT";

struct Violation {
  std::string rule;
  std::string message;
};

struct ValidityReport {
  bool valid = true;
  std::vector<Violation> violations;

  bool has(std::string_view rule) const;
  std::string to_text() const;
};

// Report-only check of the hybrid-pattern placement constraints.
ValidityReport validate_pattern(const PromptPattern& pattern, bool has_visual_modality);

// Named hard templates. `mask_index` fills the [MASK:k] slot.
//   "how"        -> how [MASK:k] .
//   "it_is"      -> it is [MASK:k] .
//   "for_aspect" -> for {aspect} , it is [MASK:k]
std::string preset_template(std::string_view name, int mask_index);
std::vector<std::string> preset_names();

// Every SoftRun set to `length` (0 strips learnable prompts); uniform length
// is cleared when length is 0.
PromptPattern with_soft_length(const PromptPattern& pattern, int length);

// Drops the highest-indexed MaskSlot together with its hard-template words:
// the hard tokens preceding it back to the previous '.', mask, or non-text
// segment, and a directly following '.'. Requires at least two masks.
PromptPattern without_last_template(const PromptPattern& pattern);

}  // namespace hpm
