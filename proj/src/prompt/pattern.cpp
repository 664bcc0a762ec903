#include "hpm/prompt/pattern.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "hpm/errors.hpp"
#include "hpm/prompt/vocabulary.hpp"

namespace hpm {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

struct Item {
  std::string text;
  std::size_t column;
};

std::vector<Item> split_items(std::string_view dsl) {
  std::vector<Item> items;
  std::size_t i = 0;
  while (i < dsl.size()) {
    while (i < dsl.size() && std::isspace(static_cast<unsigned char>(dsl[i]))) ++i;
    if (i >= dsl.size()) break;
    const std::size_t start = i;
    while (i < dsl.size() && !std::isspace(static_cast<unsigned char>(dsl[i]))) ++i;
    items.push_back({std::string(dsl.substr(start, i - start)), start + 1});
  }
  return items;
}

std::optional<int> parse_int(std::string_view s) {
  int v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

bool is_period(const std::string& tok) { return tok == "."; }

}  // namespace

std::string_view to_string(TaskLevel level) {
  return level == TaskLevel::Aspect ? "aspect" : "sentence";
}

std::size_t PromptPattern::mask_count() const {
  return static_cast<std::size_t>(std::count_if(segments.begin(), segments.end(), [](const auto& s) {
    return std::holds_alternative<MaskSlot>(s);
  }));
}

std::size_t PromptPattern::soft_token_count() const {
  std::size_t n = 0;
  for (const auto& s : segments) {
    if (auto* r = std::get_if<SoftRun>(&s)) n += static_cast<std::size_t>(std::max(r->length, 0));
  }
  return n;
}

bool PromptPattern::has_visual_slot() const {
  return std::any_of(segments.begin(), segments.end(),
                     [](const auto& s) { return std::holds_alternative<VisualSlot>(s); });
}

bool PromptPattern::has_aspect_slot() const {
  return std::any_of(segments.begin(), segments.end(),
                     [](const auto& s) { return std::holds_alternative<AspectSlot>(s); });
}

std::vector<int> PromptPattern::mask_indices() const {
  std::vector<int> out;
  for (const auto& s : segments) {
    if (auto* m = std::get_if<MaskSlot>(&s)) out.push_back(m->index);
  }
  return out;
}

PromptPattern parse_pattern(std::string_view dsl, const ParseOptions& options) {
  const auto items = split_items(dsl);
  PromptPattern pattern;
  std::optional<TaskLevel> declared_level;
  std::size_t level_item = 0;
  std::set<int> mask_ids;
  bool seen_text = false, seen_aspect = false, seen_vision = false;
  std::size_t seen_cls = 0;

  auto fail = [&](const std::string& msg, std::size_t k) -> ParseError {
    const std::size_t col = k < items.size() ? items[k].column : dsl.size() + 1;
    return ParseError(msg, k, col);
  };

  for (std::size_t k = 0; k < items.size(); ++k) {
    const std::string& it = items[k].text;
    if (starts_with(it, "level=")) {
      const auto v = std::string_view(it).substr(6);
      if (v == "sentence") {
        declared_level = TaskLevel::Sentence;
      } else if (v == "aspect") {
        declared_level = TaskLevel::Aspect;
      } else {
        throw fail("unknown level '" + std::string(v) + "'", k);
      }
      level_item = k;
      continue;
    }
    if (starts_with(it, "uniform=")) {
      auto v = parse_int(std::string_view(it).substr(8));
      if (!v || *v < 0) throw fail("invalid uniform soft length '" + it + "'", k);
      pattern.uniform_soft_length = *v;
      continue;
    }
    if (it == "[CLS]" || it == "[SEP]") {
      const bool cls = it == "[CLS]";
      if (cls && k != 0) throw fail("[CLS] must be the first item", k);
      if (cls) ++seen_cls;
      pattern.segments.emplace_back(Boundary{cls ? BoundaryKind::Cls : BoundaryKind::Sep});
      continue;
    }
    if (starts_with(it, "[MASK:") && it.back() == ']') {
      auto v = parse_int(std::string_view(it).substr(6, it.size() - 7));
      if (!v || *v < 1) throw fail("mask index must be an integer >= 1 in '" + it + "'", k);
      if (!mask_ids.insert(*v).second) throw fail("duplicate mask index " + std::to_string(*v), k);
      pattern.segments.emplace_back(MaskSlot{*v});
      continue;
    }
    if (starts_with(it, "{soft:") && it.back() == '}') {
      auto v = parse_int(std::string_view(it).substr(6, it.size() - 7));
      if (!v) throw fail("soft length must be an integer in '" + it + "'", k);
      const int lo = options.ablation_mode ? 0 : options.min_soft_length;
      if (*v < lo || *v > options.max_soft_length) {
        throw fail("soft length " + std::to_string(*v) + " outside [" + std::to_string(lo) + ", " +
                       std::to_string(options.max_soft_length) + "]",
                   k);
      }
      pattern.segments.emplace_back(SoftRun{*v});
      continue;
    }
    if (it == "{text}") {
      if (seen_text) throw fail("duplicate {text}", k);
      seen_text = true;
      pattern.segments.emplace_back(TextSlot{});
      continue;
    }
    if (it == "{aspect}") {
      if (seen_aspect) throw fail("duplicate {aspect}", k);
      seen_aspect = true;
      pattern.segments.emplace_back(AspectSlot{});
      continue;
    }
    if (it == "{vision}") {
      if (seen_vision) throw fail("duplicate {vision}", k);
      seen_vision = true;
      pattern.segments.emplace_back(VisualSlot{});
      continue;
    }
    if (it.front() == '[' || it.front() == '{') throw fail("unknown item '" + it + "'", k);

    std::string word = tokenize(it).front();
    if (!pattern.segments.empty()) {
      if (auto* h = std::get_if<HardText>(&pattern.segments.back())) {
        h->tokens.push_back(std::move(word));
        continue;
      }
    }
    pattern.segments.emplace_back(HardText{{std::move(word)}});
  }

  if (seen_cls == 0) throw fail("pattern must begin with [CLS]", 0);
  if (!seen_text) throw fail("pattern lacks {text}", items.size());
  pattern.level = declared_level.value_or(seen_aspect ? TaskLevel::Aspect : TaskLevel::Sentence);
  if (pattern.level == TaskLevel::Aspect && !seen_aspect) {
    throw fail("level=aspect requires {aspect}", level_item);
  }
  if (pattern.level == TaskLevel::Sentence && seen_aspect) {
    throw fail("level=sentence pattern must not contain {aspect}", level_item);
  }
  if (pattern.uniform_soft_length) {
    for (const auto& s : pattern.segments) {
      if (auto* r = std::get_if<SoftRun>(&s); r && r->length != *pattern.uniform_soft_length) {
        throw fail("soft run of length " + std::to_string(r->length) +
                       " violates uniform=" + std::to_string(*pattern.uniform_soft_length),
                   items.size());
      }
    }
  }
  return pattern;
}

PromptPattern load_pattern_file(const std::string& path, const ParseOptions& options) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open pattern file " + path);
  std::string line, joined;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    joined += line;
    joined += ' ';
  }
  return parse_pattern(joined, options);
}

std::string render_pattern(const PromptPattern& pattern) {
  std::vector<std::string> parts;
  for (const auto& seg : pattern.segments) {
    std::visit(Overloaded{
                   [&](const Boundary& b) {
                     parts.emplace_back(b.kind == BoundaryKind::Cls ? "[CLS]" : "[SEP]");
                   },
                   [&](const HardText& h) {
                     for (const auto& t : h.tokens) parts.push_back(t);
                   },
                   [&](const SoftRun& r) {
                     parts.push_back("{soft:" + std::to_string(r.length) + "}");
                   },
                   [&](const MaskSlot& m) {
                     parts.push_back("[MASK:" + std::to_string(m.index) + "]");
                   },
                   [&](const TextSlot&) { parts.emplace_back("{text}"); },
                   [&](const AspectSlot&) { parts.emplace_back("{aspect}"); },
                   [&](const VisualSlot&) { parts.emplace_back("{vision}"); },
               },
               seg);
  }
  parts.push_back("level=" + std::string(to_string(pattern.level)));
  if (pattern.uniform_soft_length) {
    parts.push_back("uniform=" + std::to_string(*pattern.uniform_soft_length));
  }
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i) out += ' ';
    out += parts[i];
  }
  return out;
}

bool ValidityReport::has(std::string_view rule) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.rule == rule; });
}

std::string ValidityReport::to_text() const {
  std::ostringstream os;
  os << "valid: " << (valid ? "true" : "false") << '\n';
  os << "violations: " << violations.size() << '\n';
  for (const auto& v : violations) os << "  - " << v.rule << ": " << v.message << '\n';
  return os.str();
}

ValidityReport validate_pattern(const PromptPattern& pattern, bool has_visual_modality) {
  ValidityReport report;
  auto add = [&](std::string_view rule, std::string msg) {
    report.violations.push_back({std::string(rule), std::move(msg)});
  };
  const auto& segs = pattern.segments;

  if (pattern.mask_count() == 0) add(kRuleMaskPresent, "pattern contains no [MASK] slot");

  const auto vision = std::find_if(segs.begin(), segs.end(), [](const auto& s) {
    return std::holds_alternative<VisualSlot>(s);
  });
  if (has_visual_modality && vision == segs.end()) {
    add(kRuleVisionPresent, "multimodal run requires a {vision} slot");
  }
  if (has_visual_modality && vision != segs.end()) {
    // The prompt run directly before the visual tokens (length z) must be a
    // non-empty learnable or hard anchor, never empty or a [MASK].
    bool anchored = false;
    if (vision != segs.begin()) {
      const auto& prev = *std::prev(vision);
      if (auto* r = std::get_if<SoftRun>(&prev)) anchored = r->length > 0;
      if (std::holds_alternative<HardText>(prev)) anchored = true;
    }
    if (!anchored) {
      add(kRuleVisionZ,
          "the prompt run before {vision} must be non-empty and must not be a [MASK]; "
          "otherwise the image tokens carry no signal");
    }
  }

  for (std::size_t i = 0; i < segs.size(); ++i) {
    if (!std::holds_alternative<AspectSlot>(segs[i]) || i == 0) continue;
    const auto& prev = segs[i - 1];
    const auto* r = std::get_if<SoftRun>(&prev);
    if (std::holds_alternative<MaskSlot>(prev) || (r && r->length > 0)) {
      add(kRuleAspectIntegrity,
          "a [MASK] or pseudo-token run directly before {aspect} splits the aspect anchor");
    }
  }

  report.valid = report.violations.empty();
  return report;
}

std::string preset_template(std::string_view name, int mask_index) {
  const std::string mask = "[MASK:" + std::to_string(mask_index) + "]";
  if (name == "how") return "how " + mask + " .";
  if (name == "it_is") return "it is " + mask + " .";
  if (name == "for_aspect") return "for {aspect} , it is " + mask;
  throw ContractError("unknown template preset '" + std::string(name) + "'");
}

std::vector<std::string> preset_names() { return {"how", "it_is", "for_aspect"}; }

PromptPattern with_soft_length(const PromptPattern& pattern, int length) {
  PromptPattern out = pattern;
  for (auto& s : out.segments) {
    if (auto* r = std::get_if<SoftRun>(&s)) r->length = length;
  }
  out.uniform_soft_length =
      length > 0 && pattern.uniform_soft_length ? std::optional<int>(length) : std::nullopt;
  return out;
}

PromptPattern without_last_template(const PromptPattern& pattern) {
  const auto indices = pattern.mask_indices();
  if (indices.size() < 2) {
    throw ContractError("pattern has a single hard template; nothing to remove");
  }
  const int last = *std::max_element(indices.begin(), indices.end());
  auto segs = pattern.segments;
  std::size_t pos = 0;
  while (!(std::holds_alternative<MaskSlot>(segs[pos]) &&
           std::get<MaskSlot>(segs[pos]).index == last)) {
    ++pos;
  }

  // Trailing period belongs to the removed template.
  if (pos + 1 < segs.size()) {
    if (auto* h = std::get_if<HardText>(&segs[pos + 1]); h && is_period(h->tokens.front())) {
      h->tokens.erase(h->tokens.begin());
      if (h->tokens.empty()) segs.erase(segs.begin() + static_cast<std::ptrdiff_t>(pos + 1));
    }
  }
  // Leading words back to the previous sentence break.
  bool drop_prev = false;
  if (pos > 0) {
    if (auto* h = std::get_if<HardText>(&segs[pos - 1])) {
      auto cut = h->tokens.end();
      while (cut != h->tokens.begin() && !is_period(*std::prev(cut))) --cut;
      h->tokens.erase(cut, h->tokens.end());
      drop_prev = h->tokens.empty();
    }
  }
  segs.erase(segs.begin() + static_cast<std::ptrdiff_t>(pos));
  if (drop_prev) segs.erase(segs.begin() + static_cast<std::ptrdiff_t>(pos - 1));

  // Re-merge hard text that became adjacent.
  std::vector<Segment> merged;
  for (auto& s : segs) {
    if (!merged.empty()) {
      auto* a = std::get_if<HardText>(&merged.back());
      auto* b = std::get_if<HardText>(&s);
      if (a && b) {
        a->tokens.insert(a->tokens.end(), b->tokens.begin(), b->tokens.end());
        continue;
      }
    }
    merged.push_back(std::move(s));
  }
  PromptPattern out = pattern;
  out.segments = std::move(merged);
  return out;
}

}  // namespace hpm
