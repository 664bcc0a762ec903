#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <set>

#include "hpm/errors.hpp"
#include "hpm/prompt/compile.hpp"
#include "hpm/prompt/pattern.hpp"
#include "hpm/prompt/vocabulary.hpp"

using namespace hpm;

namespace {

const char* kRight =
    "[CLS] {soft:1} for {aspect} the sentence {text} is [MASK:1] {soft:1} [SEP] {soft:1} "
    "{vision} [SEP]";
const char* kDestroyed =
    "[CLS] {soft:1} for [MASK:1] {aspect} the sentence {text} it is [MASK:2] {soft:1} [SEP] "
    "{soft:1} {vision} [SEP]";
const char* kIgnored =
    "[CLS] {soft:1} for {aspect} the sentence {text} is [MASK:1] {soft:1} [SEP] [MASK:2] "
    "{vision} [SEP]";

std::string data_dir() {
  const char* d = std::getenv("HPM_DATA_DIR");
  return d ? d : "data";
}

}  // namespace

TEST(Tokenize, LowercasesAndSplitsOnWhitespace) {
  EXPECT_EQ(tokenize("  The Pizza\tis  NICE "),
            (std::vector<std::string>{"the", "pizza", "is", "nice"}));
  EXPECT_TRUE(tokenize("   ").empty());
}

TEST(Vocabulary, ReservedLayout) {
  Vocabulary v(4, 5);
  EXPECT_EQ(v.token(0), "[PAD]");
  EXPECT_EQ(v.token(Vocabulary::kMask), "[MASK]");
  EXPECT_EQ(v.pseudo_id(0), 5u);
  EXPECT_EQ(v.pseudo_id(3), 8u);
  EXPECT_EQ(v.visual_id(0), 9u);
  EXPECT_EQ(v.size(), 14u);
  const TokenId good = v.add("good");
  EXPECT_EQ(good, 14u);
  EXPECT_EQ(v.add("good"), good);
  EXPECT_EQ(v.id("unseen"), Vocabulary::kUnk);
  EXPECT_TRUE(v.is_pseudo(6));
  EXPECT_TRUE(v.is_visual(13));
  EXPECT_FALSE(v.is_visual(14));
  EXPECT_THROW(v.pseudo_id(4), ContractError);
  const Vocabulary back = Vocabulary::from_tokens(v.tokens(), 4, 5);
  EXPECT_EQ(back.tokens(), v.tokens());
  EXPECT_EQ(back.id("good"), good);
}

TEST(ParsePattern, RightInstanceSegments) {
  const PromptPattern p = parse_pattern(kRight);
  // [CLS] soft "for" aspect "the sentence" text "is" mask soft [SEP] soft vision [SEP]
  EXPECT_EQ(p.segments.size(), 13u);
  EXPECT_EQ(p.level, TaskLevel::Aspect);
  EXPECT_EQ(p.mask_count(), 1u);
  EXPECT_EQ(p.soft_token_count(), 3u);
  EXPECT_TRUE(p.has_visual_slot());
  EXPECT_EQ(std::get<HardText>(p.segments[4]).tokens,
            (std::vector<std::string>{"the", "sentence"}));
}

TEST(ParsePattern, PureHardPattern) {
  const PromptPattern p = parse_pattern("[CLS] {text} how [MASK:1] . [SEP]");
  EXPECT_EQ(p.level, TaskLevel::Sentence);
  EXPECT_EQ(p.soft_token_count(), 0u);
  EXPECT_EQ(p.segments.size(), 6u);
}

TEST(ParsePattern, Errors) {
  EXPECT_THROW(parse_pattern("[CLS] {soft:0} {text} [MASK:1]"), ParseError);
  EXPECT_NO_THROW(parse_pattern("[CLS] {soft:0} {text} [MASK:1]", ParseOptions{true, 1, 3}));
  EXPECT_THROW(parse_pattern("[CLS] {soft:4} {text} [MASK:1]"), ParseError);
  EXPECT_THROW(parse_pattern("[CLS] {soft:-1} {text} [MASK:1]", ParseOptions{true, 1, 3}),
               ParseError);
  EXPECT_THROW(parse_pattern("{text} [MASK:1]"), ParseError);
  EXPECT_THROW(parse_pattern("[CLS] {text} {text} [MASK:1]"), ParseError);
  EXPECT_THROW(parse_pattern("[CLS] [MASK:1]"), ParseError);
  EXPECT_THROW(parse_pattern("[CLS] {text} [MASK:1] [MASK:1]"), ParseError);
  EXPECT_THROW(parse_pattern("[CLS] {text} [MASK:0]"), ParseError);
  EXPECT_THROW(parse_pattern("[CLS] {text} {image} [MASK:1]"), ParseError);
  EXPECT_THROW(parse_pattern("[CLS] {text} [MASK:1] level=aspect"), ParseError);
  EXPECT_THROW(parse_pattern("[CLS] {text} {soft:1} {soft:2} [MASK:1] uniform=1"), ParseError);
  try {
    parse_pattern("[CLS] {text} [OOPS] [MASK:1]");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.item(), 2u);  // zero-based item index
    EXPECT_EQ(e.column(), 14u);
  }
}

TEST(Render, CanonicalForm) {
  EXPECT_EQ(render_pattern(parse_pattern("[CLS]   {text}  How [MASK:1]  .")),
            "[CLS] {text} how [MASK:1] . level=sentence");
}

// Generated grammar-valid patterns survive render -> parse unchanged.
TEST(Render, RoundTripProperty) {
  std::mt19937_64 rng(11);
  const std::vector<std::string> words = {"how", "it", "is", ".", "for", ",", "the"};
  for (int trial = 0; trial < 300; ++trial) {
    auto coin = [&](double p) { return std::bernoulli_distribution(p)(rng); };
    std::vector<std::string> items;
    const bool aspect = coin(0.5), vision = coin(0.5);
    const int masks = 1 + static_cast<int>(rng() % 3);
    std::vector<std::string> body = {"{text}"};
    if (aspect) body.push_back("{aspect}");
    if (vision) body.push_back("{vision}");
    for (int k = 1; k <= masks; ++k) body.push_back("[MASK:" + std::to_string(k) + "]");
    const int extras = static_cast<int>(rng() % 6);
    for (int e = 0; e < extras; ++e) {
      switch (rng() % 3) {
        case 0: body.push_back("{soft:" + std::to_string(1 + rng() % 3) + "}"); break;
        case 1: body.push_back(words[rng() % words.size()]); break;
        default: body.push_back("[SEP]");
      }
    }
    std::shuffle(body.begin(), body.end(), rng);
    std::string dsl = "[CLS]";
    for (const auto& b : body) dsl += " " + b;
    const PromptPattern p = parse_pattern(dsl);
    const std::string canon = render_pattern(p);
    EXPECT_EQ(parse_pattern(canon), p) << dsl;
    EXPECT_EQ(render_pattern(parse_pattern(canon)), canon);
  }
}

TEST(Validate, TableVerdicts) {
  const auto right = validate_pattern(parse_pattern(kRight), true);
  EXPECT_TRUE(right.valid);
  EXPECT_TRUE(right.violations.empty());

  const auto destroyed = validate_pattern(parse_pattern(kDestroyed), true);
  EXPECT_FALSE(destroyed.valid);
  EXPECT_TRUE(destroyed.has(kRuleAspectIntegrity));
  EXPECT_FALSE(destroyed.has(kRuleVisionZ));

  const auto ignored = validate_pattern(parse_pattern(kIgnored), true);
  EXPECT_FALSE(ignored.valid);
  EXPECT_TRUE(ignored.has(kRuleVisionZ));
  EXPECT_FALSE(ignored.has(kRuleAspectIntegrity));
}

TEST(Validate, PatternFilesMatchInlineVerdicts) {
  const std::string dir = data_dir() + "/patterns/";
  EXPECT_TRUE(validate_pattern(load_pattern_file(dir + "aspect_right.pat"), true).valid);
  EXPECT_TRUE(validate_pattern(load_pattern_file(dir + "aspect_destroyed.pat"), true)
                  .has(kRuleAspectIntegrity));
  EXPECT_TRUE(validate_pattern(load_pattern_file(dir + "vision_ignored.pat"), true)
                  .has(kRuleVisionZ));
}

TEST(Validate, OtherRules) {
  const auto no_mask = validate_pattern(parse_pattern("[CLS] {text} [SEP]"), false);
  EXPECT_TRUE(no_mask.has(kRuleMaskPresent));
  const auto no_vision = validate_pattern(parse_pattern("[CLS] {text} [MASK:1]"), true);
  EXPECT_TRUE(no_vision.has(kRuleVisionPresent));
  EXPECT_TRUE(validate_pattern(parse_pattern("[CLS] {text} [MASK:1]"), false).valid);
  // Vision checks are skipped for text-only runs.
  EXPECT_TRUE(validate_pattern(parse_pattern(kIgnored), false).valid);
  // Soft run directly before the aspect also splits it.
  const auto soft_split =
      validate_pattern(parse_pattern("[CLS] for {soft:1} {aspect} {text} [MASK:1]"), false);
  EXPECT_TRUE(soft_split.has(kRuleAspectIntegrity));
  // Empty soft run (ablation) before vision is not an anchor.
  const auto empty_run = validate_pattern(
      parse_pattern("[CLS] {text} [MASK:1] [SEP] {soft:0} {vision}", ParseOptions{true, 1, 3}),
      true);
  EXPECT_TRUE(empty_run.has(kRuleVisionZ));
  const auto hard_anchor =
      validate_pattern(parse_pattern("[CLS] {text} [MASK:1] [SEP] image {vision}"), true);
  EXPECT_TRUE(hard_anchor.valid);
}

TEST(Presets, ExpandAndParse) {
  EXPECT_EQ(preset_template("how", 2), "how [MASK:2] .");
  EXPECT_EQ(preset_template("it_is", 1), "it is [MASK:1] .");
  EXPECT_EQ(preset_template("for_aspect", 1), "for {aspect} , it is [MASK:1]");
  EXPECT_THROW(preset_template("nope", 1), ContractError);
  const PromptPattern p = parse_pattern("[CLS] {text} " + preset_template("how", 1) + " " +
                                        preset_template("for_aspect", 2));
  EXPECT_EQ(p.mask_count(), 2u);
  EXPECT_EQ(p.level, TaskLevel::Aspect);
}

TEST(Ablations, SoftLengthZeroAndTemplateRemoval) {
  const PromptPattern p = parse_pattern(kRight);
  const PromptPattern nolp = with_soft_length(p, 0);
  EXPECT_EQ(nolp.soft_token_count(), 0u);
  EXPECT_EQ(nolp.segments.size(), p.segments.size());
  const PromptPattern two =
      parse_pattern("[CLS] {soft:1} {vision} {text} how [MASK:1] . it is [MASK:2] . [SEP]");
  const PromptPattern one = without_last_template(two);
  EXPECT_EQ(render_pattern(one), "[CLS] {soft:1} {vision} {text} how [MASK:1] . [SEP] level=sentence");
  EXPECT_THROW(without_last_template(one), ContractError);
}

TEST(Compile, HandCountedLength) {
  Vocabulary v;
  v.add_all({"a", "b", "c"});
  const PromptPattern p = parse_pattern("[CLS] {soft:1} {text} {soft:1} [MASK:1] [SEP]");
  const HybridInput in = compile_input(p, v, {"a", "b", "c"}, std::nullopt, 0, 64);
  // 3 text + 2 soft + 1 mask + 2 boundaries
  EXPECT_EQ(in.n, 8u);
  EXPECT_EQ(in.token_ids.size(), 8u);
  ASSERT_EQ(in.mask_positions.size(), 1u);
  EXPECT_EQ(in.mask_positions[0].second, 6u);
  EXPECT_EQ(in.pseudo_positions, (std::vector<std::size_t>{1, 5}));
  EXPECT_EQ(in.token_ids[1], v.pseudo_id(0));
  EXPECT_EQ(in.token_ids[5], v.pseudo_id(1));
  EXPECT_EQ(in.text_span, (Span{2, 5}));
  EXPECT_EQ(in.token_ids[0], Vocabulary::kCls);
  EXPECT_EQ(in.token_ids[6], Vocabulary::kMask);
}

TEST(Compile, HardOnlyEqualsPlainEncoding) {
  Vocabulary v;
  v.add_all({"how", ".", "nice", "view"});
  const PromptPattern p = parse_pattern("[CLS] {text} how [MASK:1] . [SEP]");
  const HybridInput in = compile_input(p, v, {"nice", "view"}, std::nullopt, 0, 64);
  EXPECT_TRUE(in.pseudo_positions.empty());
  EXPECT_TRUE(in.visual_positions.empty());
  const std::vector<TokenId> want = {Vocabulary::kCls, v.id("nice"), v.id("view"), v.id("how"),
                                     Vocabulary::kMask, v.id("."), Vocabulary::kSep};
  EXPECT_EQ(in.token_ids, want);
}

TEST(Compile, DoubleTemplateMasksDistinct) {
  Vocabulary v;
  const PromptPattern p = parse_pattern(
      "[CLS] {soft:2} {vision} [SEP] how [MASK:2] . {soft:1} {text} {soft:1} [MASK:1] [SEP]");
  const HybridInput in = compile_input(p, v, {"x"}, std::nullopt, 3, 64);
  ASSERT_EQ(in.mask_positions.size(), 2u);
  EXPECT_EQ(in.mask_positions[0].first, 1);  // ordered by mask index
  EXPECT_EQ(in.mask_positions[1].first, 2);
  EXPECT_NE(in.mask_positions[0].second, in.mask_positions[1].second);
  EXPECT_EQ(in.visual_positions, (std::vector<std::size_t>{3, 4, 5}));
  EXPECT_EQ(in.token_ids[3], v.visual_id(0));
  EXPECT_EQ(in.token_ids[5], v.visual_id(2));
}

TEST(Compile, Errors) {
  Vocabulary v;
  const PromptPattern aspect = parse_pattern(kRight);
  EXPECT_THROW(compile_input(aspect, v, {"x"}, std::nullopt, 1, 64), ContractError);
  EXPECT_THROW(compile_input(aspect, v, {"x"}, std::vector<std::string>{"y"}, 0, 64),
               ContractError);
  EXPECT_THROW(compile_input(aspect, v, {"x", "y", "z"}, std::vector<std::string>{"y"}, 1, 10),
               LengthError);
  const PromptPattern sentence = parse_pattern("[CLS] {text} [MASK:1]");
  EXPECT_THROW(compile_input(sentence, v, {"x"}, std::vector<std::string>{"y"}, 0, 64),
               ContractError);
  EXPECT_THROW(compile_input(sentence, v, {"x"}, std::nullopt, 2, 64), ContractError);
  EXPECT_THROW(compile_input(parse_pattern("[CLS] {text}"), v, {"x"}, std::nullopt, 0, 64),
               ContractError);
}

// Position maps are disjoint, in range, and mask count matches the pattern.
TEST(Compile, PartitionPropertyOverCorpus) {
  Vocabulary v;
  v.add_all({"w1", "w2", "w3", "svc"});
  std::mt19937_64 rng(2);
  for (const auto& entry : std::filesystem::directory_iterator(data_dir() + "/patterns")) {
    const PromptPattern p = load_pattern_file(entry.path().string());
    for (int trial = 0; trial < 20; ++trial) {
      std::vector<std::string> text(1 + rng() % 5, "w1");
      const std::size_t nv = p.has_visual_slot() ? 1 + rng() % 5 : 0;
      std::optional<std::vector<std::string>> asp;
      if (p.level == TaskLevel::Aspect) asp = std::vector<std::string>(1 + rng() % 2, "svc");
      const HybridInput in = compile_input(p, v, text, asp, nv, 128);
      std::set<std::size_t> seen;
      auto claim = [&](std::size_t pos) {
        EXPECT_LT(pos, in.n);
        EXPECT_TRUE(seen.insert(pos).second) << entry.path() << " position " << pos;
      };
      for (auto [k, pos] : in.mask_positions) claim(pos);
      for (auto pos : in.pseudo_positions) claim(pos);
      for (auto pos : in.visual_positions) claim(pos);
      for (auto pos = in.text_span.begin; pos < in.text_span.end; ++pos) claim(pos);
      if (in.aspect_span) {
        for (auto pos = in.aspect_span->begin; pos < in.aspect_span->end; ++pos) claim(pos);
      }
      EXPECT_EQ(in.mask_positions.size(), p.mask_count());
      EXPECT_EQ(in.pseudo_positions.size(), p.soft_token_count());
      EXPECT_EQ(in.visual_positions.size(), nv);
      for (auto pos : in.pseudo_positions) EXPECT_TRUE(v.is_pseudo(in.token_ids[pos]));
    }
  }
}
