#include "hpm/harness/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "hpm/errors.hpp"

namespace hpm {

namespace {

const std::vector<std::string> kFiller = {"the", "a", "photo", "today", "we", "saw",
                                          "this", "scene", "at", "city", "night", "street"};
const std::vector<std::string> kAspects = {"food", "service", "view", "music"};
const std::vector<std::vector<std::string>> kSeparableWords = {
    {"awful", "terrible", "horrible"},
    {"plain", "average", "ordinary"},
    {"great", "lovely", "superb"},
};
const std::vector<std::string> kNegativeWords = {"awful", "terrible"};
const std::vector<std::string> kPositiveWords = {"great", "lovely"};

template <typename T>
const T& pick(const std::vector<T>& v, std::mt19937_64& rng) {
  return v[std::uniform_int_distribution<std::size_t>(0, v.size() - 1)(rng)];
}

}  // namespace

SyntheticMode parse_synthetic_mode(const std::string& text) {
  if (text == "separable") return SyntheticMode::Separable;
  if (text == "multimodal") return SyntheticMode::Multimodal;
  throw ContractError("unknown synthetic mode '" + text + "'");
}

SyntheticData generate_synthetic(const SyntheticOptions& options) {
  if (options.count == 0) throw ContractError("synthetic count must be positive");
  if (options.feature_dim == 0) throw ContractError("synthetic feature_dim must be positive");
  static const char* labels[] = {"negative", "neutral", "positive"};
  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::bernoulli_distribution coin(0.5);

  std::vector<std::size_t> classes(options.count);
  for (std::size_t i = 0; i < options.count; ++i) classes[i] = i % 3;
  std::shuffle(classes.begin(), classes.end(), rng);

  SyntheticData data;
  for (std::size_t i = 0; i < options.count; ++i) {
    const std::size_t c = classes[i];
    std::string keyword;
    double sign = coin(rng) ? 1.0 : -1.0;
    if (options.mode == SyntheticMode::Separable) {
      keyword = pick(kSeparableWords[c], rng);
    } else {
      bool positive_word;
      if (c == 0) {
        positive_word = false, sign = -1.0;
      } else if (c == 2) {
        positive_word = true, sign = 1.0;
      } else {
        positive_word = coin(rng);
        sign = positive_word ? -1.0 : 1.0;
      }
      keyword = pick(positive_word ? kPositiveWords : kNegativeWords, rng);
    }

    std::vector<std::string> text;
    for (std::size_t k = 0; k < options.filler_words; ++k) text.push_back(pick(kFiller, rng));
    const auto at = std::uniform_int_distribution<std::size_t>(0, text.size())(rng);
    text.insert(text.begin() + static_cast<std::ptrdiff_t>(at), keyword);

    std::vector<double> feature(options.feature_dim);
    for (auto& v : feature) v = gauss(rng);
    feature[0] = sign * (1.0 + std::fabs(feature[0]));

    char id[32];
    std::snprintf(id, sizeof id, "s%04zu", i);
    char fid[32];
    std::snprintf(fid, sizeof fid, "img%04zu", i);
    Sample s;
    s.id = id;
    s.text = std::move(text);
    if (options.aspect) s.aspect = std::vector<std::string>{pick(kAspects, rng)};
    s.label = labels[c];
    s.feature_id = fid;
    data.features.emplace(fid, FeatureSource{fid, std::move(feature)});
    data.samples.push_back(std::move(s));
  }
  return data;
}

}  // namespace hpm
