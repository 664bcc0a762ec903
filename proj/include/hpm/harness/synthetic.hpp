#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "hpm/harness/dataset.hpp"
#include "hpm/vision/projector.hpp"

namespace hpm {

enum class SyntheticMode {
  // Label fixed by the text keyword alone; features are noise.
  Separable,
  // positive = positive keyword and feature[0] > 0, negative = negative keyword
  // and feature[0] < 0, neutral = the two mismatched combinations.
  Multimodal,
};

SyntheticMode parse_synthetic_mode(const std::string& text);

struct SyntheticOptions {
  std::size_t count = 300;
  std::size_t feature_dim = 8;
  std::uint64_t seed = 7;
  SyntheticMode mode = SyntheticMode::Multimodal;
  bool aspect = false;
  std::size_t filler_words = 2;
};

struct SyntheticData {
  std::vector<Sample> samples;
  FeatureMap features;
};

// Labels negative/neutral/positive in equal shares (count % 3 spread over the
// first classes), shuffled. Sample i references feature img%04d.
SyntheticData generate_synthetic(const SyntheticOptions& options);

}  // namespace hpm
