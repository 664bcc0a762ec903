#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "hpm/numerics/checkpoint.hpp"
#include "hpm/numerics/tensor.hpp"

namespace hpm {

// Pooled image features produced offline by a frozen backbone.
struct FeatureSource {
  std::string id;
  std::vector<double> vector;
};

using FeatureMap = std::map<std::string, FeatureSource>;

// Feature file: UTF-8 lines `id<TAB>v1,v2,...,vd`; '#' lines are comments.
// All records must share one dimension; ids must be unique.
FeatureMap read_features(std::istream& in);
FeatureMap load_features(const std::string& path);
void write_features(std::ostream& out, const FeatureMap& features);

// Deterministic standard-normal vectors with ids img0000, img0001, ...
FeatureMap synthetic_features(std::size_t count, std::size_t dim, std::uint64_t seed);

inline constexpr std::size_t kMaxVisualTokens = 5;

// Linear map from a d_v feature to n_tokens pseudo-visual tokens of size d_t.
struct VisualProjector {
  std::size_t n_tokens = 1;
  std::size_t d_t = 0;
  std::size_t d_v = 0;
  Tensor weight;  // [d_t * n_tokens, d_v]
  Tensor bias;    // [d_t * n_tokens]

  // Weight uniform in [-1/sqrt(d_v), 1/sqrt(d_v)], bias zero.
  static VisualProjector create(std::size_t n_tokens, std::size_t d_t, std::size_t d_v,
                                std::mt19937_64& rng);

  NamedTensors parameters(const std::string& prefix) const;
};

// tokens: [n_tokens, d_t]; row j is the j-th d_t-sized block of W x + b.
struct VisualTokens {
  Tensor tokens;
  std::size_t count() const { return tokens.dim(0); }
};

VisualTokens project(const FeatureSource& source, const VisualProjector& projector);
// Same map applied to a feature held in a tensor of shape [d_v].
VisualTokens project(const Tensor& feature, const VisualProjector& projector);

}  // namespace hpm
