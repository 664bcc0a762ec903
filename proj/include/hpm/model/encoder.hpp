#pragma once

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "hpm/inference/inference_unit.hpp"
#include "hpm/numerics/checkpoint.hpp"
#include "hpm/numerics/tensor.hpp"

namespace hpm {

struct LayerNormParams {
  Tensor gamma;
  Tensor beta;

  static LayerNormParams create(std::size_t d);
  Tensor operator()(const Tensor& x) const;
  NamedTensors parameters(const std::string& prefix) const;
};

struct EncoderLayer {
  Dense query, key, value, output;  // linear projections, d -> d
  LayerNormParams attn_norm;
  Dense ffn_in;   // d -> ffn
  Dense ffn_out;  // ffn -> d
  LayerNormParams ffn_norm;
};

// Post-norm transformer encoder stack (self-attention + GELU feed-forward).
class TransformerEncoder {
 public:
  static TransformerEncoder create(std::size_t d, std::size_t heads, std::size_t ffn_dim,
                                   std::size_t layers, std::mt19937_64& rng);

  Tensor operator()(const Tensor& x) const;  // [n, d] -> [n, d]
  NamedTensors parameters(const std::string& prefix) const;
  std::size_t layer_count() const { return layers_.size(); }

 private:
  std::size_t heads_ = 1;
  std::vector<EncoderLayer> layers_;
};

}  // namespace hpm
