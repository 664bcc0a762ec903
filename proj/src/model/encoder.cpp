#include "hpm/model/encoder.hpp"

#include <cmath>

#include "hpm/errors.hpp"
#include "hpm/numerics/ops.hpp"

namespace hpm {

LayerNormParams LayerNormParams::create(std::size_t d) {
  return {Tensor::full({d}, 1.0, true), Tensor::zeros({d}, true)};
}

Tensor LayerNormParams::operator()(const Tensor& x) const { return layer_norm(x, gamma, beta); }

NamedTensors LayerNormParams::parameters(const std::string& prefix) const {
  return {{prefix + "gamma", gamma}, {prefix + "beta", beta}};
}

TransformerEncoder TransformerEncoder::create(std::size_t d, std::size_t heads,
                                              std::size_t ffn_dim, std::size_t layers,
                                              std::mt19937_64& rng) {
  if (heads == 0 || d % heads != 0) throw ContractError("d_t must be divisible by heads");
  TransformerEncoder enc;
  enc.heads_ = heads;
  for (std::size_t l = 0; l < layers; ++l) {
    EncoderLayer layer{Dense::create(d, d, rng),
                       Dense::create(d, d, rng),
                       Dense::create(d, d, rng),
                       Dense::create(d, d, rng),
                       LayerNormParams::create(d),
                       Dense::create(d, ffn_dim, rng),
                       Dense::create(ffn_dim, d, rng),
                       LayerNormParams::create(d)};
    enc.layers_.push_back(std::move(layer));
  }
  return enc;
}

Tensor TransformerEncoder::operator()(const Tensor& x) const {
  Tensor h = x;
  for (const auto& layer : layers_) {
    const std::size_t d = h.dim(1);
    const std::size_t d_k = d / heads_;
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(d_k));
    Tensor q = layer.query.linear(h);
    Tensor k = layer.key.linear(h);
    Tensor v = layer.value.linear(h);
    std::vector<Tensor> heads;
    for (std::size_t i = 0; i < heads_; ++i) {
      const std::size_t b = i * d_k, e = b + d_k;
      Tensor qh = slice(q, 1, b, e);
      Tensor kh = slice(k, 1, b, e);
      Tensor weights = softmax(scale(matmul(qh, transpose(kh)), inv_sqrt), 1);
      heads.push_back(matmul(weights, slice(v, 1, b, e)));
    }
    Tensor attn = layer.output.linear(heads_ == 1 ? heads[0] : concat(heads, 1));
    h = layer.attn_norm(add(h, attn));
    Tensor ffn = layer.ffn_out.linear(gelu(layer.ffn_in.linear(h)));
    h = layer.ffn_norm(add(h, ffn));
  }
  return h;
}

NamedTensors TransformerEncoder::parameters(const std::string& prefix) const {
  NamedTensors out;
  auto append = [&](NamedTensors more) {
    for (auto& p : more) out.push_back(std::move(p));
  };
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    const std::string p = prefix + "l" + std::to_string(l) + ".";
    append(layer.query.parameters(p + "query."));
    append(layer.key.parameters(p + "key."));
    append(layer.value.parameters(p + "value."));
    append(layer.output.parameters(p + "output."));
    append(layer.attn_norm.parameters(p + "attn_norm."));
    append(layer.ffn_in.parameters(p + "ffn_in."));
    append(layer.ffn_out.parameters(p + "ffn_out."));
    append(layer.ffn_norm.parameters(p + "ffn_norm."));
  }
  return out;
}

}  // namespace hpm
