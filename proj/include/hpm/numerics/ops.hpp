#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <vector>

#include "hpm/numerics/tensor.hpp"

namespace hpm {

// 2-D matrix product: [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);

// Elementwise. `b` may match `a` exactly or match a's trailing dimensions,
// in which case it is repeated across the leading ones.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);

Tensor tanh(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor log(const Tensor& a);

// Tanh approximation of GELU, composed from the primitives above.
Tensor gelu(const Tensor& a);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end);
// Picks entries along `axis` by index; indices may repeat.
Tensor gather(const Tensor& a, std::size_t axis, std::span<const std::size_t> indices);
// Row lookup into a [vocab, d] table.
Tensor embedding(const Tensor& table, std::span<const std::size_t> ids);

Tensor reshape(const Tensor& a, const Shape& shape);
Tensor transpose(const Tensor& a);
Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes);

Tensor softmax(const Tensor& logits, std::size_t axis);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Mean negative log-likelihood of `targets` under softmax over the last axis.
// logits: [C] or [rows, C]; one target per row.
Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets);

// Normalizes over the last dimension.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Inverted dropout with a mask drawn from `rng`. Identity when p == 0.
Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng);

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(const Tensor& a, double s) { return scale(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }

}  // namespace hpm
