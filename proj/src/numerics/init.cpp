#include "hpm/numerics/init.hpp"

#include <cmath>

#include "hpm/errors.hpp"

namespace hpm::init {

Tensor uniform(const Shape& shape, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(shape, std::move(v), true);
}

Tensor normal(const Shape& shape, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  std::vector<double> v(shape_size(shape));
  for (auto& x : v) x = dist(rng);
  return Tensor(shape, std::move(v), true);
}

Tensor fan_in_uniform(const Shape& shape, std::size_t fan_in, std::mt19937_64& rng) {
  if (fan_in == 0) throw ContractError("fan_in_uniform: fan_in must be positive");
  return uniform(shape, 1.0 / std::sqrt(static_cast<double>(fan_in)), rng);
}

Tensor orthogonal(std::size_t rows, std::size_t cols, std::mt19937_64& rng) {
  // Gram-Schmidt over the longer side of a Gaussian matrix.
  const bool tall = rows >= cols;
  const std::size_t len = tall ? rows : cols;
  const std::size_t count = tall ? cols : rows;
  std::normal_distribution<double> dist(0.0, 1.0);
  std::vector<std::vector<double>> basis;
  while (basis.size() < count) {
    std::vector<double> v(len);
    for (auto& x : v) x = dist(rng);
    for (const auto& b : basis) {
      double dot = 0.0;
      for (std::size_t i = 0; i < len; ++i) dot += v[i] * b[i];
      for (std::size_t i = 0; i < len; ++i) v[i] -= dot * b[i];
    }
    double norm = 0.0;
    for (double x : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm < 1e-8) continue;
    for (auto& x : v) x /= norm;
    basis.push_back(std::move(v));
  }
  std::vector<double> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      out[r * cols + c] = tall ? basis[c][r] : basis[r][c];
    }
  }
  return Tensor({rows, cols}, std::move(out), true);
}

}  // namespace hpm::init
