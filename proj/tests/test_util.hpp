#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "hpm/numerics/tensor.hpp"

namespace testutil {

inline hpm::Tensor random_tensor(const hpm::Shape& shape, std::mt19937_64& rng,
                                 double scale = 1.0, bool grad = true) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::normal_distribution<double> g(0.0, scale);
  std::vector<double> v(n);
  for (auto& x : v) x = g(rng);
  return hpm::Tensor(shape, std::move(v), grad);
}

inline std::size_t uniform_int(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Naive row-major matrix product, long double accumulation.
inline std::vector<double> matmul_oracle(const std::vector<double>& a, const std::vector<double>& b,
                                         std::size_t m, std::size_t k, std::size_t n) {
  std::vector<double> out(m * n);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      long double acc = 0;
      for (std::size_t t = 0; t < k; ++t) acc += (long double)a[i * k + t] * b[t * n + j];
      out[i * n + j] = (double)acc;
    }
  }
  return out;
}

inline std::vector<double> softmax_oracle(const std::vector<double>& x) {
  long double mx = x[0];
  for (double v : x) mx = std::max<long double>(mx, v);
  long double z = 0;
  for (double v : x) z += std::exp((long double)v - mx);
  std::vector<double> out;
  for (double v : x) out.push_back((double)(std::exp((long double)v - mx) / z));
  return out;
}

inline std::vector<double> to_vector(const hpm::Tensor& t) {
  return {t.data().begin(), t.data().end()};
}

}  // namespace testutil
