#pragma once

#include <random>

#include "hpm/numerics/tensor.hpp"

namespace hpm::init {

Tensor uniform(const Shape& shape, double bound, std::mt19937_64& rng);
Tensor normal(const Shape& shape, double stddev, std::mt19937_64& rng);
// Fan-in scaled uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Tensor fan_in_uniform(const Shape& shape, std::size_t fan_in, std::mt19937_64& rng);
// [rows, cols] matrix whose columns (or rows, whichever is fewer) are orthonormal.
Tensor orthogonal(std::size_t rows, std::size_t cols, std::mt19937_64& rng);

}  // namespace hpm::init
