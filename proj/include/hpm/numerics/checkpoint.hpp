#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include "hpm/numerics/tensor.hpp"

namespace hpm {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Binary layout, all integers little-endian:
//   "HPMCKPT\0" | u32 version | u32 count |
//   count x ( u32 name_len | name | u32 rank | rank x u64 dim | f64 payload )
void write_checkpoint(std::ostream& out, const NamedTensors& tensors);
NamedTensors read_checkpoint(std::istream& in);

void save_checkpoint(const std::string& path, const NamedTensors& tensors);
NamedTensors load_checkpoint(const std::string& path);

// Copies values from `source` into same-named, same-shaped tensors in `target`.
// Throws ContractError on missing names or shape mismatches.
void assign_parameters(NamedTensors& target, const NamedTensors& source);

}  // namespace hpm
