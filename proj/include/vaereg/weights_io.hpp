#pragma once

#include <string>
#include <utility>
#include <vector>

#include "vaereg/tensor.hpp"

namespace vaereg {

// Binary tensor container. Layout:
//   magic "VAEREG1\n"
//   per tensor: u64 name length, name bytes, u64 rank, u64 dims[rank],
//               f64 data (row-major)
// All integers and doubles are little-endian.
using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

void save_tensors(const std::string& path, const NamedTensors& tensors);
NamedTensors load_tensors(const std::string& path);

}  // namespace vaereg
