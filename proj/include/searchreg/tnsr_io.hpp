#pragma once

#include <iosfwd>
#include <string>

#include "searchreg/tensor.hpp"

namespace sreg {

// "TNSR" binary format: ASCII magic, little-endian u32 rank, u32 dims[rank],
// then the f32 payload row-major. Used for field dumps and inside
// checkpoints.
void write_tnsr(std::ostream& out, const Tensor<float>& t);
Tensor<float> read_tnsr(std::istream& in);

void save_tnsr(const std::string& path, const Tensor<float>& t);
Tensor<float> load_tnsr(const std::string& path);

}  // namespace sreg
