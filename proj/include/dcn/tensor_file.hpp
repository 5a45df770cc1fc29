#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "dcn/tensor.hpp"

namespace dcn {

// Binary tensor container. Header layout, all little-endian:
//   bytes 0-3   magic "DTEN"
//   byte  4     version, currently 1
//   byte  5     dtype: 0 = f32, 1 = f64
//   bytes 6-7   reserved, zero
//   bytes 8-11  ndim as u32, always 4
//   bytes 12-27 dims n, c, h, w as u32 each
// followed by the payload, row-major with w fastest. f64 round-trips
// bit-exactly; f32 exists for interchange only.
enum class Dtype : std::uint8_t { f32 = 0, f64 = 1 };

inline constexpr std::size_t kTensorHeaderBytes = 28;

std::vector<std::uint8_t> write_tensor(const Tensor4& t, Dtype dtype = Dtype::f64);
Tensor4 read_tensor(const std::uint8_t* bytes, std::size_t len);
Tensor4 read_tensor(const std::vector<std::uint8_t>& bytes);

void save_tensor(const std::string& path, const Tensor4& t, Dtype dtype = Dtype::f64);
Tensor4 load_tensor(const std::string& path);

}  // namespace dcn
