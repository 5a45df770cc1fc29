#include "dcn/tensor_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace dcn {

namespace {

constexpr char kMagic[4] = {'D', 'T', 'E', 'N'};
constexpr std::uint8_t kVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return v;
}

[[noreturn]] void bad(const char* what) { throw std::runtime_error(what); }

}  // namespace

std::vector<std::uint8_t> write_tensor(const Tensor4& t, Dtype dtype) {
  std::vector<std::uint8_t> out;
  const std::size_t elem = dtype == Dtype::f64 ? 8 : 4;
  out.reserve(kTensorHeaderBytes + elem * static_cast<std::size_t>(t.size()));
  out.insert(out.end(), kMagic, kMagic + 4);
  out.push_back(kVersion);
  out.push_back(static_cast<std::uint8_t>(dtype));
  out.push_back(0);
  out.push_back(0);
  put_u32(out, 4);
  put_u32(out, static_cast<std::uint32_t>(t.n()));
  put_u32(out, static_cast<std::uint32_t>(t.c()));
  put_u32(out, static_cast<std::uint32_t>(t.h()));
  put_u32(out, static_cast<std::uint32_t>(t.w()));
  for (std::int64_t i = 0; i < t.size(); ++i) {
    if (dtype == Dtype::f64) {
      put_u64(out, std::bit_cast<std::uint64_t>(t[i]));
    } else {
      put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(t[i])));
    }
  }
  return out;
}

Tensor4 read_tensor(const std::uint8_t* bytes, std::size_t len) {
  if (len < kTensorHeaderBytes) bad("tensor file: truncated header");
  if (std::memcmp(bytes, kMagic, 4) != 0) bad("tensor file: bad magic");
  if (bytes[4] != kVersion) bad("tensor file: unsupported version");
  if (bytes[5] > 1) bad("tensor file: unsupported dtype");
  const Dtype dtype = static_cast<Dtype>(bytes[5]);
  if (get_u32(bytes + 8) != 4) bad("tensor file: ndim must be 4");
  const std::uint32_t n = get_u32(bytes + 12), c = get_u32(bytes + 16);
  const std::uint32_t h = get_u32(bytes + 20), w = get_u32(bytes + 24);
  Tensor4 t(static_cast<int>(n), static_cast<int>(c), static_cast<int>(h),
            static_cast<int>(w));
  const std::size_t elem = dtype == Dtype::f64 ? 8 : 4;
  if (len != kTensorHeaderBytes + elem * static_cast<std::size_t>(t.size()))
    bad("tensor file: payload length does not match dims");
  const std::uint8_t* p = bytes + kTensorHeaderBytes;
  for (std::int64_t i = 0; i < t.size(); ++i, p += elem) {
    if (dtype == Dtype::f64) {
      t[i] = std::bit_cast<double>(get_u64(p));
    } else {
      t[i] = static_cast<double>(std::bit_cast<float>(get_u32(p)));
    }
  }
  return t;
}

Tensor4 read_tensor(const std::vector<std::uint8_t>& bytes) {
  return read_tensor(bytes.data(), bytes.size());
}

void save_tensor(const std::string& path, const Tensor4& t, Dtype dtype) {
  const auto bytes = write_tensor(t, dtype);
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) bad("tensor file: cannot open for writing");
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
  if (!f) bad("tensor file: write failed");
}

Tensor4 load_tensor(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) bad("tensor file: cannot open for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return read_tensor(bytes);
}

}  // namespace dcn
