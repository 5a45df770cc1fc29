#include "dcn/tensor_file.hpp"

#include <cstdio>
#include <stdexcept>

#include "doctest.h"

using namespace dcn;

TEST_CASE("f64 round-trip is bit-exact") {
  Tensor4 t = fill_random(2, 3, 4, 5, 99, -10.0, 10.0);
  t[0] = -0.0;
  t[1] = 0x1.fffffffffffffp+3;
  CHECK(bitwise_equal(read_tensor(write_tensor(t)), t));
}

TEST_CASE("header is 28 bytes, little-endian, with the documented fields") {
  Tensor4 t(1, 1, 1, 2);
  t[0] = 1.0;
  t[1] = -2.0;
  const auto bytes = write_tensor(t);
  REQUIRE(bytes.size() == 28 + 16);
  const std::vector<std::uint8_t> expect{
      'D', 'T', 'E', 'N', 1, 1, 0, 0,          // magic, version, dtype f64
      4, 0, 0, 0,                              // ndim
      1, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 2, 0, 0, 0,  // dims
      0, 0, 0, 0, 0, 0, 0xf0, 0x3f,            // 1.0
      0, 0, 0, 0, 0, 0, 0,    0xc0};           // -2.0
  CHECK(bytes == expect);
}

TEST_CASE("f32 narrows but survives the trip for representable values") {
  Tensor4 t(1, 1, 1, 3);
  t[0] = 0.5;
  t[1] = -3.25;
  t[2] = 1.0 / 3.0;
  const Tensor4 back = read_tensor(write_tensor(t, Dtype::f32));
  CHECK(back[0] == 0.5);
  CHECK(back[1] == -3.25);
  CHECK(back[2] == doctest::Approx(1.0 / 3.0).epsilon(1e-7));
  CHECK(back[2] != t[2]);
}

TEST_CASE("malformed inputs are rejected") {
  const Tensor4 t(1, 1, 2, 2);
  auto bytes = write_tensor(t);

  SUBCASE("truncated header") {
    bytes.resize(10);
    CHECK_THROWS_AS(read_tensor(bytes), std::runtime_error);
  }
  SUBCASE("bad magic") {
    bytes[0] = 'X';
    CHECK_THROWS_AS(read_tensor(bytes), std::runtime_error);
  }
  SUBCASE("unsupported version") {
    bytes[4] = 9;
    CHECK_THROWS_AS(read_tensor(bytes), std::runtime_error);
  }
  SUBCASE("unsupported dtype") {
    bytes[5] = 7;
    CHECK_THROWS_AS(read_tensor(bytes), std::runtime_error);
  }
  SUBCASE("wrong ndim") {
    bytes[8] = 3;
    CHECK_THROWS_AS(read_tensor(bytes), std::runtime_error);
  }
  SUBCASE("short payload") {
    bytes.pop_back();
    CHECK_THROWS_AS(read_tensor(bytes), std::runtime_error);
  }
}

TEST_CASE("save and load through a file") {
  const char* path = "tensor_file_roundtrip.dten";
  const Tensor4 t = fill_random(1, 2, 3, 3, 5, -1.0, 1.0);
  save_tensor(path, t);
  CHECK(bitwise_equal(load_tensor(path), t));
  std::remove(path);
  CHECK_THROWS_AS(load_tensor(path), std::runtime_error);
}
