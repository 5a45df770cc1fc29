#include "dcn/tensor.hpp"

#include <cmath>
#include <cstring>
#include <limits>
#include <random>
#include <stdexcept>

namespace dcn {

namespace detail {
void fail(const char* what) { throw std::invalid_argument(what); }
}  // namespace detail

namespace {

std::size_t checked_length(int n, int c, int h, int w) {
  detail::require(n >= 1 && c >= 1 && h >= 1 && w >= 1,
                  "tensor dims must be >= 1");
  const std::size_t cap = std::numeric_limits<std::size_t>::max() / sizeof(double);
  std::size_t len = 1;
  for (std::size_t d : {std::size_t(n), std::size_t(c), std::size_t(h), std::size_t(w)}) {
    if (d != 0 && len > cap / d) throw std::overflow_error("tensor flat length overflows");
    len *= d;
  }
  return len;
}

}  // namespace

Tensor4::Tensor4(int n, int c, int h, int w)
    : n_(n), c_(c), h_(h), w_(w), data_(checked_length(n, c, h, w), 0.0) {}

Tensor4& Tensor4::operator+=(const Tensor4& o) {
  detail::require(same_shape(o), "tensor shape mismatch in +=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
  return *this;
}

Tensor4& Tensor4::operator-=(const Tensor4& o) {
  detail::require(same_shape(o), "tensor shape mismatch in -=");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
  return *this;
}

Tensor4& Tensor4::operator*=(double s) {
  for (double& v : data_) v *= s;
  return *this;
}

void Tensor4::add_scaled(const Tensor4& o, double s) {
  detail::require(same_shape(o), "tensor shape mismatch in add_scaled");
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += s * o.data_[i];
}

Tensor4 zeros(int n, int c, int h, int w) { return Tensor4(n, c, h, w); }

Tensor4 fill_random(int n, int c, int h, int w, std::uint64_t seed, double lo,
                    double hi) {
  detail::require(lo <= hi, "fill_random requires lo <= hi");
  Tensor4 t(n, c, h, w);
  std::mt19937_64 rng(seed);
  const double span = hi - lo;
  for (std::int64_t i = 0; i < t.size(); ++i) {
    // top 53 bits -> uniform double in [0, 1)
    const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
    t[i] = lo + span * u;
  }
  return t;
}

double max_abs_diff(const Tensor4& a, const Tensor4& b) {
  detail::require(a.same_shape(b), "tensor shape mismatch in max_abs_diff");
  double m = 0.0;
  for (std::int64_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

bool all_finite(const Tensor4& t) {
  for (std::int64_t i = 0; i < t.size(); ++i)
    if (!std::isfinite(t[i])) return false;
  return true;
}

bool bitwise_equal(const Tensor4& a, const Tensor4& b) {
  if (!a.same_shape(b)) return false;
  if (a.size() == 0) return true;
  return std::memcmp(a.data(), b.data(), sizeof(double) * a.size()) == 0;
}

}  // namespace dcn
