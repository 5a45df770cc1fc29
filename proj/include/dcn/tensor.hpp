#pragma once

#include <cstdint>
#include <vector>

namespace dcn {

// Continuous 2-D location in feature-map pixel units.
// x is the column axis, y the row axis.
struct Point2 {
  double x = 0.0;
  double y = 0.0;
};

// Dense rank-4 tensor of doubles, laid out (n, c, h, w) row-major with w
// fastest. Element (n, c, y, x) sits at flat index ((n*C + c)*H + y)*W + x.
// Operations in this library treat tensors as immutable values; nothing
// mutates an argument.
class Tensor4 {
 public:
  Tensor4() = default;
  Tensor4(int n, int c, int h, int w);  // zero-filled; throws on bad dims

  int n() const { return n_; }
  int c() const { return c_; }
  int h() const { return h_; }
  int w() const { return w_; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  bool same_shape(const Tensor4& o) const {
    return n_ == o.n_ && c_ == o.c_ && h_ == o.h_ && w_ == o.w_;
  }

  std::int64_t flat(int n, int c, int y, int x) const {
    return ((static_cast<std::int64_t>(n) * c_ + c) * h_ + y) * w_ + x;
  }

  double at(int n, int c, int y, int x) const { return data_[flat(n, c, y, x)]; }
  double& at(int n, int c, int y, int x) { return data_[flat(n, c, y, x)]; }

  double operator[](std::int64_t i) const { return data_[i]; }
  double& operator[](std::int64_t i) { return data_[i]; }

  const double* data() const { return data_.data(); }
  double* data() { return data_.data(); }

  Tensor4& operator+=(const Tensor4& o);
  Tensor4& operator-=(const Tensor4& o);
  Tensor4& operator*=(double s);
  // this += s * o
  void add_scaled(const Tensor4& o, double s);

 private:
  int n_ = 0, c_ = 0, h_ = 0, w_ = 0;
  std::vector<double> data_;
};

Tensor4 zeros(int n, int c, int h, int w);

// Deterministic uniform fill in [lo, hi). Same seed, same tensor, on any
// platform (mt19937_64 with a fixed 53-bit mapping).
Tensor4 fill_random(int n, int c, int h, int w, std::uint64_t seed, double lo,
                    double hi);

double max_abs_diff(const Tensor4& a, const Tensor4& b);
bool all_finite(const Tensor4& t);
bool bitwise_equal(const Tensor4& a, const Tensor4& b);

namespace detail {
[[noreturn]] void fail(const char* what);
inline void require(bool cond, const char* what) {
  if (!cond) fail(what);
}
}  // namespace detail

}  // namespace dcn
