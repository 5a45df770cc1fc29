#pragma once

#include <array>
#include <cstdint>

#include "dcn/tensor.hpp"

namespace dcn {

// Read-only view of one (n, c) slice of a Tensor4.
struct PlaneView {
  const double* values = nullptr;
  int height = 0;
  int width = 0;

  double at(int y, int x) const {
    return values[static_cast<std::int64_t>(y) * width + x];
  }
  bool inside(int y, int x) const {
    return y >= 0 && y < height && x >= 0 && x < width;
  }
};

PlaneView plane(const Tensor4& t, int n, int c);

// One-dimensional bilinear kernel g(a, b) = max(0, 1 - |a - b|).
inline double bilinear_g(double a, double b) {
  const double d = a > b ? a - b : b - a;
  return d < 1.0 ? 1.0 - d : 0.0;
}

// Value of the plane at a fractional point: sum of G(q, p) * x(q) over the
// in-plane lattice. Fades linearly to 0 in the one-pixel border band and is
// 0 beyond; at an in-range lattice point the stored value comes back
// bit-exactly.
double sample_bilinear(const PlaneView& plane, Point2 p);

// Derivatives of sample_bilinear w.r.t. the point, plus the per-lattice-point
// weights (d value / d x(q)). Coordinates decompose as floor(p) + frac with
// frac in [0, 1), so derivatives at integer coordinates are the right-sided
// ones. Taps cover the in-plane corners of the floor cell; their weights sum
// to 1 whenever p lies in [0, size-1] on both axes.
struct SampleGrad {
  double d_dx = 0.0;
  double d_dy = 0.0;
  struct Tap {
    int x = 0;
    int y = 0;
    double weight = 0.0;
  };
  std::array<Tap, 4> taps{};
  int num_taps = 0;
};

double sample_bilinear_grad(const PlaneView& plane, Point2 p, SampleGrad& grad);

}  // namespace dcn
