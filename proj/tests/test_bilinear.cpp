#include "dcn/bilinear.hpp"

#include <cmath>
#include <random>

#include "dcn/oracle.hpp"
#include "dcn/tensor.hpp"
#include "doctest.h"

using namespace dcn;

namespace {

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * (static_cast<double>(rng() >> 11) * 0x1.0p-53);
}

}  // namespace

TEST_CASE("kernel weight is max(0, 1 - |a - b|)") {
  CHECK(bilinear_g(2.0, 2.0) == 1.0);
  CHECK(bilinear_g(1.25, 2.0) == doctest::Approx(0.25));
  CHECK(bilinear_g(2.0, 1.25) == doctest::Approx(0.25));
  CHECK(bilinear_g(0.0, 1.0) == 0.0);
  CHECK(bilinear_g(5.0, 1.0) == 0.0);
}

TEST_CASE("lattice points come back bit-exactly") {
  Tensor4 t = fill_random(1, 1, 6, 7, 3, -5.0, 5.0);
  t.at(0, 0, 2, 3) = -0.0;
  const PlaneView pl = plane(t, 0, 0);
  for (int y = 0; y < 6; ++y) {
    for (int x = 0; x < 7; ++x) {
      const double got = sample_bilinear(pl, Point2{double(x), double(y)});
      CHECK(std::signbit(got) == std::signbit(t.at(0, 0, y, x)));
      CHECK(got == t.at(0, 0, y, x));
    }
  }
}

TEST_CASE("interior interpolation on a known cell") {
  // plane [[0,1],[0,1]]: value ramps along x, is flat along y
  Tensor4 t(1, 1, 2, 2);
  t.at(0, 0, 0, 1) = 1.0;
  t.at(0, 0, 1, 1) = 1.0;
  const PlaneView pl = plane(t, 0, 0);
  CHECK(sample_bilinear(pl, Point2{0.5, 0.5}) == 0.5);

  SampleGrad g;
  CHECK(sample_bilinear_grad(pl, Point2{0.5, 0.5}, g) == 0.5);
  CHECK(g.d_dx == doctest::Approx(1.0));
  CHECK(g.d_dy == doctest::Approx(0.0));
}

TEST_CASE("outside the one-pixel border band everything is zero") {
  const Tensor4 t = fill_random(1, 1, 4, 4, 8, 1.0, 2.0);
  const PlaneView pl = plane(t, 0, 0);
  CHECK(sample_bilinear(pl, Point2{-1.0, 2.0}) == 0.0);
  CHECK(sample_bilinear(pl, Point2{4.0, 2.0}) == 0.0);
  CHECK(sample_bilinear(pl, Point2{2.0, -3.5}) == 0.0);
  CHECK(sample_bilinear(pl, Point2{100.0, 100.0}) == 0.0);

  // inside the band the value fades linearly toward zero
  CHECK(sample_bilinear(pl, Point2{-0.75, 1.0}) ==
        doctest::Approx(0.25 * t.at(0, 0, 1, 0)));
}

TEST_CASE("partition of unity and agreement with the full-sum oracle") {
  const Tensor4 t = fill_random(1, 2, 9, 8, 21, -3.0, 3.0);
  std::mt19937_64 rng(77);
  for (int i = 0; i < 1000; ++i) {
    const PlaneView pl = plane(t, 0, static_cast<int>(rng() % 2));
    const Point2 p{uniform(rng, -2.0, 9.0), uniform(rng, -2.0, 10.0)};

    const double fast = sample_bilinear(pl, p);
    CHECK(oracle::rel_err(fast, oracle::sample_naive(pl, p)) < 1e-14);

    SampleGrad g;
    CHECK(sample_bilinear_grad(pl, p, g) == fast);
    if (p.x >= 0.0 && p.x <= pl.width - 1 && p.y >= 0.0 && p.y <= pl.height - 1) {
      double wsum = 0.0;
      for (int ti = 0; ti < g.num_taps; ++ti) wsum += g.taps[ti].weight;
      CHECK(std::abs(wsum - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("sampling is linear in the plane values") {
  const Tensor4 a = fill_random(1, 1, 5, 5, 31, -1.0, 1.0);
  const Tensor4 b = fill_random(1, 1, 5, 5, 32, -1.0, 1.0);
  Tensor4 mix = a;
  mix *= 0.75;
  mix.add_scaled(b, -1.5);
  std::mt19937_64 rng(33);
  for (int i = 0; i < 1000; ++i) {
    const Point2 p{uniform(rng, -1.5, 5.5), uniform(rng, -1.5, 5.5)};
    const double lhs = sample_bilinear(plane(mix, 0, 0), p);
    const double rhs = 0.75 * sample_bilinear(plane(a, 0, 0), p) -
                       1.5 * sample_bilinear(plane(b, 0, 0), p);
    CHECK(std::abs(lhs - rhs) < 1e-12);
  }
}

TEST_CASE("coordinate gradients match finite differences off the lattice") {
  const Tensor4 t = fill_random(1, 1, 7, 7, 55, -2.0, 2.0);
  const PlaneView pl = plane(t, 0, 0);
  std::mt19937_64 rng(56);
  const double h = 1e-6;
  for (int i = 0; i < 200; ++i) {
    // keep fractions away from integer kinks
    const Point2 p{(rng() % 6) + uniform(rng, 0.01, 0.99),
                   (rng() % 6) + uniform(rng, 0.01, 0.99)};
    SampleGrad g;
    sample_bilinear_grad(pl, p, g);
    const double fx = (sample_bilinear(pl, Point2{p.x + h, p.y}) -
                       sample_bilinear(pl, Point2{p.x - h, p.y})) /
                      (2 * h);
    const double fy = (sample_bilinear(pl, Point2{p.x, p.y + h}) -
                       sample_bilinear(pl, Point2{p.x, p.y - h})) /
                      (2 * h);
    CHECK(oracle::rel_err(g.d_dx, fx) < 1e-8);
    CHECK(oracle::rel_err(g.d_dy, fy) < 1e-8);
  }
}

TEST_CASE("tap weights are the value gradients w.r.t. stored pixels") {
  Tensor4 t = fill_random(1, 1, 4, 4, 60, -1.0, 1.0);
  const Point2 p{1.3, 2.6};
  SampleGrad g;
  sample_bilinear_grad(plane(t, 0, 0), p, g);
  REQUIRE(g.num_taps == 4);
  for (int ti = 0; ti < g.num_taps; ++ti) {
    Tensor4 bumped = t;
    bumped.at(0, 0, g.taps[ti].y, g.taps[ti].x) += 1.0;
    const double delta = sample_bilinear(plane(bumped, 0, 0), p) -
                         sample_bilinear(plane(t, 0, 0), p);
    CHECK(std::abs(delta - g.taps[ti].weight) < 1e-12);
  }
}
