#include "dcn/pool.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <vector>

#include "dcn/gradcheck.hpp"
#include "dcn/oracle.hpp"
#include "doctest.h"

using namespace dcn;

namespace {

// 4x4 single-channel plane with values 1..16 row-major.
Tensor4 ramp4() {
  Tensor4 x(1, 1, 4, 4);
  for (int y = 0; y < 4; ++y)
    for (int xx = 0; xx < 4; ++xx) x.at(0, 0, y, xx) = y * 4 + xx + 1;
  return x;
}

Roi make_roi(int batch, double x0, double y0, double w, double h) {
  Roi r;
  r.batch = batch;
  r.p0 = Point2{x0, y0};
  r.w = w;
  r.h = h;
  return r;
}

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

Roi random_roi(std::mt19937_64& rng, int batches) {
  return make_roi(static_cast<int>(rng() % batches),
                  4.0 * unit_uniform(rng) - 1.5, 4.0 * unit_uniform(rng) - 1.5,
                  1.0 + 5.0 * unit_uniform(rng), 1.0 + 5.0 * unit_uniform(rng));
}

BinOffsets random_pixel_offsets(std::mt19937_64& rng, const Roi& roi, int k,
                                double scale) {
  std::vector<Point2> px(static_cast<std::size_t>(k) * k);
  for (Point2& p : px) {
    p.x = scale * (2.0 * unit_uniform(rng) - 1.0);
    p.y = scale * (2.0 * unit_uniform(rng) - 1.0);
  }
  return bin_offsets_from_pixel(std::move(px), roi, 0.1);
}

}  // namespace

TEST_CASE("bin spans follow the floor/ceil rule and overlap when w < k") {
  const Roi r5 = make_roi(0, 0, 0, 5, 5);
  CHECK(bin_span(0, 0, r5, 3).x_begin == 0);
  CHECK(bin_span(0, 0, r5, 3).x_end == 2);
  CHECK(bin_span(1, 0, r5, 3).x_begin == 1);
  CHECK(bin_span(1, 0, r5, 3).x_end == 4);
  CHECK(bin_span(2, 0, r5, 3).x_begin == 3);
  CHECK(bin_span(2, 0, r5, 3).x_end == 5);

  // Fractional extent smaller than k: spans shrink to single pixels and reuse
  // them across bins.
  const Roi r25 = make_roi(0, 0, 0, 2.5, 2.5);
  CHECK(bin_span(0, 0, r25, 3).x_end == 1);
  CHECK(bin_span(1, 0, r25, 3).x_begin == 0);
  CHECK(bin_span(1, 0, r25, 3).x_end == 2);
  CHECK(bin_span(2, 0, r25, 3).x_begin == 1);
  CHECK(bin_span(2, 0, r25, 3).x_end == 3);
}

TEST_CASE("every bin keeps at least one pixel") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 4);
    const Roi roi = make_roi(0, 0, 0, 1.0 + 11.0 * unit_uniform(rng),
                             1.0 + 11.0 * unit_uniform(rng));
    for (int j = 0; j < k; ++j)
      for (int i = 0; i < k; ++i) {
        const BinSpan s = bin_span(i, j, roi, k);
        CHECK(s.count() >= 1);
        CHECK(s.x_end <= static_cast<int>(std::ceil(roi.w)));
        CHECK(s.y_end <= static_cast<int>(std::ceil(roi.h)));
      }
  }
}

TEST_CASE("average pooling a 4x4 ramp into 2x2 bins") {
  const Tensor4 x = ramp4();
  const Tensor4 y = roi_pool(x, make_roi(0, 0, 0, 4, 4), 2);
  CHECK(y.at(0, 0, 0, 0) == 3.5);
  CHECK(y.at(0, 0, 0, 1) == 5.5);
  CHECK(y.at(0, 0, 1, 0) == 11.5);
  CHECK(y.at(0, 0, 1, 1) == 13.5);

  // Single-pixel bins index as (j, i) = (row, column).
  const Tensor4 z = roi_pool(x, make_roi(0, 1, 1, 2, 2), 2);
  CHECK(z.at(0, 0, 0, 0) == 6.0);
  CHECK(z.at(0, 0, 0, 1) == 7.0);
  CHECK(z.at(0, 0, 1, 0) == 10.0);
  CHECK(z.at(0, 0, 1, 1) == 11.0);
}

TEST_CASE("pixels outside the map average in as zeros") {
  const Tensor4 x = ramp4();
  const Tensor4 y = roi_pool(x, make_roi(0, -1, -1, 2, 2), 1);
  CHECK(y.at(0, 0, 0, 0) == x.at(0, 0, 0, 0) / 4.0);

  // Fully outside: all reads are zero but the count still divides.
  const Tensor4 far = roi_pool(x, make_roi(0, -30, -30, 3, 3), 2);
  for (std::int64_t i = 0; i < far.size(); ++i) CHECK(far[i] == 0.0);
}

TEST_CASE("fractional corners round to the nearest integer base") {
  const Tensor4 x = ramp4();
  const Tensor4 a = roi_pool(x, make_roi(0, 0.4, 0.4, 2, 2), 1);
  const Tensor4 b = roi_pool(x, make_roi(0, 0.6, 0.6, 2, 2), 1);
  CHECK(a.at(0, 0, 0, 0) == (1.0 + 2.0 + 5.0 + 6.0) / 4.0);
  CHECK(b.at(0, 0, 0, 0) == (6.0 + 7.0 + 10.0 + 11.0) / 4.0);
}

TEST_CASE("roi_pool agrees with the membership-test reference") {
  std::mt19937_64 rng(11);
  const Tensor4 x = fill_random(2, 3, 10, 12, 1234, -1.0, 1.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 3);
    const Roi roi = random_roi(rng, 2);
    const Tensor4 got = roi_pool(x, roi, k);
    const Tensor4 want = oracle::roi_pool_naive(x, roi, k);
    CHECK(max_abs_diff(got, want) < 1e-12);

    double lo = 0.0, hi = 0.0;
    for (std::int64_t i = 0; i < x.size(); ++i) {
      lo = std::min(lo, x[i]);
      hi = std::max(hi, x[i]);
    }
    for (std::int64_t i = 0; i < got.size(); ++i) {
      CHECK(got[i] >= lo - 1e-12);
      CHECK(got[i] <= hi + 1e-12);
    }
  }
}

TEST_CASE("zero bin offsets reduce deformable pooling to plain pooling") {
  std::mt19937_64 rng(13);
  const Tensor4 x = fill_random(2, 2, 10, 12, 99, -2.0, 2.0);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 3);
    const Roi roi = random_roi(rng, 2);
    CHECK(bitwise_equal(deform_roi_pool(x, roi, k, zero_bin_offsets(k)),
                        roi_pool(x, roi, k)));
  }
}

TEST_CASE("deformable pooling agrees with the membership-test reference") {
  std::mt19937_64 rng(17);
  const Tensor4 x = fill_random(1, 2, 10, 12, 55, -1.0, 1.0);
  for (int trial = 0; trial < 60; ++trial) {
    const int k = 1 + static_cast<int>(rng() % 3);
    const Roi roi = random_roi(rng, 1);
    const BinOffsets off = random_pixel_offsets(rng, roi, k, 2.0);
    CHECK(max_abs_diff(deform_roi_pool(x, roi, k, off),
                       oracle::deform_roi_pool_naive(x, roi, k, off)) < 1e-12);
  }
}

TEST_CASE("offset normalization is an exact elementwise scale") {
  const Roi roi = make_roi(0, 2, 3, 6.5, 4.25);
  const double gamma = 0.1;
  std::vector<Point2> n = {{0.3, -0.7}, {0.0, 1.25}, {-2.0, 0.125}, {0.9, 0.4}};
  const BinOffsets off = bin_offsets_from_normalized(n, roi, gamma);
  REQUIRE(off.k == 2);
  for (std::size_t b = 0; b < n.size(); ++b) {
    CHECK(off.pixel[b].x == gamma * n[b].x * roi.w);
    CHECK(off.pixel[b].y == gamma * n[b].y * roi.h);
    CHECK(off.normalized[b].x == n[b].x);
    CHECK(off.normalized[b].y == n[b].y);
  }

  // Doubling the RoI doubles every pixel offset exactly; power-of-two scale
  // factors commute with rounding.
  for (double s : {2.0, 4.0, 0.5}) {
    const Roi scaled = make_roi(0, 2, 3, s * roi.w, s * roi.h);
    const BinOffsets off2 = bin_offsets_from_normalized(n, scaled, gamma);
    for (std::size_t b = 0; b < n.size(); ++b) {
      CHECK(off2.pixel[b].x == s * off.pixel[b].x);
      CHECK(off2.pixel[b].y == s * off.pixel[b].y);
    }
  }
}

TEST_CASE("pixel and normalized constructors invert each other") {
  const Roi roi = make_roi(0, 0, 0, 5.0, 3.5);
  std::mt19937_64 rng(23);
  std::vector<Point2> px(9);
  for (Point2& p : px) {
    p.x = 3.0 * (2.0 * unit_uniform(rng) - 1.0);
    p.y = 3.0 * (2.0 * unit_uniform(rng) - 1.0);
  }
  const BinOffsets a = bin_offsets_from_pixel(px, roi, 0.1);
  const BinOffsets b = bin_offsets_from_normalized(a.normalized, roi, 0.1);
  for (std::size_t i = 0; i < px.size(); ++i) {
    CHECK(oracle::rel_err(a.pixel[i].x, px[i].x) == 0.0);
    CHECK(oracle::rel_err(b.pixel[i].x, px[i].x) < 1e-15);
    CHECK(oracle::rel_err(b.pixel[i].y, px[i].y) < 1e-15);
  }
  CHECK_THROWS_AS(bin_offsets_from_pixel(px, roi, 0.0), std::invalid_argument);
}

TEST_CASE("constant offsets shift bin averages linearly on a linear plane") {
  Tensor4 x(1, 2, 12, 12);
  for (int y = 0; y < 12; ++y)
    for (int xx = 0; xx < 12; ++xx) {
      x.at(0, 0, y, xx) = 2.0 * xx + 3.0 * y;
      x.at(0, 1, y, xx) = -1.0 * xx + 0.5 * y;
    }
  const Roi roi = make_roi(0, 4, 4, 3, 3);
  const int k = 3;
  const Point2 d{0.75, -0.5};
  std::vector<Point2> px(9, d);
  const BinOffsets off = bin_offsets_from_pixel(std::move(px), roi, 0.1);
  const Tensor4 plain = roi_pool(x, roi, k);
  const Tensor4 moved = deform_roi_pool(x, roi, k, off);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < k; ++i) {
      CHECK(moved.at(0, 0, j, i) ==
            doctest::Approx(plain.at(0, 0, j, i) + 2.0 * d.x + 3.0 * d.y)
                .epsilon(1e-12));
      CHECK(moved.at(0, 1, j, i) ==
            doctest::Approx(plain.at(0, 1, j, i) - d.x + 0.5 * d.y)
                .epsilon(1e-12));
    }
}

TEST_CASE("position-sensitive pooling reads channel cls*k*k + i*k + j") {
  const int k = 3, n_cls = 2;
  Tensor4 scores(1, n_cls * k * k, 6, 6);
  for (int c = 0; c < scores.c(); ++c)
    for (int y = 0; y < 6; ++y)
      for (int xx = 0; xx < 6; ++xx) scores.at(0, c, y, xx) = c;
  const Roi roi = make_roi(0, 1, 1, 4, 4);
  for (int cls = 0; cls < n_cls; ++cls) {
    const Tensor4 y = ps_roi_pool(scores, roi, k, cls);
    REQUIRE(y.c() == 1);
    for (int j = 0; j < k; ++j)
      for (int i = 0; i < k; ++i)
        CHECK(y.at(0, 0, j, i) == cls * k * k + i * k + j);
  }
}

TEST_CASE("ps pooling variants agree with the membership-test references") {
  std::mt19937_64 rng(29);
  const int k = 3, n_cls = 2;
  const Tensor4 scores = fill_random(1, n_cls * k * k, 9, 11, 77, -1.0, 1.0);
  for (int trial = 0; trial < 40; ++trial) {
    const Roi roi = random_roi(rng, 1);
    const int cls = static_cast<int>(rng() % n_cls);
    CHECK(max_abs_diff(ps_roi_pool(scores, roi, k, cls),
                       oracle::ps_roi_pool_naive(scores, roi, k, cls)) < 1e-12);
    const BinOffsets off = random_pixel_offsets(rng, roi, k, 2.0);
    CHECK(max_abs_diff(
              ps_pool_with_offsets(scores, roi, k, cls, off),
              oracle::ps_pool_with_offsets_naive(scores, roi, k, cls, off)) <
          1e-12);
    CHECK(bitwise_equal(ps_pool_with_offsets(scores, roi, k, cls,
                                             zero_bin_offsets(k)),
                        ps_roi_pool(scores, roi, k, cls)));
  }
}

TEST_CASE("full deformable ps pooling pools its own offsets as pseudo-classes") {
  const int k = 2;
  const Tensor4 scores = fill_random(1, k * k, 10, 10, 31, -1.0, 1.0);
  const Roi roi = make_roi(0, 2, 3, 5, 4);

  // Constant dyadic offset fields: PS-pooling a constant recovers it exactly,
  // so the composed result must match explicitly-built bin offsets bit for bit.
  const double ny = 0.25, nx = -0.5;
  Tensor4 fields(1, 2 * k * k, 10, 10);
  for (int c = 0; c < k * k; ++c)
    for (int y = 0; y < 10; ++y)
      for (int xx = 0; xx < 10; ++xx) {
        fields.at(0, c, y, xx) = ny;          // pseudo-class 0: y offsets
        fields.at(0, k * k + c, y, xx) = nx;  // pseudo-class 1: x offsets
      }
  const auto [pooled, off] = deform_ps_roi_pool(scores, fields, roi, k, 0, 0.1);
  const BinOffsets want =
      bin_offsets_from_normalized(std::vector<Point2>(k * k, Point2{nx, ny}),
                                  roi, 0.1);
  for (int b = 0; b < k * k; ++b) {
    CHECK(off.normalized[b].x == nx);
    CHECK(off.normalized[b].y == ny);
    CHECK(off.pixel[b].x == want.pixel[b].x);
    CHECK(off.pixel[b].y == want.pixel[b].y);
  }
  CHECK(bitwise_equal(pooled, ps_pool_with_offsets(scores, roi, k, 0, want)));

  // Zero fields reduce to plain ps pooling.
  const auto [plain, zoff] =
      deform_ps_roi_pool(scores, zeros(1, 2 * k * k, 10, 10), roi, k, 0, 0.1);
  CHECK(bitwise_equal(plain, ps_roi_pool(scores, roi, k, 0)));
  for (const Point2& p : zoff.pixel) {
    CHECK(p.x == 0.0);
    CHECK(p.y == 0.0);
  }
}

TEST_CASE("per-class offset fields select the slice of the requested class") {
  const int k = 2, n_cls = 3;
  const Tensor4 scores = fill_random(1, n_cls * k * k, 10, 10, 37, -1.0, 1.0);
  const Roi roi = make_roi(0, 2, 2, 5, 5);
  const double ny = 0.5, nx = 0.25;

  Tensor4 fields(1, 2 * n_cls * k * k, 10, 10);
  for (std::int64_t i = 0; i < fields.size(); ++i) fields[i] = 9.0;  // decoys
  const int cls = 1;
  for (int c = 0; c < k * k; ++c)
    for (int y = 0; y < 10; ++y)
      for (int xx = 0; xx < 10; ++xx) {
        fields.at(0, (2 * cls) * k * k + c, y, xx) = ny;
        fields.at(0, (2 * cls + 1) * k * k + c, y, xx) = nx;
      }
  const auto [pooled, off] =
      deform_ps_roi_pool(scores, fields, roi, k, cls, 0.1, true);
  for (int b = 0; b < k * k; ++b) {
    CHECK(off.normalized[b].x == nx);
    CHECK(off.normalized[b].y == ny);
  }
  const BinOffsets want =
      bin_offsets_from_normalized(std::vector<Point2>(k * k, Point2{nx, ny}),
                                  roi, 0.1);
  CHECK(bitwise_equal(pooled, ps_pool_with_offsets(scores, roi, k, cls, want)));
}

TEST_CASE("zero fc weights leave deformable roi pooling at the plain result") {
  const int k = 3;
  const Tensor4 x = fill_random(1, 4, 10, 10, 41, -1.0, 1.0);
  const Roi roi = make_roi(0, 1.5, 2.0, 6.0, 5.0);
  const Tensor4 pooled = roi_pool(x, roi, k);
  const FcWeights fc = zero_fc(2 * k * k, 4 * k * k);
  const BinOffsets off = roi_offset_branch(pooled, fc, roi, 0.1);
  for (const Point2& p : off.pixel) {
    CHECK(p.x == 0.0);
    CHECK(p.y == 0.0);
  }
  CHECK(bitwise_equal(deform_roi_pool(x, roi, k, off), pooled));
}

TEST_CASE("fc branch is a plain matrix product over (c, j, i) features") {
  const int k = 2, c = 3;
  const Tensor4 pooled = fill_random(1, c, k, k, 43, -1.0, 1.0);
  const Roi roi = make_roi(0, 0, 0, 4, 8);
  FcWeights fc = zero_fc(2 * k * k, c * k * k);
  // One-hot rows: output r copies flattened feature r in (c, j, i) order.
  for (int r = 0; r < fc.out_dim; ++r)
    fc.w[static_cast<std::size_t>(r) * fc.in_dim + (r % fc.in_dim)] = 1.0;
  const BinOffsets off = roi_offset_branch(pooled, fc, roi, 0.1);
  // Row 2b is the y offset and 2b+1 the x offset of bin b = j*k+i.
  for (int b = 0; b < k * k; ++b) {
    const int ry = 2 * b, rx = 2 * b + 1;
    const auto flat = [&](int row) {
      const int ch = row / (k * k), rem = row % (k * k);
      return pooled.at(0, ch, rem / k, rem % k);
    };
    CHECK(off.normalized[b].y == flat(ry % fc.in_dim));
    CHECK(off.normalized[b].x == flat(rx % fc.in_dim));
    CHECK(off.pixel[b].y == 0.1 * off.normalized[b].y * roi.h);
    CHECK(off.pixel[b].x == 0.1 * off.normalized[b].x * roi.w);
  }
}

TEST_CASE("pooling gradients pass the shared checker") {
  oracle::FiniteDiffConfig cfg;
  const GradCheckReport roi = gradcheck_run("deform-roi", 6, 515151, cfg);
  CHECK(roi.failures == 0);
  const GradCheckReport ps = gradcheck_run("deform-ps-roi", 6, 616161, cfg);
  CHECK(ps.failures == 0);
}

TEST_CASE("backward scatters exactly the forward's bilinear taps") {
  // A single-bin RoI on a tiny map: the input gradient of sum(output) must be
  // inv_n at each tap weight position.
  const Tensor4 x = fill_random(1, 1, 6, 6, 47, -1.0, 1.0);
  const Roi roi = make_roi(0, 2, 2, 1, 1);
  const BinOffsets off = bin_offsets_from_pixel({Point2{0.5, 0.25}}, roi, 0.1);
  Tensor4 d_out(1, 1, 1, 1);
  d_out[0] = 1.0;
  const DeformRoiGrads g = deform_roi_pool_backward(x, roi, 1, off, d_out);
  // Sample point (2.5, 2.25): four taps with bilinear weights.
  CHECK(g.d_input.at(0, 0, 2, 2) == doctest::Approx(0.75 * 0.5));
  CHECK(g.d_input.at(0, 0, 2, 3) == doctest::Approx(0.75 * 0.5));
  CHECK(g.d_input.at(0, 0, 3, 2) == doctest::Approx(0.25 * 0.5));
  CHECK(g.d_input.at(0, 0, 3, 3) == doctest::Approx(0.25 * 0.5));
  double total = 0.0;
  for (std::int64_t i = 0; i < g.d_input.size(); ++i) total += g.d_input[i];
  CHECK(total == doctest::Approx(1.0));
}

TEST_CASE("batched pooling stacks the per-roi results in list order") {
  std::mt19937_64 rng(53);
  const Tensor4 x = fill_random(3, 2, 10, 12, 59, -1.0, 1.0);
  std::vector<Roi> rois;
  std::vector<BinOffsets> offs;
  const int k = 2;
  for (int r = 0; r < 7; ++r) {
    rois.push_back(random_roi(rng, 3));
    offs.push_back(random_pixel_offsets(rng, rois.back(), k, 1.5));
  }
  const Tensor4 plain = roi_pool_batch(x, rois, k);
  const Tensor4 deform = deform_roi_pool_batch(x, rois, k, offs);
  REQUIRE(plain.n() == 7);
  REQUIRE(deform.n() == 7);
  for (int r = 0; r < 7; ++r) {
    const Tensor4 one = roi_pool(x, rois[static_cast<std::size_t>(r)], k);
    const Tensor4 two =
        deform_roi_pool(x, rois[static_cast<std::size_t>(r)], k,
                        offs[static_cast<std::size_t>(r)]);
    for (int c = 0; c < 2; ++c)
      for (int j = 0; j < k; ++j)
        for (int i = 0; i < k; ++i) {
          CHECK(plain.at(r, c, j, i) == one.at(0, c, j, i));
          CHECK(deform.at(r, c, j, i) == two.at(0, c, j, i));
        }
  }
}

TEST_CASE("malformed rois and mismatched shapes are rejected") {
  const Tensor4 x = ramp4();
  CHECK_THROWS_AS(roi_pool(x, make_roi(0, 0, 0, 0.5, 2), 2),
                  std::invalid_argument);
  CHECK_THROWS_AS(roi_pool(x, make_roi(1, 0, 0, 2, 2), 2),
                  std::invalid_argument);
  CHECK_THROWS_AS(roi_pool(x, make_roi(-1, 0, 0, 2, 2), 2),
                  std::invalid_argument);
  Roi nan_roi = make_roi(0, 0, 0, 2, 2);
  nan_roi.p0.x = std::nan("");
  CHECK_THROWS_AS(roi_pool(x, nan_roi, 2), std::invalid_argument);
  CHECK_THROWS_AS(roi_pool(x, make_roi(0, 0, 0, 2, 2), 0),
                  std::invalid_argument);

  // Offset count must match k*k.
  CHECK_THROWS_AS(deform_roi_pool(x, make_roi(0, 0, 0, 3, 3), 2,
                                  zero_bin_offsets(3)),
                  std::invalid_argument);

  // PS channel count must be divisible into n_cls complete k*k blocks.
  const Tensor4 scores = fill_random(1, 8, 6, 6, 61, -1.0, 1.0);
  CHECK_THROWS_AS(ps_roi_pool(scores, make_roi(0, 0, 0, 4, 4), 3, 0),
                  std::invalid_argument);
  CHECK_THROWS_AS(ps_roi_pool(scores, make_roi(0, 0, 0, 4, 4), 2, 2),
                  std::invalid_argument);
}
