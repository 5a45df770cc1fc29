#include "dcn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace dcn {

namespace {

using oracle::FiniteDiffConfig;

double unit_uniform(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

int uniform_int(std::mt19937_64& rng, int lo, int hi) {  // inclusive
  return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1));
}

// Offset with integer part in [-2, 2] and a fraction that keeps every
// sampling coordinate clear of the bilinear kernel's integer kinks, with
// room for the +-h probes on top.
double safe_offset(std::mt19937_64& rng, const FiniteDiffConfig& cfg) {
  const double margin = cfg.kink_margin + 2.0 * cfg.h;
  const double frac = margin + (1.0 - 2.0 * margin) * unit_uniform(rng);
  return uniform_int(rng, -2, 2) + frac;
}

double max_elem_err(const Tensor4& analytic, const Tensor4& fd) {
  double worst = 0.0;
  for (std::int64_t i = 0; i < analytic.size(); ++i)
    worst = std::max(worst, oracle::rel_err(analytic[i], fd[i]));
  return worst;
}

double max_point_err(const std::vector<Point2>& analytic,
                     const std::vector<Point2>& fd) {
  double worst = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    worst = std::max(worst, oracle::rel_err(analytic[i].x, fd[i].x));
    worst = std::max(worst, oracle::rel_err(analytic[i].y, fd[i].y));
  }
  return worst;
}

double weighted_sum(const Tensor4& y, const Tensor4& r) {
  double acc = 0.0;
  for (std::int64_t i = 0; i < y.size(); ++i) acc += y[i] * r[i];
  return acc;
}

GradCheckRow conv_case(int index, std::mt19937_64& rng,
                       const FiniteDiffConfig& cfg) {
  ConvSpec spec;
  spec.kernel_h = spec.kernel_w = uniform_int(rng, 1, 3);
  spec.stride_y = spec.stride_x = uniform_int(rng, 1, 2);
  spec.pad_y = spec.pad_x = uniform_int(rng, 0, 1);
  spec.dilation = uniform_int(rng, 1, 2);
  const int ci = uniform_int(rng, 1, 2), co = uniform_int(rng, 1, 2);
  const int h = uniform_int(rng, 6, 8), w = uniform_int(rng, 6, 8);

  const Tensor4 x = fill_random(1, ci, h, w, rng(), -1.0, 1.0);
  ConvWeights wt = random_weights(co, ci, spec, rng());
  if (index % 2 == 0) {
    wt.bias.resize(static_cast<std::size_t>(co));
    for (double& b : wt.bias) b = 2.0 * unit_uniform(rng) - 1.0;
  }
  OffsetField off = OffsetField::zero_for(spec, 1, h, w);
  for (std::int64_t i = 0; i < off.data.size(); ++i)
    off.data[i] = safe_offset(rng, cfg);
  const Tensor4 r =
      fill_random(1, co, spec.out_h(h), spec.out_w(w), rng(), -1.0, 1.0);

  const DeformConvGrads g = deform_conv2d_backward(x, wt, off, spec, r);

  const Tensor4 fd_x = oracle::finite_diff_grad(
      [&](const Tensor4& probe) {
        return weighted_sum(deform_conv2d(probe, wt, off, spec), r);
      },
      x, cfg);
  const Tensor4 fd_w = oracle::finite_diff_grad(
      [&](const Tensor4& probe) {
        ConvWeights pw = wt;
        pw.w = probe;
        return weighted_sum(deform_conv2d(x, pw, off, spec), r);
      },
      wt.w, cfg);
  const Tensor4 fd_off = oracle::finite_diff_grad(
      [&](const Tensor4& probe) {
        return weighted_sum(deform_conv2d(x, wt, OffsetField{probe}, spec), r);
      },
      off.data, cfg);

  double werr = max_elem_err(g.d_weights, fd_w);
  if (!wt.bias.empty()) {
    // Bias enters linearly; fold its check into the weights column.
    Tensor4 bias_probe(co, 1, 1, 1);
    for (int c = 0; c < co; ++c) bias_probe.at(c, 0, 0, 0) = wt.bias[static_cast<std::size_t>(c)];
    const Tensor4 fd_b = oracle::finite_diff_grad(
        [&](const Tensor4& probe) {
          ConvWeights pw = wt;
          for (int c = 0; c < co; ++c) pw.bias[static_cast<std::size_t>(c)] = probe.at(c, 0, 0, 0);
          return weighted_sum(deform_conv2d(x, pw, off, spec), r);
        },
        bias_probe, cfg);
    for (int c = 0; c < co; ++c)
      werr = std::max(werr, oracle::rel_err(g.d_bias[static_cast<std::size_t>(c)],
                                            fd_b.at(c, 0, 0, 0)));
  }

  GradCheckRow row;
  row.case_index = index;
  row.max_rel_err = {max_elem_err(g.d_input, fd_x), werr,
                     max_elem_err(g.d_offsets, fd_off)};
  row.pass = *std::max_element(row.max_rel_err.begin(), row.max_rel_err.end()) <
             cfg.tol;
  return row;
}

struct RoiCase {
  Tensor4 x;
  Roi roi;
  int k = 0;
  BinOffsets off;
};

RoiCase make_roi_case(std::mt19937_64& rng, const FiniteDiffConfig& cfg,
                      int channels) {
  RoiCase c;
  c.k = uniform_int(rng, 1, 3);
  const int h = uniform_int(rng, 8, 11), w = uniform_int(rng, 8, 11);
  c.x = fill_random(1, channels, h, w, rng(), -1.0, 1.0);
  c.roi.batch = 0;
  c.roi.p0 = Point2{static_cast<double>(uniform_int(rng, 0, 3)),
                    static_cast<double>(uniform_int(rng, 0, 3))};
  c.roi.w = 2.5 + 4.0 * unit_uniform(rng);
  c.roi.h = 2.5 + 4.0 * unit_uniform(rng);
  std::vector<Point2> pixel(static_cast<std::size_t>(c.k) * c.k);
  for (Point2& p : pixel) p = Point2{safe_offset(rng, cfg), safe_offset(rng, cfg)};
  c.off = bin_offsets_from_pixel(std::move(pixel), c.roi, 0.1);
  return c;
}

// Shared by the plain and position-sensitive pooling checks; `pool` maps
// explicit bin offsets to the pooled output.
template <typename PoolFn, typename BackFn>
GradCheckRow roi_case(int index, const RoiCase& c, const Tensor4& r,
                      const FiniteDiffConfig& cfg, PoolFn pool, BackFn back) {
  const DeformRoiGrads g = back(c.x, c.off, r);

  const Tensor4 fd_x = oracle::finite_diff_grad(
      [&](const Tensor4& probe) { return weighted_sum(pool(probe, c.off), r); },
      c.x, cfg);
  const std::vector<Point2> fd_pix = oracle::finite_diff_grad_points(
      [&](const std::vector<Point2>& pts) {
        return weighted_sum(
            pool(c.x, bin_offsets_from_pixel(pts, c.roi, c.off.gamma)), r);
      },
      c.off.pixel, cfg);
  const std::vector<Point2> fd_norm = oracle::finite_diff_grad_points(
      [&](const std::vector<Point2>& pts) {
        return weighted_sum(
            pool(c.x, bin_offsets_from_normalized(pts, c.roi, c.off.gamma)), r);
      },
      c.off.normalized, cfg);

  GradCheckRow row;
  row.case_index = index;
  row.max_rel_err = {max_elem_err(g.d_input, fd_x),
                     max_point_err(g.d_pixel, fd_pix),
                     max_point_err(g.d_normalized, fd_norm)};
  row.pass = *std::max_element(row.max_rel_err.begin(), row.max_rel_err.end()) <
             cfg.tol;
  return row;
}

}  // namespace

GradCheckReport gradcheck_run(const std::string& op, int cases,
                              std::uint64_t seed,
                              const oracle::FiniteDiffConfig& cfg) {
  detail::require(cases >= 1, "need at least one case");
  GradCheckReport report;
  report.op = op;
  std::mt19937_64 rng(seed);

  for (int i = 0; i < cases; ++i) {
    GradCheckRow row;
    if (op == "deform-conv") {
      report.gradient_names = {"input", "weights", "offsets"};
      row = conv_case(i, rng, cfg);
    } else if (op == "deform-roi") {
      report.gradient_names = {"input", "bin_offsets", "normalized_offsets"};
      const RoiCase c = make_roi_case(rng, cfg, uniform_int(rng, 1, 3));
      const Tensor4 r = fill_random(1, c.x.c(), c.k, c.k, rng(), -1.0, 1.0);
      row = roi_case(
          i, c, r, cfg,
          [&c](const Tensor4& in, const BinOffsets& off) {
            return deform_roi_pool(in, c.roi, c.k, off);
          },
          [&c](const Tensor4& in, const BinOffsets& off, const Tensor4& up) {
            return deform_roi_pool_backward(in, c.roi, c.k, off, up);
          });
    } else if (op == "deform-ps-roi") {
      report.gradient_names = {"input", "bin_offsets", "normalized_offsets"};
      RoiCase c;  // channel count must be a class multiple of k*k
      const int k = uniform_int(rng, 1, 3);
      const int n_cls = uniform_int(rng, 1, 2);
      const int cls = uniform_int(rng, 0, n_cls - 1);
      c.k = k;
      const int h = uniform_int(rng, 8, 11), w = uniform_int(rng, 8, 11);
      c.x = fill_random(1, n_cls * k * k, h, w, rng(), -1.0, 1.0);
      c.roi.batch = 0;
      c.roi.p0 = Point2{static_cast<double>(uniform_int(rng, 0, 3)),
                        static_cast<double>(uniform_int(rng, 0, 3))};
      c.roi.w = 2.5 + 4.0 * unit_uniform(rng);
      c.roi.h = 2.5 + 4.0 * unit_uniform(rng);
      std::vector<Point2> pixel(static_cast<std::size_t>(k) * k);
      for (Point2& p : pixel)
        p = Point2{safe_offset(rng, cfg), safe_offset(rng, cfg)};
      c.off = bin_offsets_from_pixel(std::move(pixel), c.roi, 0.1);
      const Tensor4 r = fill_random(1, 1, k, k, rng(), -1.0, 1.0);
      row = roi_case(
          i, c, r, cfg,
          [&c, cls](const Tensor4& in, const BinOffsets& off) {
            return ps_pool_with_offsets(in, c.roi, c.k, cls, off);
          },
          [&c, cls](const Tensor4& in, const BinOffsets& off, const Tensor4& up) {
            return deform_ps_roi_pool_backward(in, c.roi, c.k, cls, off, up);
          });
    } else {
      detail::fail("unknown gradcheck op");
    }
    if (!row.pass) ++report.failures;
    for (double e : row.max_rel_err) report.worst = std::max(report.worst, e);
    report.rows.push_back(std::move(row));
  }
  return report;
}

}  // namespace dcn
