#include "dcn/oracle.hpp"

#include <algorithm>
#include <cmath>

namespace dcn::oracle {

double rel_err(double a, double b) {
  const double scale = std::max({1.0, std::abs(a), std::abs(b)});
  return std::abs(a - b) / scale;
}

Tensor4 conv2d_naive(const Tensor4& x, const ConvWeights& w,
                     const ConvSpec& spec) {
  detail::require(x.c() == w.in_channels(), "input channels must match weights");
  const int ph = x.h() + 2 * spec.pad_y;
  const int pw = x.w() + 2 * spec.pad_x;
  Tensor4 padded(x.n(), x.c(), ph, pw);
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int y = 0; y < x.h(); ++y)
        for (int xx = 0; xx < x.w(); ++xx)
          padded.at(n, c, y + spec.pad_y, xx + spec.pad_x) = x.at(n, c, y, xx);

  // Count valid filter placements on the padded image directly.
  const int reach_y = spec.dilation * (spec.kernel_h - 1);
  const int reach_x = spec.dilation * (spec.kernel_w - 1);
  detail::require(ph > reach_y && pw > reach_x, "kernel does not fit the input");
  const int out_h = (ph - 1 - reach_y) / spec.stride_y + 1;
  const int out_w = (pw - 1 - reach_x) / spec.stride_x + 1;

  Tensor4 y(x.n(), w.out_channels(), out_h, out_w);
  for (int n = 0; n < x.n(); ++n) {
    for (int co = 0; co < w.out_channels(); ++co) {
      for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox) {
          double acc = w.bias.empty() ? 0.0 : w.bias[static_cast<std::size_t>(co)];
          for (int ky = 0; ky < spec.kernel_h; ++ky)
            for (int kx = 0; kx < spec.kernel_w; ++kx)
              for (int ci = 0; ci < x.c(); ++ci)
                acc += w.w.at(co, ci, ky, kx) *
                       padded.at(n, ci, oy * spec.stride_y + ky * spec.dilation,
                                 ox * spec.stride_x + kx * spec.dilation);
          y.at(n, co, oy, ox) = acc;
        }
      }
    }
  }
  return y;
}

double sample_naive(const PlaneView& plane, Point2 p) {
  double acc = 0.0;
  for (int qy = 0; qy < plane.height; ++qy) {
    for (int qx = 0; qx < plane.width; ++qx) {
      const double gx = 1.0 - std::abs(p.x - qx);
      const double gy = 1.0 - std::abs(p.y - qy);
      if (gx > 0.0 && gy > 0.0) acc += gx * gy * plane.at(qy, qx);
    }
  }
  return acc;
}

Tensor4 deform_conv2d_naive(const Tensor4& x, const ConvWeights& w,
                            const OffsetField& offsets, const ConvSpec& spec) {
  const int out_h = spec.out_h(x.h());
  const int out_w = spec.out_w(x.w());
  Tensor4 y(x.n(), w.out_channels(), out_h, out_w);
  for (int n = 0; n < x.n(); ++n) {
    for (int co = 0; co < w.out_channels(); ++co) {
      for (int oy = 0; oy < out_h; ++oy) {
        for (int ox = 0; ox < out_w; ++ox) {
          double acc = w.bias.empty() ? 0.0 : w.bias[static_cast<std::size_t>(co)];
          for (int ky = 0; ky < spec.kernel_h; ++ky) {
            for (int kx = 0; kx < spec.kernel_w; ++kx) {
              const Point2 d = offsets.at(n, ky * spec.kernel_w + kx, oy, ox);
              const Point2 p{
                  ox * spec.stride_x - spec.pad_x + kx * spec.dilation + d.x,
                  oy * spec.stride_y - spec.pad_y + ky * spec.dilation + d.y};
              for (int ci = 0; ci < x.c(); ++ci)
                acc += w.w.at(co, ci, ky, kx) * sample_naive(plane(x, n, ci), p);
            }
          }
          y.at(n, co, oy, ox) = acc;
        }
      }
    }
  }
  return y;
}

namespace {

// Integer pixels belonging to width-bin i of a k-way split of extent e:
// i*e/k - 1 < p < (i+1)*e/k, collected by scanning a generous range.
std::vector<int> bin_members(int i, double extent, int k) {
  std::vector<int> members;
  const double lo = i * extent / k;
  const double hi = (i + 1) * extent / k;
  for (int p = -1; p <= static_cast<int>(std::ceil(extent)) + 1; ++p)
    if (p > lo - 1.0 && p < hi) members.push_back(p);
  return members;
}

double padded_read(const Tensor4& t, int n, int c, int y, int x) {
  if (y < 0 || y >= t.h() || x < 0 || x >= t.w()) return 0.0;
  return t.at(n, c, y, x);
}

}  // namespace

Tensor4 roi_pool_naive(const Tensor4& x, const Roi& roi, int k) {
  Tensor4 y(1, x.c(), k, k);
  const int bx = static_cast<int>(std::llround(roi.p0.x));
  const int by = static_cast<int>(std::llround(roi.p0.y));
  for (int j = 0; j < k; ++j) {
    const std::vector<int> ys = bin_members(j, roi.h, k);
    for (int i = 0; i < k; ++i) {
      const std::vector<int> xs = bin_members(i, roi.w, k);
      for (int c = 0; c < x.c(); ++c) {
        double acc = 0.0;
        for (int py : ys)
          for (int px : xs) acc += padded_read(x, roi.batch, c, by + py, bx + px);
        y.at(0, c, j, i) = acc / (ys.size() * xs.size());
      }
    }
  }
  return y;
}

Tensor4 deform_roi_pool_naive(const Tensor4& x, const Roi& roi, int k,
                              const BinOffsets& offsets) {
  Tensor4 y(1, x.c(), k, k);
  const int bx = static_cast<int>(std::llround(roi.p0.x));
  const int by = static_cast<int>(std::llround(roi.p0.y));
  for (int j = 0; j < k; ++j) {
    const std::vector<int> ys = bin_members(j, roi.h, k);
    for (int i = 0; i < k; ++i) {
      const std::vector<int> xs = bin_members(i, roi.w, k);
      const Point2 d = offsets.pixel_at(i, j);
      for (int c = 0; c < x.c(); ++c) {
        double acc = 0.0;
        for (int py : ys)
          for (int px : xs)
            acc += sample_naive(plane(x, roi.batch, c),
                                Point2{bx + px + d.x, by + py + d.y});
        y.at(0, c, j, i) = acc / (ys.size() * xs.size());
      }
    }
  }
  return y;
}

Tensor4 ps_roi_pool_naive(const Tensor4& scores, const Roi& roi, int k,
                          int cls) {
  Tensor4 y(1, 1, k, k);
  const int bx = static_cast<int>(std::llround(roi.p0.x));
  const int by = static_cast<int>(std::llround(roi.p0.y));
  for (int j = 0; j < k; ++j) {
    const std::vector<int> ys = bin_members(j, roi.h, k);
    for (int i = 0; i < k; ++i) {
      const std::vector<int> xs = bin_members(i, roi.w, k);
      const int c = cls * k * k + i * k + j;
      double acc = 0.0;
      for (int py : ys)
        for (int px : xs) acc += padded_read(scores, roi.batch, c, by + py, bx + px);
      y.at(0, 0, j, i) = acc / (ys.size() * xs.size());
    }
  }
  return y;
}

Tensor4 ps_pool_with_offsets_naive(const Tensor4& scores, const Roi& roi,
                                   int k, int cls, const BinOffsets& offsets) {
  Tensor4 y(1, 1, k, k);
  const int bx = static_cast<int>(std::llround(roi.p0.x));
  const int by = static_cast<int>(std::llround(roi.p0.y));
  for (int j = 0; j < k; ++j) {
    const std::vector<int> ys = bin_members(j, roi.h, k);
    for (int i = 0; i < k; ++i) {
      const std::vector<int> xs = bin_members(i, roi.w, k);
      const Point2 d = offsets.pixel_at(i, j);
      const int c = cls * k * k + i * k + j;
      double acc = 0.0;
      for (int py : ys)
        for (int px : xs)
          acc += sample_naive(plane(scores, roi.batch, c),
                              Point2{bx + px + d.x, by + py + d.y});
      y.at(0, 0, j, i) = acc / (ys.size() * xs.size());
    }
  }
  return y;
}

Tensor4 finite_diff_grad(const std::function<double(const Tensor4&)>& f,
                         const Tensor4& x, const FiniteDiffConfig& cfg) {
  Tensor4 probe = x;
  Tensor4 g(x.n(), x.c(), x.h(), x.w());
  for (std::int64_t i = 0; i < x.size(); ++i) {
    const double v = probe[i];
    probe[i] = v + cfg.h;
    const double fp = f(probe);
    probe[i] = v - cfg.h;
    const double fm = f(probe);
    probe[i] = v;
    detail::require(std::isfinite(fp) && std::isfinite(fm),
                    "function under finite differencing must stay finite");
    g[i] = (fp - fm) / (2.0 * cfg.h);
  }
  return g;
}

std::vector<Point2> finite_diff_grad_points(
    const std::function<double(const std::vector<Point2>&)>& f,
    const std::vector<Point2>& pts, const FiniteDiffConfig& cfg) {
  std::vector<Point2> probe = pts;
  std::vector<Point2> g(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (int axis = 0; axis < 2; ++axis) {
      double& slot = axis == 0 ? probe[i].x : probe[i].y;
      const double v = slot;
      slot = v + cfg.h;
      const double fp = f(probe);
      slot = v - cfg.h;
      const double fm = f(probe);
      slot = v;
      detail::require(std::isfinite(fp) && std::isfinite(fm),
                      "function under finite differencing must stay finite");
      (axis == 0 ? g[i].x : g[i].y) = (fp - fm) / (2.0 * cfg.h);
    }
  }
  return g;
}

namespace {

void expand_trace(const std::vector<TraceLayer>& layers, std::size_t li,
                  Point2 pos, std::vector<Point2>& out) {
  if (li == layers.size()) {
    out.push_back(pos);
    return;
  }
  const TraceLayer& layer = layers[li];
  const ConvSpec& s = layer.spec;
  for (int ky = 0; ky < s.kernel_h; ++ky) {
    for (int kx = 0; kx < s.kernel_w; ++kx) {
      Point2 d{};
      if (!layer.offsets.data.empty()) {
        const int tap = ky * s.kernel_w + kx;
        d.y = sample_naive(plane(layer.offsets.data, 0, 2 * tap), pos);
        d.x = sample_naive(plane(layer.offsets.data, 0, 2 * tap + 1), pos);
      }
      expand_trace(layers, li + 1,
                   Point2{pos.x * s.stride_x - s.pad_x + kx * s.dilation + d.x,
                          pos.y * s.stride_y - s.pad_y + ky * s.dilation + d.y},
                   out);
    }
  }
}

}  // namespace

std::vector<Point2> trace_naive(const std::vector<TraceLayer>& layers,
                                int unit_y, int unit_x) {
  std::vector<Point2> out;
  expand_trace(layers, 0,
               Point2{static_cast<double>(unit_x), static_cast<double>(unit_y)},
               out);
  return out;
}

double effective_dilation_naive(const std::vector<Point2>& points,
                                int kernel_h, int kernel_w) {
  double sum = 0.0;
  int pairs = 0;
  const int n = kernel_h * kernel_w;
  for (int a = 0; a < n; ++a) {
    for (int b = a + 1; b < n; ++b) {
      const int manhattan = std::abs(a / kernel_w - b / kernel_w) +
                            std::abs(a % kernel_w - b % kernel_w);
      if (manhattan != 1) continue;
      const double dx = points[static_cast<std::size_t>(a)].x -
                        points[static_cast<std::size_t>(b)].x;
      const double dy = points[static_cast<std::size_t>(a)].y -
                        points[static_cast<std::size_t>(b)].y;
      sum += std::sqrt(dx * dx + dy * dy);
      ++pairs;
    }
  }
  detail::require(pairs > 0, "no adjacent pairs; kernel too small");
  return sum / pairs;
}

std::pair<double, double> mean_std_naive(const std::vector<double>& v) {
  detail::require(!v.empty(), "mean of an empty set");
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / v.size();
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / v.size())};
}

}  // namespace dcn::oracle
