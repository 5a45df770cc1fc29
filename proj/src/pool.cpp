#include "dcn/pool.hpp"

#include <cmath>

#include "dcn/bilinear.hpp"

namespace dcn {

namespace {

void validate_roi(const Tensor4& x, const Roi& roi) {
  detail::require(roi.batch >= 0 && roi.batch < x.n(), "roi batch out of range");
  detail::require(roi.w >= 1.0 && roi.h >= 1.0, "roi extent must be >= 1 pixel");
  detail::require(std::isfinite(roi.p0.x) && std::isfinite(roi.p0.y),
                  "roi corner must be finite");
}

void validate_bin_offsets(const BinOffsets& off, int k) {
  detail::require(off.k == k, "bin offsets built for a different k");
  detail::require(off.pixel.size() == static_cast<std::size_t>(k) * k &&
                      off.normalized.size() == off.pixel.size(),
                  "bin offsets must hold k*k entries");
}

// Integer base of the RoI corner; all lattice reads are relative to it.
int base_x(const Roi& roi) { return static_cast<int>(std::llround(roi.p0.x)); }
int base_y(const Roi& roi) { return static_cast<int>(std::llround(roi.p0.y)); }

int ps_channel(int k, int cls, int i, int j) { return cls * k * k + i * k + j; }

void validate_ps(const Tensor4& scores, int k, int cls, int classes_needed) {
  detail::require(k >= 1, "k must be >= 1");
  detail::require(scores.c() % (k * k) == 0,
                  "score map channels must be divisible by k*k");
  const int n_cls = scores.c() / (k * k);
  detail::require(cls >= 0 && cls + classes_needed <= n_cls,
                  "class index out of range for score maps");
}

}  // namespace

BinSpan bin_span(int i, int j, const Roi& roi, int k) {
  detail::require(k >= 1, "k must be >= 1");
  detail::require(i >= 0 && i < k && j >= 0 && j < k, "bin index out of range");
  BinSpan s;
  s.x_begin = static_cast<int>(std::floor(i * roi.w / k));
  s.x_end = static_cast<int>(std::ceil((i + 1) * roi.w / k));
  s.y_begin = static_cast<int>(std::floor(j * roi.h / k));
  s.y_end = static_cast<int>(std::ceil((j + 1) * roi.h / k));
  return s;
}

Tensor4 roi_pool(const Tensor4& x, const Roi& roi, int k) {
  validate_roi(x, roi);
  detail::require(k >= 1, "k must be >= 1");
  Tensor4 y(1, x.c(), k, k);
  const int bx = base_x(roi), by = base_y(roi);
  for (int c = 0; c < x.c(); ++c) {
    for (int j = 0; j < k; ++j) {
      for (int i = 0; i < k; ++i) {
        const BinSpan s = bin_span(i, j, roi, k);
        double acc = 0.0;
        for (int py = s.y_begin; py < s.y_end; ++py) {
          const int iy = by + py;
          for (int px = s.x_begin; px < s.x_end; ++px) {
            const int ix = bx + px;
            if (iy >= 0 && iy < x.h() && ix >= 0 && ix < x.w())
              acc += x.at(roi.batch, c, iy, ix);
          }
        }
        y.at(0, c, j, i) = acc / s.count();
      }
    }
  }
  return y;
}

BinOffsets zero_bin_offsets(int k, double gamma) {
  BinOffsets off;
  off.k = k;
  off.gamma = gamma;
  off.pixel.assign(static_cast<std::size_t>(k) * k, Point2{});
  off.normalized.assign(static_cast<std::size_t>(k) * k, Point2{});
  return off;
}

BinOffsets bin_offsets_from_normalized(std::vector<Point2> normalized,
                                       const Roi& roi, double gamma) {
  BinOffsets off;
  off.k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(normalized.size()))));
  detail::require(static_cast<std::size_t>(off.k) * off.k == normalized.size(),
                  "bin offset count must be a square");
  off.gamma = gamma;
  off.normalized = std::move(normalized);
  off.pixel.resize(off.normalized.size());
  for (std::size_t b = 0; b < off.pixel.size(); ++b) {
    off.pixel[b].x = gamma * off.normalized[b].x * roi.w;
    off.pixel[b].y = gamma * off.normalized[b].y * roi.h;
  }
  return off;
}

BinOffsets bin_offsets_from_pixel(std::vector<Point2> pixel, const Roi& roi,
                                  double gamma) {
  detail::require(gamma > 0.0, "gamma must be > 0 to invert the normalization");
  BinOffsets off;
  off.k = static_cast<int>(std::lround(std::sqrt(static_cast<double>(pixel.size()))));
  detail::require(static_cast<std::size_t>(off.k) * off.k == pixel.size(),
                  "bin offset count must be a square");
  off.gamma = gamma;
  off.pixel = std::move(pixel);
  off.normalized.resize(off.pixel.size());
  for (std::size_t b = 0; b < off.pixel.size(); ++b) {
    off.normalized[b].x = off.pixel[b].x / (gamma * roi.w);
    off.normalized[b].y = off.pixel[b].y / (gamma * roi.h);
  }
  return off;
}

Tensor4 deform_roi_pool(const Tensor4& x, const Roi& roi, int k,
                        const BinOffsets& offsets) {
  validate_roi(x, roi);
  validate_bin_offsets(offsets, k);
  Tensor4 y(1, x.c(), k, k);
  const int bx = base_x(roi), by = base_y(roi);
  for (int c = 0; c < x.c(); ++c) {
    const PlaneView pl = plane(x, roi.batch, c);
    for (int j = 0; j < k; ++j) {
      for (int i = 0; i < k; ++i) {
        const BinSpan s = bin_span(i, j, roi, k);
        const Point2 d = offsets.pixel_at(i, j);
        double acc = 0.0;
        for (int py = s.y_begin; py < s.y_end; ++py) {
          for (int px = s.x_begin; px < s.x_end; ++px) {
            acc += sample_bilinear(pl, Point2{bx + px + d.x, by + py + d.y});
          }
        }
        y.at(0, c, j, i) = acc / s.count();
      }
    }
  }
  return y;
}

FcWeights zero_fc(int out_dim, int in_dim) {
  detail::require(out_dim >= 0 && in_dim >= 0, "fc dims must be >= 0");
  return FcWeights{out_dim, in_dim,
                   std::vector<double>(static_cast<std::size_t>(out_dim) * in_dim, 0.0)};
}

BinOffsets roi_offset_branch(const Tensor4& pooled, const FcWeights& fc,
                             const Roi& roi, double gamma) {
  const int k = pooled.h();
  detail::require(pooled.w() == k && pooled.n() == 1, "pooled input must be (1, C, k, k)");
  detail::require(fc.in_dim == static_cast<int>(pooled.size()),
                  "fc input dim must match flattened pooled features");
  detail::require(fc.out_dim == 2 * k * k, "fc must produce 2*k*k normalized offsets");
  std::vector<Point2> normalized(static_cast<std::size_t>(k) * k);
  for (int b = 0; b < k * k; ++b) {
    double oy = 0.0, ox = 0.0;
    for (int cidx = 0; cidx < fc.in_dim; ++cidx) {
      oy += fc.at(2 * b, cidx) * pooled[cidx];
      ox += fc.at(2 * b + 1, cidx) * pooled[cidx];
    }
    normalized[static_cast<std::size_t>(b)] = Point2{ox, oy};
  }
  return bin_offsets_from_normalized(std::move(normalized), roi, gamma);
}

Tensor4 ps_roi_pool(const Tensor4& scores, const Roi& roi, int k, int cls) {
  validate_roi(scores, roi);
  validate_ps(scores, k, cls, 1);
  Tensor4 y(1, 1, k, k);
  const int bx = base_x(roi), by = base_y(roi);
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < k; ++i) {
      const BinSpan s = bin_span(i, j, roi, k);
      const int c = ps_channel(k, cls, i, j);
      double acc = 0.0;
      for (int py = s.y_begin; py < s.y_end; ++py) {
        const int iy = by + py;
        for (int px = s.x_begin; px < s.x_end; ++px) {
          const int ix = bx + px;
          if (iy >= 0 && iy < scores.h() && ix >= 0 && ix < scores.w())
            acc += scores.at(roi.batch, c, iy, ix);
        }
      }
      y.at(0, 0, j, i) = acc / s.count();
    }
  }
  return y;
}

Tensor4 ps_pool_with_offsets(const Tensor4& scores, const Roi& roi, int k,
                             int cls, const BinOffsets& offsets) {
  validate_roi(scores, roi);
  validate_ps(scores, k, cls, 1);
  validate_bin_offsets(offsets, k);
  Tensor4 y(1, 1, k, k);
  const int bx = base_x(roi), by = base_y(roi);
  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < k; ++i) {
      const BinSpan s = bin_span(i, j, roi, k);
      const PlaneView pl = plane(scores, roi.batch, ps_channel(k, cls, i, j));
      const Point2 d = offsets.pixel_at(i, j);
      double acc = 0.0;
      for (int py = s.y_begin; py < s.y_end; ++py) {
        for (int px = s.x_begin; px < s.x_end; ++px) {
          acc += sample_bilinear(pl, Point2{bx + px + d.x, by + py + d.y});
        }
      }
      y.at(0, 0, j, i) = acc / s.count();
    }
  }
  return y;
}

std::pair<Tensor4, BinOffsets> deform_ps_roi_pool(const Tensor4& scores,
                                                  const Tensor4& offset_fields,
                                                  const Roi& roi, int k, int cls,
                                                  double gamma,
                                                  bool per_class_fields) {
  validate_roi(scores, roi);
  validate_ps(scores, k, cls, 1);
  detail::require(offset_fields.n() == scores.n() &&
                      offset_fields.h() == scores.h() &&
                      offset_fields.w() == scores.w(),
                  "offset fields must match score map resolution");
  const int needed = per_class_fields ? 2 * k * k * (scores.c() / (k * k)) : 2 * k * k;
  detail::require(offset_fields.c() == needed,
                  "offset field channel count does not match configuration");

  const int y_cls = per_class_fields ? 2 * cls : 0;
  const Tensor4 ny = ps_roi_pool(offset_fields, roi, k, y_cls);
  const Tensor4 nx = ps_roi_pool(offset_fields, roi, k, y_cls + 1);
  std::vector<Point2> normalized(static_cast<std::size_t>(k) * k);
  for (int j = 0; j < k; ++j)
    for (int i = 0; i < k; ++i)
      normalized[static_cast<std::size_t>(j) * k + i] =
          Point2{nx.at(0, 0, j, i), ny.at(0, 0, j, i)};
  BinOffsets off = bin_offsets_from_normalized(std::move(normalized), roi, gamma);
  return {ps_pool_with_offsets(scores, roi, k, cls, off), std::move(off)};
}

namespace {

// Shared core of the two deformable pooling backwards. For the PS variant
// each bin reads its dedicated channel; for the plain variant every channel
// is pooled with the same bin geometry.
DeformRoiGrads pool_backward_impl(const Tensor4& x, const Roi& roi, int k,
                                  const BinOffsets& offsets,
                                  const Tensor4& d_output, bool position_sensitive,
                                  int cls) {
  DeformRoiGrads g;
  g.d_input = Tensor4(x.n(), x.c(), x.h(), x.w());
  g.d_pixel.assign(static_cast<std::size_t>(k) * k, Point2{});
  g.d_normalized.assign(static_cast<std::size_t>(k) * k, Point2{});
  const int bx = base_x(roi), by = base_y(roi);
  const int out_c = position_sensitive ? 1 : x.c();

  for (int j = 0; j < k; ++j) {
    for (int i = 0; i < k; ++i) {
      const BinSpan s = bin_span(i, j, roi, k);
      const double inv_n = 1.0 / s.count();
      const Point2 d = offsets.pixel_at(i, j);
      double acc_dx = 0.0, acc_dy = 0.0;
      for (int c = 0; c < out_c; ++c) {
        const int ch = position_sensitive ? ps_channel(k, cls, i, j) : c;
        const PlaneView pl = plane(x, roi.batch, ch);
        const double up = d_output.at(0, c, j, i) * inv_n;
        for (int py = s.y_begin; py < s.y_end; ++py) {
          for (int px = s.x_begin; px < s.x_end; ++px) {
            SampleGrad sg;
            sample_bilinear_grad(pl, Point2{bx + px + d.x, by + py + d.y}, sg);
            acc_dx += up * sg.d_dx;
            acc_dy += up * sg.d_dy;
            for (int t = 0; t < sg.num_taps; ++t)
              g.d_input.at(roi.batch, ch, sg.taps[t].y, sg.taps[t].x) +=
                  up * sg.taps[t].weight;
          }
        }
      }
      const std::size_t b = static_cast<std::size_t>(j) * k + i;
      g.d_pixel[b] = Point2{acc_dx, acc_dy};
      g.d_normalized[b] =
          Point2{acc_dx * offsets.gamma * roi.w, acc_dy * offsets.gamma * roi.h};
    }
  }
  return g;
}

}  // namespace

DeformRoiGrads deform_roi_pool_backward(const Tensor4& x, const Roi& roi, int k,
                                        const BinOffsets& offsets,
                                        const Tensor4& d_output) {
  validate_roi(x, roi);
  validate_bin_offsets(offsets, k);
  detail::require(d_output.n() == 1 && d_output.c() == x.c() &&
                      d_output.h() == k && d_output.w() == k,
                  "d_output dims must be (1, C, k, k)");
  return pool_backward_impl(x, roi, k, offsets, d_output, false, 0);
}

DeformRoiGrads deform_ps_roi_pool_backward(const Tensor4& scores, const Roi& roi,
                                           int k, int cls,
                                           const BinOffsets& offsets,
                                           const Tensor4& d_output) {
  validate_roi(scores, roi);
  validate_ps(scores, k, cls, 1);
  validate_bin_offsets(offsets, k);
  detail::require(d_output.n() == 1 && d_output.c() == 1 && d_output.h() == k &&
                      d_output.w() == k,
                  "d_output dims must be (1, 1, k, k)");
  return pool_backward_impl(scores, roi, k, offsets, d_output, true, cls);
}

Tensor4 roi_pool_batch(const Tensor4& x, const std::vector<Roi>& rois, int k) {
  detail::require(!rois.empty(), "batch pooling needs at least one RoI");
  Tensor4 y(static_cast<int>(rois.size()), x.c(), k, k);
#pragma omp parallel for schedule(static)
  for (std::size_t r = 0; r < rois.size(); ++r) {
    const Tensor4 one = roi_pool(x, rois[r], k);
    for (int c = 0; c < x.c(); ++c)
      for (int j = 0; j < k; ++j)
        for (int i = 0; i < k; ++i)
          y.at(static_cast<int>(r), c, j, i) = one.at(0, c, j, i);
  }
  return y;
}

Tensor4 deform_roi_pool_batch(const Tensor4& x, const std::vector<Roi>& rois,
                              int k, const std::vector<BinOffsets>& offsets) {
  detail::require(!rois.empty(), "batch pooling needs at least one RoI");
  detail::require(rois.size() == offsets.size(),
                  "one BinOffsets per RoI required");
  Tensor4 y(static_cast<int>(rois.size()), x.c(), k, k);
#pragma omp parallel for schedule(static)
  for (std::size_t r = 0; r < rois.size(); ++r) {
    const Tensor4 one = deform_roi_pool(x, rois[r], k, offsets[r]);
    for (int c = 0; c < x.c(); ++c)
      for (int j = 0; j < k; ++j)
        for (int i = 0; i < k; ++i)
          y.at(static_cast<int>(r), c, j, i) = one.at(0, c, j, i);
  }
  return y;
}

}  // namespace dcn
