#pragma once

#include <utility>
#include <vector>

#include "dcn/tensor.hpp"

namespace dcn {

// One region of interest in feature-map coordinates. The top-left corner may
// be fractional and may lie partially outside the map; pooling rounds it to
// the nearest integer base and reads 0 for out-of-map pixels.
struct Roi {
  int batch = 0;
  Point2 p0;       // top-left corner
  double w = 1.0;  // width in pixels, >= 1
  double h = 1.0;  // height in pixels, >= 1
};

// Integer pixel ranges of bin (i, j), relative to the RoI corner:
// floor(i*w/k) <= px < ceil((i+1)*w/k), same for y with j and h.
// i indexes width bins, j height bins. Always holds count() >= 1.
struct BinSpan {
  int x_begin = 0, x_end = 0;
  int y_begin = 0, y_end = 0;
  int count() const { return (x_end - x_begin) * (y_end - y_begin); }
};

BinSpan bin_span(int i, int j, const Roi& roi, int k);

// Pooled outputs are (1, C, k, k) tensors indexed at(0, c, j, i): the row is
// the height-bin j, the column the width-bin i.
Tensor4 roi_pool(const Tensor4& x, const Roi& roi, int k);

// Per-RoI bin offsets, stored at index j*k + i. pixel = gamma * normalized
// scaled elementwise by (w, h); the pair is kept consistent by construction.
struct BinOffsets {
  int k = 0;
  double gamma = 0.1;
  std::vector<Point2> pixel;
  std::vector<Point2> normalized;

  const Point2& pixel_at(int i, int j) const {
    return pixel[static_cast<std::size_t>(j) * k + i];
  }
};

BinOffsets zero_bin_offsets(int k, double gamma = 0.1);
BinOffsets bin_offsets_from_normalized(std::vector<Point2> normalized,
                                       const Roi& roi, double gamma);
BinOffsets bin_offsets_from_pixel(std::vector<Point2> pixel, const Roi& roi,
                                  double gamma);

Tensor4 deform_roi_pool(const Tensor4& x, const Roi& roi, int k,
                        const BinOffsets& offsets);

// fc branch for deformable RoI pooling: maps the flattened pooled features
// (c, j, i order) through a dense matrix to 2*k*k normalized offsets laid out
// [y, x] per bin in j*k+i order, then de-normalizes.
struct FcWeights {
  int out_dim = 0;
  int in_dim = 0;
  std::vector<double> w;  // row-major (out_dim, in_dim)

  double at(int r, int c) const {
    return w[static_cast<std::size_t>(r) * in_dim + c];
  }
};

FcWeights zero_fc(int out_dim, int in_dim);
BinOffsets roi_offset_branch(const Tensor4& pooled, const FcWeights& fc,
                             const Roi& roi, double gamma);

// Position-sensitive pooling over score maps with k*k channels per class:
// channel cls*k*k + (i*k + j) is the dedicated map of bin (i, j). Output is
// (1, 1, k, k) for the requested class.
Tensor4 ps_roi_pool(const Tensor4& scores, const Roi& roi, int k, int cls);

// Deformable PS pooling with explicitly given bin offsets; this is the
// pooling step shared by deform_ps_roi_pool, its backward, and gradient
// checks.
Tensor4 ps_pool_with_offsets(const Tensor4& scores, const Roi& roi, int k,
                             int cls, const BinOffsets& offsets);

// Full deformable PS RoI pooling: the offset fields are full-resolution PS
// maps with 2*k*k channels (normalized y offsets as pseudo-class 0, x as
// pseudo-class 1); they are PS-pooled to per-bin normalized offsets,
// de-normalized through gamma*(w,h), and the score maps are then pooled at
// the displaced positions. With per_class_fields the field tensor carries
// 2*k*k channels per class and class cls uses pseudo-classes 2*cls, 2*cls+1.
std::pair<Tensor4, BinOffsets> deform_ps_roi_pool(const Tensor4& scores,
                                                  const Tensor4& offset_fields,
                                                  const Roi& roi, int k, int cls,
                                                  double gamma,
                                                  bool per_class_fields = false);

struct DeformRoiGrads {
  Tensor4 d_input;
  std::vector<Point2> d_pixel;       // d loss / d pixel offset, j*k+i order
  std::vector<Point2> d_normalized;  // chained through gamma*(w,h)
};

DeformRoiGrads deform_roi_pool_backward(const Tensor4& x, const Roi& roi, int k,
                                        const BinOffsets& offsets,
                                        const Tensor4& d_output);

DeformRoiGrads deform_ps_roi_pool_backward(const Tensor4& scores, const Roi& roi,
                                           int k, int cls,
                                           const BinOffsets& offsets,
                                           const Tensor4& d_output);

// Batched pooling over a RoI list, parallel across RoIs. Results are stacked
// along the batch axis in list order.
Tensor4 roi_pool_batch(const Tensor4& x, const std::vector<Roi>& rois, int k);
Tensor4 deform_roi_pool_batch(const Tensor4& x, const std::vector<Roi>& rois,
                              int k, const std::vector<BinOffsets>& offsets);

}  // namespace dcn
