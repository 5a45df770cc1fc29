#pragma once

#include <vector>

#include "dcn/tensor.hpp"

namespace dcn {

// Kernel geometry. Output dims follow the usual zero-padded formula
//   out = floor((in + 2*pad - dilation*(k-1) - 1) / stride) + 1
// and every op checks they come out >= 1.
struct ConvSpec {
  int kernel_h = 3;
  int kernel_w = 3;
  int stride_y = 1;
  int stride_x = 1;
  int pad_y = 0;
  int pad_x = 0;
  int dilation = 1;

  int taps() const { return kernel_h * kernel_w; }
  int out_h(int in_h) const;
  int out_w(int in_w) const;
};

// The sampling grid: taps() lattice points centered at (k-1)/2 and scaled by
// the dilation, in kernel row-major order. A 3x3 kernel with dilation 1 gives
// (-1,-1) ... (1,1); even kernels get half-integer coordinates.
std::vector<Point2> sampling_grid(const ConvSpec& spec);

// Input-pixel position of an output unit's filter center. Adding
// sampling_grid()[tap] recovers the exact integer base position
// (out*stride - pad + tap_index*dilation) of a plain convolution.
Point2 filter_center(const ConvSpec& spec, double out_y, double out_x);

struct ConvWeights {
  Tensor4 w;                 // (c_out, c_in, kernel_h, kernel_w)
  std::vector<double> bias;  // per output channel; empty = no bias

  int out_channels() const { return w.n(); }
  int in_channels() const { return w.c(); }
};

ConvWeights random_weights(int c_out, int c_in, const ConvSpec& spec,
                           std::uint64_t seed, double lo = -1.0, double hi = 1.0);

// Per-output-location kernel offsets, dims (n, 2N, out_h, out_w) with
// N = taps(). Channel 2m holds the y offset and channel 2m+1 the x offset of
// tap m; one field is shared by all input and output channels. Values are in
// input-pixel units, fractional and unbounded.
struct OffsetField {
  Tensor4 data;

  Point2 at(int n, int tap, int oy, int ox) const {
    return Point2{data.at(n, 2 * tap + 1, oy, ox), data.at(n, 2 * tap, oy, ox)};
  }
  static OffsetField zero_for(const ConvSpec& spec, int n, int in_h, int in_w);
};

Tensor4 conv2d(const Tensor4& x, const ConvWeights& w, const ConvSpec& spec);

Tensor4 deform_conv2d(const Tensor4& x, const ConvWeights& w,
                      const OffsetField& offsets, const ConvSpec& spec);

struct Conv2dGrads {
  Tensor4 d_input;
  Tensor4 d_weights;
  std::vector<double> d_bias;  // empty when the layer has no bias
};

Conv2dGrads conv2d_backward(const Tensor4& x, const ConvWeights& w,
                            const ConvSpec& spec, const Tensor4& d_output);

struct DeformConvGrads {
  Tensor4 d_input;
  Tensor4 d_weights;
  std::vector<double> d_bias;  // empty when the layer has no bias
  Tensor4 d_offsets;           // same dims as the offset field
};

DeformConvGrads deform_conv2d_backward(const Tensor4& x, const ConvWeights& w,
                                       const OffsetField& offsets,
                                       const ConvSpec& spec,
                                       const Tensor4& d_output);

// The offset branch is itself a plain convolution with the same spec as the
// main layer and 2N output channels.
OffsetField offset_branch_forward(const Tensor4& x, const ConvWeights& branch_w,
                                  const ConvSpec& spec);

}  // namespace dcn
