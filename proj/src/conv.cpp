#include "dcn/conv.hpp"

#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dcn/bilinear.hpp"

namespace dcn {

namespace {

int out_extent(int in, int pad, int dilation, int k, int stride) {
  const int span = in + 2 * pad - dilation * (k - 1) - 1;
  detail::require(span >= 0, "conv output extent would be < 1");
  return span / stride + 1;
}

void validate_spec(const ConvSpec& s) {
  detail::require(s.kernel_h >= 1 && s.kernel_w >= 1, "kernel dims must be >= 1");
  detail::require(s.stride_y >= 1 && s.stride_x >= 1, "stride must be >= 1");
  detail::require(s.pad_y >= 0 && s.pad_x >= 0, "padding must be >= 0");
  detail::require(s.dilation >= 1, "dilation must be >= 1");
}

void validate_conv_args(const Tensor4& x, const ConvWeights& w, const ConvSpec& s) {
  validate_spec(s);
  detail::require(w.w.c() == x.c(), "input channels do not match weights");
  detail::require(w.w.h() == s.kernel_h && w.w.w() == s.kernel_w,
                  "weight dims do not match kernel spec");
  detail::require(w.bias.empty() ||
                      w.bias.size() == static_cast<std::size_t>(w.w.n()),
                  "bias length must equal output channels");
}

void validate_offsets(const Tensor4& x, const OffsetField& off, const ConvSpec& s,
                      int oh, int ow) {
  detail::require(off.data.n() == x.n() && off.data.c() == 2 * s.taps() &&
                      off.data.h() == oh && off.data.w() == ow,
                  "offset field dims must be (n, 2N, out_h, out_w)");
}

int num_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

int thread_id() {
#ifdef _OPENMP
  return omp_get_thread_num();
#else
  return 0;
#endif
}

}  // namespace

int ConvSpec::out_h(int in_h) const {
  return out_extent(in_h, pad_y, dilation, kernel_h, stride_y);
}

int ConvSpec::out_w(int in_w) const {
  return out_extent(in_w, pad_x, dilation, kernel_w, stride_x);
}

std::vector<Point2> sampling_grid(const ConvSpec& spec) {
  validate_spec(spec);
  std::vector<Point2> grid;
  grid.reserve(static_cast<std::size_t>(spec.taps()));
  const double cy = (spec.kernel_h - 1) / 2.0;
  const double cx = (spec.kernel_w - 1) / 2.0;
  for (int ky = 0; ky < spec.kernel_h; ++ky)
    for (int kx = 0; kx < spec.kernel_w; ++kx)
      grid.push_back(Point2{(kx - cx) * spec.dilation, (ky - cy) * spec.dilation});
  return grid;
}

Point2 filter_center(const ConvSpec& spec, double out_y, double out_x) {
  return Point2{out_x * spec.stride_x - spec.pad_x + spec.dilation * (spec.kernel_w - 1) / 2.0,
                out_y * spec.stride_y - spec.pad_y + spec.dilation * (spec.kernel_h - 1) / 2.0};
}

ConvWeights random_weights(int c_out, int c_in, const ConvSpec& spec,
                           std::uint64_t seed, double lo, double hi) {
  return ConvWeights{fill_random(c_out, c_in, spec.kernel_h, spec.kernel_w, seed, lo, hi), {}};
}

OffsetField OffsetField::zero_for(const ConvSpec& spec, int n, int in_h, int in_w) {
  return OffsetField{zeros(n, 2 * spec.taps(), spec.out_h(in_h), spec.out_w(in_w))};
}

Tensor4 conv2d(const Tensor4& x, const ConvWeights& w, const ConvSpec& spec) {
  validate_conv_args(x, w, spec);
  const int oh = spec.out_h(x.h()), ow = spec.out_w(x.w());
  const int c_out = w.out_channels(), c_in = x.c();
  Tensor4 y(x.n(), c_out, oh, ow);

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < x.n(); ++n) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        for (int co = 0; co < c_out; ++co) {
          double acc = w.bias.empty() ? 0.0 : w.bias[static_cast<std::size_t>(co)];
          for (int ci = 0; ci < c_in; ++ci) {
            for (int ky = 0; ky < spec.kernel_h; ++ky) {
              const int iy = oy * spec.stride_y - spec.pad_y + ky * spec.dilation;
              if (iy < 0 || iy >= x.h()) continue;
              for (int kx = 0; kx < spec.kernel_w; ++kx) {
                const int ix = ox * spec.stride_x - spec.pad_x + kx * spec.dilation;
                if (ix < 0 || ix >= x.w()) continue;
                acc += w.w.at(co, ci, ky, kx) * x.at(n, ci, iy, ix);
              }
            }
          }
          y.at(n, co, oy, ox) = acc;
        }
      }
    }
  }
  return y;
}

Tensor4 deform_conv2d(const Tensor4& x, const ConvWeights& w,
                      const OffsetField& offsets, const ConvSpec& spec) {
  validate_conv_args(x, w, spec);
  const int oh = spec.out_h(x.h()), ow = spec.out_w(x.w());
  validate_offsets(x, offsets, spec, oh, ow);
  const int c_out = w.out_channels(), c_in = x.c();
  Tensor4 y(x.n(), c_out, oh, ow);

#pragma omp parallel for collapse(2) schedule(static)
  for (int n = 0; n < x.n(); ++n) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        for (int co = 0; co < c_out; ++co) {
          double acc = w.bias.empty() ? 0.0 : w.bias[static_cast<std::size_t>(co)];
          for (int ci = 0; ci < c_in; ++ci) {
            const PlaneView pl = plane(x, n, ci);
            for (int ky = 0; ky < spec.kernel_h; ++ky) {
              for (int kx = 0; kx < spec.kernel_w; ++kx) {
                const int tap = ky * spec.kernel_w + kx;
                const Point2 d = offsets.at(n, tap, oy, ox);
                const Point2 p{ox * spec.stride_x - spec.pad_x + kx * spec.dilation + d.x,
                               oy * spec.stride_y - spec.pad_y + ky * spec.dilation + d.y};
                acc += w.w.at(co, ci, ky, kx) * sample_bilinear(pl, p);
              }
            }
          }
          y.at(n, co, oy, ox) = acc;
        }
      }
    }
  }
  return y;
}

Conv2dGrads conv2d_backward(const Tensor4& x, const ConvWeights& w,
                            const ConvSpec& spec, const Tensor4& d_output) {
  validate_conv_args(x, w, spec);
  const int oh = spec.out_h(x.h()), ow = spec.out_w(x.w());
  const int c_out = w.out_channels(), c_in = x.c();
  detail::require(d_output.n() == x.n() && d_output.c() == c_out &&
                      d_output.h() == oh && d_output.w() == ow,
                  "d_output dims must match forward output");

  // Serial scatter; this path only runs on trainer-sized problems.
  Conv2dGrads g;
  g.d_input = Tensor4(x.n(), x.c(), x.h(), x.w());
  g.d_weights = Tensor4(w.w.n(), w.w.c(), w.w.h(), w.w.w());
  if (!w.bias.empty()) g.d_bias.assign(w.bias.size(), 0.0);

  for (int n = 0; n < x.n(); ++n) {
    for (int oy = 0; oy < oh; ++oy) {
      for (int ox = 0; ox < ow; ++ox) {
        for (int co = 0; co < c_out; ++co) {
          const double up = d_output.at(n, co, oy, ox);
          if (!g.d_bias.empty()) g.d_bias[static_cast<std::size_t>(co)] += up;
          for (int ci = 0; ci < c_in; ++ci) {
            for (int ky = 0; ky < spec.kernel_h; ++ky) {
              const int iy = oy * spec.stride_y - spec.pad_y + ky * spec.dilation;
              if (iy < 0 || iy >= x.h()) continue;
              for (int kx = 0; kx < spec.kernel_w; ++kx) {
                const int ix = ox * spec.stride_x - spec.pad_x + kx * spec.dilation;
                if (ix < 0 || ix >= x.w()) continue;
                g.d_weights.at(co, ci, ky, kx) += up * x.at(n, ci, iy, ix);
                g.d_input.at(n, ci, iy, ix) += up * w.w.at(co, ci, ky, kx);
              }
            }
          }
        }
      }
    }
  }
  return g;
}

DeformConvGrads deform_conv2d_backward(const Tensor4& x, const ConvWeights& w,
                                       const OffsetField& offsets,
                                       const ConvSpec& spec,
                                       const Tensor4& d_output) {
  validate_conv_args(x, w, spec);
  const int oh = spec.out_h(x.h()), ow = spec.out_w(x.w());
  validate_offsets(x, offsets, spec, oh, ow);
  const int c_out = w.out_channels(), c_in = x.c();
  detail::require(d_output.n() == x.n() && d_output.c() == c_out &&
                      d_output.h() == oh && d_output.w() == ow,
                  "d_output dims must match forward output");

  DeformConvGrads g;
  g.d_input = Tensor4(x.n(), x.c(), x.h(), x.w());
  g.d_weights = Tensor4(w.w.n(), w.w.c(), w.w.h(), w.w.w());
  if (!w.bias.empty()) g.d_bias.assign(w.bias.size(), 0.0);
  g.d_offsets = Tensor4(offsets.data.n(), offsets.data.c(), oh, ow);

  // d_input and d_weights receive contributions from every output location,
  // so each thread accumulates into its own buffer; buffers are reduced in
  // thread order afterwards. d_offsets entries are owned by a single output
  // location and are written directly.
  const int nt = num_threads();
  std::vector<Tensor4> dx_part(static_cast<std::size_t>(nt),
                               Tensor4(x.n(), x.c(), x.h(), x.w()));
  std::vector<Tensor4> dw_part(static_cast<std::size_t>(nt),
                               Tensor4(w.w.n(), w.w.c(), w.w.h(), w.w.w()));
  std::vector<std::vector<double>> db_part(
      static_cast<std::size_t>(nt), std::vector<double>(g.d_bias.size(), 0.0));

#pragma omp parallel
  {
    const int t = thread_id();
    Tensor4& dx = dx_part[static_cast<std::size_t>(t)];
    Tensor4& dw = dw_part[static_cast<std::size_t>(t)];
    std::vector<double>& db = db_part[static_cast<std::size_t>(t)];

#pragma omp for collapse(2) schedule(static)
    for (int n = 0; n < x.n(); ++n) {
      for (int oy = 0; oy < oh; ++oy) {
        for (int ox = 0; ox < ow; ++ox) {
          for (int ky = 0; ky < spec.kernel_h; ++ky) {
            for (int kx = 0; kx < spec.kernel_w; ++kx) {
              const int tap = ky * spec.kernel_w + kx;
              const Point2 d = offsets.at(n, tap, oy, ox);
              const Point2 p{ox * spec.stride_x - spec.pad_x + kx * spec.dilation + d.x,
                             oy * spec.stride_y - spec.pad_y + ky * spec.dilation + d.y};
              double acc_dx = 0.0, acc_dy = 0.0;
              for (int ci = 0; ci < c_in; ++ci) {
                SampleGrad sg;
                const double val = sample_bilinear_grad(plane(x, n, ci), p, sg);
                double upstream_w = 0.0;  // sum over co of d_out * w
                for (int co = 0; co < c_out; ++co) {
                  const double up = d_output.at(n, co, oy, ox);
                  upstream_w += up * w.w.at(co, ci, ky, kx);
                  dw.at(co, ci, ky, kx) += up * val;
                }
                acc_dx += upstream_w * sg.d_dx;
                acc_dy += upstream_w * sg.d_dy;
                for (int ti = 0; ti < sg.num_taps; ++ti)
                  dx.at(n, ci, sg.taps[ti].y, sg.taps[ti].x) +=
                      upstream_w * sg.taps[ti].weight;
              }
              g.d_offsets.at(n, 2 * tap, oy, ox) = acc_dy;
              g.d_offsets.at(n, 2 * tap + 1, oy, ox) = acc_dx;
            }
          }
          if (!db.empty())
            for (int co = 0; co < c_out; ++co)
              db[static_cast<std::size_t>(co)] += d_output.at(n, co, oy, ox);
        }
      }
    }
  }

  for (int t = 0; t < nt; ++t) {
    g.d_input += dx_part[static_cast<std::size_t>(t)];
    g.d_weights += dw_part[static_cast<std::size_t>(t)];
    for (std::size_t i = 0; i < g.d_bias.size(); ++i)
      g.d_bias[i] += db_part[static_cast<std::size_t>(t)][i];
  }
  return g;
}

OffsetField offset_branch_forward(const Tensor4& x, const ConvWeights& branch_w,
                                  const ConvSpec& spec) {
  detail::require(branch_w.out_channels() == 2 * spec.taps(),
                  "offset branch must have 2N output channels");
  return OffsetField{conv2d(x, branch_w, spec)};
}

}  // namespace dcn
