#pragma once

#include <functional>
#include <utility>
#include <vector>

#include "dcn/analysis.hpp"
#include "dcn/bilinear.hpp"
#include "dcn/conv.hpp"
#include "dcn/pool.hpp"
#include "dcn/tensor.hpp"

// Brute-force reference implementations, used only by tests and the gradcheck
// command. They reuse the library's data types but none of its kernels or
// loop helpers; agreeing with them is what the fast paths are tested against.
// All of these are deterministic and deliberately slow.

namespace dcn::oracle {

struct FiniteDiffConfig {
  double h = 1e-6;           // central-difference step
  double tol = 1e-5;         // relative tolerance for a passing comparison
  double kink_margin = 1e-3; // min distance of sampling fractions from {0,1}
};

// |a - b| scaled by max(1, |a|, |b|): relative for large values, absolute
// near zero where a pure ratio would blow up on rounding noise.
double rel_err(double a, double b);

// Plain convolution as six nested loops over an explicitly zero-padded copy
// of the input.
Tensor4 conv2d_naive(const Tensor4& x, const ConvWeights& w,
                     const ConvSpec& spec);

// Bilinear sampling as the full lattice sum of max(0,1-|dx|)*max(0,1-|dy|)
// weights, O(H*W) per point.
double sample_naive(const PlaneView& plane, Point2 p);

Tensor4 deform_conv2d_naive(const Tensor4& x, const ConvWeights& w,
                            const OffsetField& offsets, const ConvSpec& spec);

// Pooling by membership test: integer pixel p joins width-bin i iff
// i*w/k - 1 < p < (i+1)*w/k, scanned over a generous range instead of
// computing the span bounds.
Tensor4 roi_pool_naive(const Tensor4& x, const Roi& roi, int k);
Tensor4 deform_roi_pool_naive(const Tensor4& x, const Roi& roi, int k,
                              const BinOffsets& offsets);
Tensor4 ps_roi_pool_naive(const Tensor4& scores, const Roi& roi, int k,
                          int cls);
Tensor4 ps_pool_with_offsets_naive(const Tensor4& scores, const Roi& roi,
                                   int k, int cls, const BinOffsets& offsets);

// Central differences (f(x+h*e) - f(x-h*e)) / 2h per element. f must be pure;
// non-finite values of f are an error.
Tensor4 finite_diff_grad(const std::function<double(const Tensor4&)>& f,
                         const Tensor4& x, const FiniteDiffConfig& cfg);

// Same, for a parameter vector of 2-D points perturbed per component.
std::vector<Point2> finite_diff_grad_points(
    const std::function<double(const std::vector<Point2>&)>& f,
    const std::vector<Point2>& pts, const FiniteDiffConfig& cfg);

// Recursive (depth-first) trace enumeration; cross-checks the frontier-based
// trace_sampling.
std::vector<Point2> trace_naive(const std::vector<TraceLayer>& layers,
                                int unit_y, int unit_x);

// Mean distance over every unordered index pair at kernel L1 distance 1,
// found by scanning all pairs.
double effective_dilation_naive(const std::vector<Point2>& points,
                                int kernel_h, int kernel_w);

// Two-pass mean and population standard deviation.
std::pair<double, double> mean_std_naive(const std::vector<double>& v);

}  // namespace dcn::oracle
