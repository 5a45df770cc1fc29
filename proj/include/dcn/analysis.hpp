#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dcn/conv.hpp"
#include "dcn/tensor.hpp"

namespace dcn {

// Actual sampling locations of one filter: center + grid tap + offset, in
// kernel row-major order, k_h * k_w points.
std::vector<Point2> filter_sample_points(const ConvSpec& spec,
                                         const OffsetField& offsets, int n,
                                         int oy, int ox);

// Mean Euclidean distance between sampling locations that are 4-neighbors in
// kernel index space: 2*k*(k-1) pairs for a square k x k filter. With zero
// offsets this equals the dilation, which is what the name promises.
// Requires kernel extent >= 2 on both axes.
double effective_dilation(const std::vector<Point2>& points, int kernel_h,
                          int kernel_w);

// Axis-aligned box, closed on all sides.
struct Box {
  double x0 = 0.0, y0 = 0.0;
  double x1 = 0.0, y1 = 0.0;

  double area() const { return (x1 - x0) * (y1 - y0); }
  bool contains(Point2 p) const {
    return p.x >= x0 && p.x <= x1 && p.y >= y0 && p.y <= y1;
  }
};

// Size class of the object whose box contains the filter center. Area
// thresholds split at 96^2 and 224^2 pixels; centers contained by no box are
// background. The first containing box in list order decides.
enum class FilterCategory { background = 0, small = 1, medium = 2, large = 3 };

const char* category_name(FilterCategory c);

FilterCategory categorize(Point2 center, const std::vector<Box>& boxes);

struct DilationStats {
  double mean = 0.0;
  double std_dev = 0.0;  // population standard deviation
  int count = 0;
};

// Mean/std of the dilation values grouped by category. Categories with no
// members are absent; present ones appear in enum order.
std::vector<std::pair<FilterCategory, DilationStats>> aggregate_dilation_stats(
    const std::vector<double>& dilations,
    const std::vector<FilterCategory>& categories);

// One layer of a stack being traced. Offsets live on the layer's output grid
// (dims (1, 2N, out_h, out_w)); an empty field means all-zero offsets. When a
// trace lands on a fractional output position the offset channels are read by
// bilinear interpolation, and positions outside the field read offset 0.
struct TraceLayer {
  ConvSpec spec;
  OffsetField offsets;
};

struct SampleTrace {
  int unit_layer = 0;  // layers between the traced unit and the raw input
  int unit_y = 0;
  int unit_x = 0;
  int depth = 0;               // layers actually expanded (= unit_layer here)
  std::vector<Point2> points;  // multiset on the raw input, N^depth entries
};

// Expand the sampled locations of one output unit down through the stack.
// layers[0] is the unit's own layer, layers.back() reads the raw input. Each
// frontier position becomes taps() child positions, so the result holds
// exactly prod(taps) points, in tap-path lexicographic order.
SampleTrace trace_sampling(const std::vector<TraceLayer>& layers, int unit_y,
                           int unit_x);

// Number of distinct points under a matching tolerance, for receptive-field
// counts on integer lattices.
int count_distinct(std::vector<Point2> points, double tol = 1e-9);

}  // namespace dcn
