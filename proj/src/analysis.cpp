#include "dcn/analysis.hpp"

#include <algorithm>
#include <cmath>

#include "dcn/bilinear.hpp"

namespace dcn {

std::vector<Point2> filter_sample_points(const ConvSpec& spec,
                                         const OffsetField& offsets, int n,
                                         int oy, int ox) {
  const std::vector<Point2> grid = sampling_grid(spec);
  const Point2 center = filter_center(spec, oy, ox);
  std::vector<Point2> pts(grid.size());
  for (int t = 0; t < spec.taps(); ++t) {
    Point2 d{};
    if (!offsets.data.empty()) d = offsets.at(n, t, oy, ox);
    pts[static_cast<std::size_t>(t)] =
        Point2{center.x + grid[static_cast<std::size_t>(t)].x + d.x,
               center.y + grid[static_cast<std::size_t>(t)].y + d.y};
  }
  return pts;
}

double effective_dilation(const std::vector<Point2>& points, int kernel_h,
                          int kernel_w) {
  detail::require(kernel_h >= 2 && kernel_w >= 2,
                  "effective dilation needs a kernel extent >= 2");
  detail::require(points.size() ==
                      static_cast<std::size_t>(kernel_h) * kernel_w,
                  "point count must match the kernel grid");
  const auto at = [&](int r, int c) -> const Point2& {
    return points[static_cast<std::size_t>(r) * kernel_w + c];
  };
  double sum = 0.0;
  int pairs = 0;
  for (int r = 0; r < kernel_h; ++r) {
    for (int c = 0; c < kernel_w; ++c) {
      if (c + 1 < kernel_w) {
        sum += std::hypot(at(r, c + 1).x - at(r, c).x,
                          at(r, c + 1).y - at(r, c).y);
        ++pairs;
      }
      if (r + 1 < kernel_h) {
        sum += std::hypot(at(r + 1, c).x - at(r, c).x,
                          at(r + 1, c).y - at(r, c).y);
        ++pairs;
      }
    }
  }
  return sum / pairs;
}

const char* category_name(FilterCategory c) {
  switch (c) {
    case FilterCategory::background: return "background";
    case FilterCategory::small: return "small";
    case FilterCategory::medium: return "medium";
    case FilterCategory::large: return "large";
  }
  detail::fail("unknown category");
}

FilterCategory categorize(Point2 center, const std::vector<Box>& boxes) {
  for (const Box& b : boxes) {
    if (!b.contains(center)) continue;
    const double a = b.area();
    if (a < 96.0 * 96.0) return FilterCategory::small;
    if (a <= 224.0 * 224.0) return FilterCategory::medium;
    return FilterCategory::large;
  }
  return FilterCategory::background;
}

std::vector<std::pair<FilterCategory, DilationStats>> aggregate_dilation_stats(
    const std::vector<double>& dilations,
    const std::vector<FilterCategory>& categories) {
  detail::require(dilations.size() == categories.size(),
                  "one category per dilation value required");
  std::vector<std::pair<FilterCategory, DilationStats>> out;
  for (int c = 0; c < 4; ++c) {
    const auto cat = static_cast<FilterCategory>(c);
    double sum = 0.0;
    int count = 0;
    for (std::size_t i = 0; i < dilations.size(); ++i) {
      if (categories[i] == cat) {
        sum += dilations[i];
        ++count;
      }
    }
    if (count == 0) continue;
    const double mean = sum / count;
    double ss = 0.0;
    for (std::size_t i = 0; i < dilations.size(); ++i) {
      if (categories[i] == cat) {
        const double d = dilations[i] - mean;
        ss += d * d;
      }
    }
    out.emplace_back(cat, DilationStats{mean, std::sqrt(ss / count), count});
  }
  return out;
}

namespace {

Point2 offset_at(const TraceLayer& layer, int tap, Point2 pos) {
  if (layer.offsets.data.empty()) return Point2{};
  const PlaneView py = plane(layer.offsets.data, 0, 2 * tap);
  const PlaneView px = plane(layer.offsets.data, 0, 2 * tap + 1);
  return Point2{sample_bilinear(px, pos), sample_bilinear(py, pos)};
}

}  // namespace

SampleTrace trace_sampling(const std::vector<TraceLayer>& layers, int unit_y,
                           int unit_x) {
  detail::require(!layers.empty(), "trace needs at least one layer");
  SampleTrace trace;
  trace.unit_layer = static_cast<int>(layers.size());
  trace.unit_y = unit_y;
  trace.unit_x = unit_x;
  trace.depth = static_cast<int>(layers.size());

  std::vector<Point2> frontier{
      Point2{static_cast<double>(unit_x), static_cast<double>(unit_y)}};
  for (const TraceLayer& layer : layers) {
    const std::vector<Point2> grid = sampling_grid(layer.spec);
    std::vector<Point2> next;
    next.reserve(frontier.size() * grid.size());
    for (const Point2& pos : frontier) {
      const Point2 center = filter_center(layer.spec, pos.y, pos.x);
      for (int t = 0; t < layer.spec.taps(); ++t) {
        const Point2 d = offset_at(layer, t, pos);
        next.push_back(Point2{center.x + grid[static_cast<std::size_t>(t)].x + d.x,
                              center.y + grid[static_cast<std::size_t>(t)].y + d.y});
      }
    }
    frontier = std::move(next);
  }
  trace.points = std::move(frontier);
  return trace;
}

int count_distinct(std::vector<Point2> points, double tol) {
  std::sort(points.begin(), points.end(), [](const Point2& a, const Point2& b) {
    return a.y != b.y ? a.y < b.y : a.x < b.x;
  });
  int distinct = 0;
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i == 0 || std::abs(points[i].y - points[i - 1].y) > tol ||
        std::abs(points[i].x - points[i - 1].x) > tol)
      ++distinct;
  }
  return distinct;
}

}  // namespace dcn
