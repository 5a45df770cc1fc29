#include "dcn/bilinear.hpp"

#include <cmath>

namespace dcn {

PlaneView plane(const Tensor4& t, int n, int c) {
  detail::require(n >= 0 && n < t.n() && c >= 0 && c < t.c(),
                  "plane index out of range");
  return PlaneView{t.data() + t.flat(n, c, 0, 0), t.h(), t.w()};
}

double sample_bilinear(const PlaneView& pl, Point2 p) {
  detail::require(pl.height > 0 && pl.width > 0, "sample on empty plane");
  if (!(p.x > -1.0 && p.x < pl.width && p.y > -1.0 && p.y < pl.height))
    return 0.0;
  const int x0 = static_cast<int>(std::floor(p.x));
  const int y0 = static_cast<int>(std::floor(p.y));
  const double fx = p.x - x0;
  const double fy = p.y - y0;
  if (fx == 0.0 && fy == 0.0 && pl.inside(y0, x0)) return pl.at(y0, x0);

  double acc = 0.0;
  if (pl.inside(y0, x0)) acc += (1.0 - fx) * (1.0 - fy) * pl.at(y0, x0);
  if (pl.inside(y0, x0 + 1)) acc += fx * (1.0 - fy) * pl.at(y0, x0 + 1);
  if (pl.inside(y0 + 1, x0)) acc += (1.0 - fx) * fy * pl.at(y0 + 1, x0);
  if (pl.inside(y0 + 1, x0 + 1)) acc += fx * fy * pl.at(y0 + 1, x0 + 1);
  return acc;
}

double sample_bilinear_grad(const PlaneView& pl, Point2 p, SampleGrad& grad) {
  detail::require(pl.height > 0 && pl.width > 0, "sample on empty plane");
  grad = SampleGrad{};
  if (!(p.x > -1.0 && p.x < pl.width && p.y > -1.0 && p.y < pl.height))
    return 0.0;
  const int x0 = static_cast<int>(std::floor(p.x));
  const int y0 = static_cast<int>(std::floor(p.y));
  const double fx = p.x - x0;
  const double fy = p.y - y0;

  const bool in00 = pl.inside(y0, x0);
  const bool in10 = pl.inside(y0, x0 + 1);
  const bool in01 = pl.inside(y0 + 1, x0);
  const bool in11 = pl.inside(y0 + 1, x0 + 1);
  const double v00 = in00 ? pl.at(y0, x0) : 0.0;
  const double v10 = in10 ? pl.at(y0, x0 + 1) : 0.0;
  const double v01 = in01 ? pl.at(y0 + 1, x0) : 0.0;
  const double v11 = in11 ? pl.at(y0 + 1, x0 + 1) : 0.0;

  grad.d_dx = (1.0 - fy) * (v10 - v00) + fy * (v11 - v01);
  grad.d_dy = (1.0 - fx) * (v01 - v00) + fx * (v11 - v10);
  if (in00) grad.taps[grad.num_taps++] = {x0, y0, (1.0 - fx) * (1.0 - fy)};
  if (in10) grad.taps[grad.num_taps++] = {x0 + 1, y0, fx * (1.0 - fy)};
  if (in01) grad.taps[grad.num_taps++] = {x0, y0 + 1, (1.0 - fx) * fy};
  if (in11) grad.taps[grad.num_taps++] = {x0 + 1, y0 + 1, fx * fy};

  // identical term order as sample_bilinear so the two agree bit-for-bit
  if (fx == 0.0 && fy == 0.0 && in00) return v00;
  double acc = 0.0;
  if (in00) acc += (1.0 - fx) * (1.0 - fy) * v00;
  if (in10) acc += fx * (1.0 - fy) * v10;
  if (in01) acc += (1.0 - fx) * fy * v01;
  if (in11) acc += fx * fy * v11;
  return acc;
}

}  // namespace dcn
