#include "dcn/train.hpp"

#include <cmath>
#include <limits>
#include <random>
#include <utility>

namespace dcn {

double lr_at(const LayerConfig& cfg, int iteration) {
  detail::require(cfg.lr > 0.0, "learning rate must be > 0");
  detail::require(cfg.offset_lr_mult >= 0.0, "offset multiplier must be >= 0");
  detail::require(iteration >= 0, "iteration must be >= 0");
  return iteration >= 2 * cfg.total_iters / 3 ? cfg.lr * 0.1 : cfg.lr;
}

double mse_loss(const Tensor4& pred, const Tensor4& target) {
  detail::require(pred.same_shape(target), "loss shapes must match");
  detail::require(pred.size() > 0, "loss over an empty tensor");
  double acc = 0.0;
  for (std::int64_t i = 0; i < pred.size(); ++i) {
    const double d = pred[i] - target[i];
    acc += d * d;
  }
  return acc / pred.size();
}

Tensor4 mse_grad(const Tensor4& pred, const Tensor4& target) {
  detail::require(pred.same_shape(target), "loss shapes must match");
  Tensor4 g(pred.n(), pred.c(), pred.h(), pred.w());
  const double scale = 2.0 / pred.size();
  for (std::int64_t i = 0; i < pred.size(); ++i)
    g[i] = scale * (pred[i] - target[i]);
  return g;
}

ConvPipeline make_conv_pipeline(const ConvSpec& spec, ConvWeights main,
                                int branch_in_channels) {
  ConvPipeline p;
  p.spec = spec;
  p.main = std::move(main);
  p.branch = ConvWeights{
      zeros(2 * spec.taps(), branch_in_channels, spec.kernel_h, spec.kernel_w),
      {}};
  return p;
}

double conv_pipeline_forward(const ConvPipeline& p, const Tensor4& x,
                             const Tensor4& branch_x, const Tensor4& target,
                             ConvPipelineCache& cache) {
  detail::require(branch_x.n() == x.n() && branch_x.h() == x.h() &&
                      branch_x.w() == x.w(),
                  "branch input must cover the same locations as x");
  cache.offsets = offset_branch_forward(branch_x, p.branch, p.spec);
  cache.y = deform_conv2d(x, p.main, cache.offsets, p.spec);
  return mse_loss(cache.y, target);
}

ConvPipelineGrads conv_pipeline_backward(const ConvPipeline& p, const Tensor4& x,
                                         const Tensor4& branch_x,
                                         const Tensor4& target,
                                         const ConvPipelineCache& cache) {
  const Tensor4 d_y = mse_grad(cache.y, target);
  DeformConvGrads dg =
      deform_conv2d_backward(x, p.main, cache.offsets, p.spec, d_y);
  Conv2dGrads bg = conv2d_backward(branch_x, p.branch, p.spec, dg.d_offsets);
  return ConvPipelineGrads{std::move(dg.d_weights), std::move(dg.d_bias),
                           std::move(bg.d_weights), std::move(bg.d_bias)};
}

void sgd_step(ConvPipeline& p, const ConvPipelineGrads& g,
              const LayerConfig& cfg, int iteration, bool update_main) {
  const double rate = lr_at(cfg, iteration);
  if (update_main) {
    p.main.w.add_scaled(g.d_main_w, -rate);
    for (std::size_t i = 0; i < p.main.bias.size(); ++i)
      p.main.bias[i] -= rate * g.d_main_bias[i];
  }
  const double branch_rate = rate * cfg.offset_lr_mult;
  p.branch.w.add_scaled(g.d_branch_w, -branch_rate);
  for (std::size_t i = 0; i < p.branch.bias.size(); ++i)
    p.branch.bias[i] -= branch_rate * g.d_branch_bias[i];
}

RoiPipeline make_roi_pipeline(int k, int channels, double gamma) {
  detail::require(k >= 1 && channels >= 1, "bad RoI pipeline dims");
  return RoiPipeline{k, gamma, zero_fc(2 * k * k, channels * k * k)};
}

double roi_pipeline_forward(const RoiPipeline& p, const Tensor4& x,
                            const Roi& roi, const Tensor4& target,
                            RoiPipelineCache& cache) {
  cache.pooled = roi_pool(x, roi, p.k);
  cache.offsets = roi_offset_branch(cache.pooled, p.fc, roi, p.gamma);
  cache.y = deform_roi_pool(x, roi, p.k, cache.offsets);
  return mse_loss(cache.y, target);
}

FcWeights roi_pipeline_backward(const RoiPipeline& p, const Tensor4& x,
                                const Roi& roi, const Tensor4& target,
                                const RoiPipelineCache& cache) {
  const Tensor4 d_y = mse_grad(cache.y, target);
  const DeformRoiGrads pg =
      deform_roi_pool_backward(x, roi, p.k, cache.offsets, d_y);
  FcWeights d_fc = zero_fc(p.fc.out_dim, p.fc.in_dim);
  for (int b = 0; b < p.k * p.k; ++b) {
    const Point2 dn = pg.d_normalized[static_cast<std::size_t>(b)];
    for (int c = 0; c < p.fc.in_dim; ++c) {
      d_fc.w[static_cast<std::size_t>(2 * b) * p.fc.in_dim + c] =
          dn.y * cache.pooled[c];
      d_fc.w[static_cast<std::size_t>(2 * b + 1) * p.fc.in_dim + c] =
          dn.x * cache.pooled[c];
    }
  }
  return d_fc;
}

void sgd_step(RoiPipeline& p, const FcWeights& d_fc, const LayerConfig& cfg,
              int iteration) {
  const double rate = lr_at(cfg, iteration) * cfg.offset_lr_mult;
  for (std::size_t i = 0; i < p.fc.w.size(); ++i) p.fc.w[i] -= rate * d_fc.w[i];
}

namespace {

// Mixture of three incommensurate low-frequency sinusoids with seeded phases.
// Shortest wavelength ~7 px, so the shift-recovery basin is several pixels
// wide.
Tensor4 smooth_plane(int h, int w, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto phase = [&rng] {
    return 2.0 * 3.14159265358979323846 *
           static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };
  const double p1 = phase(), p2 = phase(), p3 = phase();
  Tensor4 t(1, 1, h, w);
  const double tau = 2.0 * 3.14159265358979323846;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      t.at(0, 0, y, x) = std::sin(tau * (x / 9.7 + y / 13.3) + p1) +
                         0.7 * std::cos(tau * (x / 7.1 - y / 11.9) + p2) +
                         0.5 * std::sin(tau * (x / 15.3 + y / 8.7) + p3);
  return t;
}

Point2 mean_offset(const OffsetField& field) {
  double sy = 0.0, sx = 0.0;
  const int cells = field.data.h() * field.data.w();
  for (int oy = 0; oy < field.data.h(); ++oy) {
    for (int ox = 0; ox < field.data.w(); ++ox) {
      sy += field.data.at(0, 0, oy, ox);
      sx += field.data.at(0, 1, oy, ox);
    }
  }
  return Point2{sx / cells, sy / cells};
}

}  // namespace

ShiftRecoveryResult train_shift_recovery(Point2 shift, int iters,
                                         const LayerConfig& cfg,
                                         std::uint64_t seed) {
  detail::require(std::abs(shift.x) <= 3.0 && std::abs(shift.y) <= 3.0,
                  "shift must be at most 3 px per axis");
  detail::require(iters >= 0, "iteration count must be >= 0");

  const int size = 20;
  const Tensor4 x = smooth_plane(size, size, seed);
  const Tensor4 branch_x = [size] {
    Tensor4 t(1, 1, size, size);
    for (std::int64_t i = 0; i < t.size(); ++i) t[i] = 1.0;
    return t;
  }();

  ConvSpec spec;
  spec.kernel_h = spec.kernel_w = 1;

  ConvWeights unit{zeros(1, 1, 1, 1), {}};
  unit.w[0] = 1.0;

  // The target is exactly representable: it IS the deformable op at the true
  // shift, so the loss minimum is 0 at offsets == shift.
  OffsetField true_field = OffsetField::zero_for(spec, 1, size, size);
  for (int oy = 0; oy < size; ++oy) {
    for (int ox = 0; ox < size; ++ox) {
      true_field.data.at(0, 0, oy, ox) = shift.y;
      true_field.data.at(0, 1, oy, ox) = shift.x;
    }
  }
  const Tensor4 target = deform_conv2d(x, unit, true_field, spec);

  ConvPipeline pipe = make_conv_pipeline(spec, unit, 1);
  LayerConfig schedule = cfg;
  schedule.total_iters = iters;

  ShiftRecoveryResult result;
  result.history.reserve(static_cast<std::size_t>(iters));
  double best = std::numeric_limits<double>::infinity();
  ConvPipelineCache cache;
  for (int it = 0; it < iters; ++it) {
    const double loss = conv_pipeline_forward(pipe, x, branch_x, target, cache);
    result.history.push_back(ShiftIterRow{it, loss, mean_offset(cache.offsets)});
    if (loss < best) best = loss;
    if (loss > 10.0 * best + 1e-12) {
      result.diverged = true;
      break;
    }
    const ConvPipelineGrads g =
        conv_pipeline_backward(pipe, x, branch_x, target, cache);
    sgd_step(pipe, g, schedule, it, /*update_main=*/false);
  }
  result.final_loss = conv_pipeline_forward(pipe, x, branch_x, target, cache);
  result.learned = mean_offset(cache.offsets);
  return result;
}

}  // namespace dcn
