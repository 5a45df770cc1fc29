#pragma once

#include <cstdint>
#include <vector>

#include "dcn/conv.hpp"
#include "dcn/pool.hpp"
#include "dcn/tensor.hpp"

namespace dcn {

// SGD schedule: base rate for the first two thirds of the run, a tenth of it
// for the last third. Offset-branch parameters train at offset_lr_mult times
// the current rate.
struct LayerConfig {
  double lr = 1e-3;
  double offset_lr_mult = 1.0;  // 0.01 is the documented choice for fc branches
  int total_iters = 1000;
};

double lr_at(const LayerConfig& cfg, int iteration);

// Mean over all elements of (pred - target)^2, and its gradient w.r.t. pred.
double mse_loss(const Tensor4& pred, const Tensor4& target);
Tensor4 mse_grad(const Tensor4& pred, const Tensor4& target);

// Deformable conv with a conv offset branch. The branch sees its own input
// (usually the same tensor as the main path) and must start at zero weights
// so the first forward equals a plain convolution.
struct ConvPipeline {
  ConvSpec spec;
  ConvWeights main;
  ConvWeights branch;  // 2N output channels
};

ConvPipeline make_conv_pipeline(const ConvSpec& spec, ConvWeights main,
                                int branch_in_channels);

struct ConvPipelineCache {
  OffsetField offsets;
  Tensor4 y;
};

double conv_pipeline_forward(const ConvPipeline& p, const Tensor4& x,
                             const Tensor4& branch_x, const Tensor4& target,
                             ConvPipelineCache& cache);

struct ConvPipelineGrads {
  Tensor4 d_main_w;
  std::vector<double> d_main_bias;
  Tensor4 d_branch_w;
  std::vector<double> d_branch_bias;
};

ConvPipelineGrads conv_pipeline_backward(const ConvPipeline& p, const Tensor4& x,
                                         const Tensor4& branch_x,
                                         const Tensor4& target,
                                         const ConvPipelineCache& cache);

void sgd_step(ConvPipeline& p, const ConvPipelineGrads& g,
              const LayerConfig& cfg, int iteration, bool update_main = true);

// Deformable RoI pooling with an fc offset branch on the plainly pooled
// features. Only the branch carries parameters.
struct RoiPipeline {
  int k = 3;
  double gamma = 0.1;
  FcWeights fc;  // (2*k*k, C*k*k), zero-init
};

RoiPipeline make_roi_pipeline(int k, int channels, double gamma = 0.1);

struct RoiPipelineCache {
  Tensor4 pooled;  // plain pooling, the branch input
  BinOffsets offsets;
  Tensor4 y;
};

double roi_pipeline_forward(const RoiPipeline& p, const Tensor4& x,
                            const Roi& roi, const Tensor4& target,
                            RoiPipelineCache& cache);

// d loss / d fc weights; complete because the branch input is the plain
// pooling of x, which does not depend on the fc parameters.
FcWeights roi_pipeline_backward(const RoiPipeline& p, const Tensor4& x,
                                const Roi& roi, const Tensor4& target,
                                const RoiPipelineCache& cache);

void sgd_step(RoiPipeline& p, const FcWeights& d_fc, const LayerConfig& cfg,
              int iteration);

// Toy task: a 1x1 deformable conv with fixed unit weight must reproduce the
// input translated by `shift`. Offsets come from a zero-init 1x1 branch fed a
// constant plane, so the field is spatially constant and the loss minimum
// sits exactly at the true shift. Inputs are smooth sinusoid mixtures drawn
// from the seed.
struct ShiftIterRow {
  int iteration = 0;
  double loss = 0.0;
  Point2 mean_offset;
};

struct ShiftRecoveryResult {
  std::vector<ShiftIterRow> history;  // one row per iteration
  Point2 learned;                     // mean interior offset after the run
  double final_loss = 0.0;
  bool diverged = false;  // loss exceeded 10x its best value
};

ShiftRecoveryResult train_shift_recovery(Point2 shift, int iters,
                                         const LayerConfig& cfg,
                                         std::uint64_t seed);

}  // namespace dcn
