#pragma once

#include <span>
#include <vector>

#include "pirnn/autodiff.hpp"
#include "pirnn/hungarian.hpp"
#include "pirnn/vec3.hpp"

namespace pirnn {

/// Active ground truth of one frame: trajectory ids and unit DOAs.
struct FrameTruth {
  std::vector<int> ids;
  std::vector<Vec3> doas;
};

struct LossConfig {
  std::size_t window = 11;          // sPIT window in frames, odd
  double unassigned_weight = 1.0;   // weight of the zero-norm pull on unassigned slots
  double aux_fpit_weight = 0.0;     // optional frame-level term added to the sPIT loss
};

// Squared Euclidean distance between every prediction row and every ground truth.
CostMatrix frame_cost(const Tensor& preds, std::span<const Vec3> gts);

/// Per-row regression targets and weights realizing one frame's PIT loss for
/// a fixed assignment: assigned rows target their ground truth with weight
/// 1/n_assigned, the rest target zero with weight w_u/n_unassigned.
struct FrameTargets {
  Tensor target;
  std::vector<double> weights;
  std::vector<int> slot_of_gt;
};

FrameTargets frame_targets(const Tensor& preds, const FrameTruth& truth, std::span<const int> slot_of_gt,
                           double unassigned_weight = 1.0);

// Frame-level PIT: minimum of the frame loss over all injective assignments.
FrameTargets fpit_targets(const Tensor& preds, const FrameTruth& truth, double unassigned_weight = 1.0);
double fpit_loss(const Tensor& preds, const FrameTruth& truth, double unassigned_weight = 1.0);
Var fpit_loss(Var preds, const FrameTruth& truth, double unassigned_weight = 1.0);

// Sliding-window PIT surrogate: the assignment used at frame t minimizes the loss
// accumulated over frames [t - W/2, t + W/2] (clipped), tracking trajectory ids
// across the window. Averaged over frames; W = 1 is the mean frame-level PIT loss.
std::vector<FrameTargets> spit_targets(std::span<const Tensor> preds, std::span<const FrameTruth> truth,
                                       std::size_t window, double unassigned_weight = 1.0);
double spit_loss(std::span<const Tensor> preds, std::span<const FrameTruth> truth, std::size_t window,
                 double unassigned_weight = 1.0);
Var spit_loss(std::span<const Var> preds, std::span<const FrameTruth> truth, std::size_t window,
              double unassigned_weight = 1.0);

// sPIT plus the optional auxiliary frame-level term.
Var training_loss(std::span<const Var> preds, std::span<const FrameTruth> truth, const LossConfig& cfg);

}  // namespace pirnn
