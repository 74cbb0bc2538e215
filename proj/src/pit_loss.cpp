#include "pirnn/pit_loss.hpp"

#include <algorithm>

#include "pirnn/errors.hpp"

namespace pirnn {

namespace {

Vec3 row3(const Tensor& t, std::size_t i) { return {t(i, 0), t(i, 1), t(i, 2)}; }

void check_preds(const Tensor& preds, const FrameTruth& truth) {
  if (preds.rank() != 2 || preds.cols() != 3) throw DimensionError("PIT loss: predictions must be M x 3");
  if (truth.doas.size() > preds.rows()) throw UsageError("PIT loss: more ground truths than prediction slots");
}

// Per-column-shifted assignment cost whose minimum is the minimum of the frame loss.
// Entry (m, s) = d^2(m, s)/n_a + w_u (P_max - |p_m|^2)/n_u; the shift is constant per
// column, so it does not change which injection is optimal.
void add_assignment_cost(CostMatrix& c, const Tensor& preds, const FrameTruth& truth,
                         std::span<const std::size_t> columns_of_truth, double unassigned_weight) {
  const std::size_t M = preds.rows();
  const std::size_t n_a = truth.doas.size();
  if (n_a == 0) return;
  const std::size_t n_u = M - n_a;
  std::vector<double> p2(M);
  double p2_max = 0.0;
  for (std::size_t m = 0; m < M; ++m) {
    const Vec3 p = row3(preds, m);
    p2[m] = dot(p, p);
    p2_max = std::max(p2_max, p2[m]);
  }
  for (std::size_t s = 0; s < n_a; ++s) {
    const std::size_t col = columns_of_truth[s];
    if (col == static_cast<std::size_t>(-1)) continue;
    for (std::size_t m = 0; m < M; ++m) {
      double v = sq_dist(row3(preds, m), truth.doas[s]) / static_cast<double>(n_a);
      if (n_u > 0) v += unassigned_weight * (p2_max - p2[m]) / static_cast<double>(n_u);
      c(m, col) += v;
    }
  }
}

std::vector<std::size_t> identity_columns(std::size_t n) {
  std::vector<std::size_t> cols(n);
  for (std::size_t i = 0; i < n; ++i) cols[i] = i;
  return cols;
}

double target_loss(const Tensor& preds, const FrameTargets& ft) {
  double s = 0.0;
  for (std::size_t m = 0; m < preds.rows(); ++m) {
    s += ft.weights[m] * sq_dist(row3(preds, m), row3(ft.target, m));
  }
  return s;
}

}  // namespace

CostMatrix frame_cost(const Tensor& preds, std::span<const Vec3> gts) {
  CostMatrix c(preds.rows(), gts.size());
  for (std::size_t m = 0; m < preds.rows(); ++m) {
    for (std::size_t s = 0; s < gts.size(); ++s) c(m, s) = sq_dist(row3(preds, m), gts[s]);
  }
  return c;
}

FrameTargets frame_targets(const Tensor& preds, const FrameTruth& truth, std::span<const int> slot_of_gt,
                           double unassigned_weight) {
  check_preds(preds, truth);
  const std::size_t M = preds.rows();
  const std::size_t n_a = truth.doas.size();
  const std::size_t n_u = M - n_a;
  FrameTargets ft{Tensor::zeros({M, 3}), std::vector<double>(M, n_u ? unassigned_weight / static_cast<double>(n_u) : 0.0),
                  std::vector<int>(slot_of_gt.begin(), slot_of_gt.end())};
  for (std::size_t s = 0; s < n_a; ++s) {
    const auto m = static_cast<std::size_t>(slot_of_gt[s]);
    for (std::size_t k = 0; k < 3; ++k) ft.target(m, k) = truth.doas[s][k];
    ft.weights[m] = 1.0 / static_cast<double>(n_a);
  }
  return ft;
}

FrameTargets fpit_targets(const Tensor& preds, const FrameTruth& truth, double unassigned_weight) {
  check_preds(preds, truth);
  CostMatrix c(preds.rows(), truth.doas.size());
  const auto cols = identity_columns(truth.doas.size());
  add_assignment_cost(c, preds, truth, cols, unassigned_weight);
  const Assignment a = hungarian(c);
  return frame_targets(preds, truth, a.slot_of_gt, unassigned_weight);
}

double fpit_loss(const Tensor& preds, const FrameTruth& truth, double unassigned_weight) {
  return target_loss(preds, fpit_targets(preds, truth, unassigned_weight));
}

Var fpit_loss(Var preds, const FrameTruth& truth, double unassigned_weight) {
  const FrameTargets ft = fpit_targets(preds.value(), truth, unassigned_weight);
  return weighted_sq_dist(preds, ft.target, ft.weights);
}

std::vector<FrameTargets> spit_targets(std::span<const Tensor> preds, std::span<const FrameTruth> truth,
                                       std::size_t window, double unassigned_weight) {
  if (window == 0 || window % 2 == 0) throw UsageError("sPIT window must be odd and positive, got " + std::to_string(window));
  if (preds.size() != truth.size()) throw DimensionError("sPIT: prediction and truth sequences differ in length");
  const std::size_t T = preds.size();
  const std::size_t half = window / 2;
  std::vector<FrameTargets> out;
  out.reserve(T);
  for (std::size_t t = 0; t < T; ++t) {
    const FrameTruth& now = truth[t];
    check_preds(preds[t], now);
    CostMatrix c(preds[t].rows(), now.doas.size());
    const std::size_t lo = t >= half ? t - half : 0;
    const std::size_t hi = std::min(T - 1, t + half);
    for (std::size_t tau = lo; tau <= hi; ++tau) {
      // Column of each ground truth at tau, when its trajectory is active at t.
      std::vector<std::size_t> cols(truth[tau].ids.size(), static_cast<std::size_t>(-1));
      for (std::size_t s = 0; s < truth[tau].ids.size(); ++s) {
        auto it = std::find(now.ids.begin(), now.ids.end(), truth[tau].ids[s]);
        if (it != now.ids.end()) cols[s] = static_cast<std::size_t>(it - now.ids.begin());
      }
      add_assignment_cost(c, preds[tau], truth[tau], cols, unassigned_weight);
    }
    const Assignment a = hungarian(c);
    out.push_back(frame_targets(preds[t], now, a.slot_of_gt, unassigned_weight));
  }
  return out;
}

double spit_loss(std::span<const Tensor> preds, std::span<const FrameTruth> truth, std::size_t window,
                 double unassigned_weight) {
  const auto targets = spit_targets(preds, truth, window, unassigned_weight);
  double total = 0.0;
  for (std::size_t t = 0; t < targets.size(); ++t) total += target_loss(preds[t], targets[t]);
  return total / static_cast<double>(targets.size());
}

Var spit_loss(std::span<const Var> preds, std::span<const FrameTruth> truth, std::size_t window,
              double unassigned_weight) {
  if (preds.empty()) throw UsageError("sPIT: empty sequence");
  std::vector<Tensor> values;
  values.reserve(preds.size());
  for (Var p : preds) values.push_back(p.value());
  const auto targets = spit_targets(values, truth, window, unassigned_weight);
  std::vector<Var> terms;
  terms.reserve(preds.size());
  for (std::size_t t = 0; t < preds.size(); ++t) {
    terms.push_back(reshape(weighted_sq_dist(preds[t], targets[t].target, targets[t].weights), {1, 1}));
  }
  return scale(sum(concat_rows(terms)), 1.0 / static_cast<double>(preds.size()));
}

Var training_loss(std::span<const Var> preds, std::span<const FrameTruth> truth, const LossConfig& cfg) {
  Var loss = spit_loss(preds, truth, cfg.window, cfg.unassigned_weight);
  if (cfg.aux_fpit_weight > 0.0) {
    Var aux = spit_loss(preds, truth, 1, cfg.unassigned_weight);
    loss = add(loss, scale(aux, cfg.aux_fpit_weight));
  }
  return loss;
}

}  // namespace pirnn
