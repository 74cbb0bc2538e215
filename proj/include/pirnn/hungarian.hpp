#pragma once

#include <cstddef>
#include <vector>

namespace pirnn {

/// n_pred x n_gt matrix of nonnegative costs, row-major.
struct CostMatrix {
  std::size_t n_pred = 0;
  std::size_t n_gt = 0;
  std::vector<double> cost;

  CostMatrix() = default;
  CostMatrix(std::size_t preds, std::size_t gts) : n_pred(preds), n_gt(gts), cost(preds * gts, 0.0) {}

  double& operator()(std::size_t pred, std::size_t gt) { return cost[pred * n_gt + gt]; }
  double operator()(std::size_t pred, std::size_t gt) const { return cost[pred * n_gt + gt]; }
};

struct Assignment {
  std::vector<int> slot_of_gt;  // gt index -> prediction slot
  double cost = 0.0;
};

/// Minimum-cost injective assignment of ground truths to prediction slots.
///
/// Among optimal assignments (costs equal within a 1e-11 relative tolerance)
/// the lexicographically smallest slot_of_gt vector is returned.
Assignment hungarian(const CostMatrix& c);

// Optimal total cost only, no tie-breaking.
double hungarian_cost(const CostMatrix& c);

}  // namespace pirnn
