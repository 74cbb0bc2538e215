#include "pirnn/hungarian.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pirnn/errors.hpp"

namespace pirnn {

namespace {

struct Solution {
  std::vector<int> slot;          // column of every row
  std::vector<double> u, v;       // optimal dual potentials, 1-based
};

// Shortest-augmenting-path Kuhn-Munkres with potentials. Rows are ground truths
// (n), columns are prediction slots (m >= n).
Solution solve(std::size_t n, std::size_t m, const auto& cost) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> p(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    p[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, kInf);
    std::vector<bool> used(m + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = p[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  std::vector<int> slot(n, -1);
  for (std::size_t j = 1; j <= m; ++j) {
    if (p[j] != 0) slot[p[j] - 1] = static_cast<int>(j - 1);
  }
  return {std::move(slot), std::move(u), std::move(v)};
}

void validate(const CostMatrix& c) {
  if (c.n_gt > c.n_pred) {
    throw UsageError("hungarian: " + std::to_string(c.n_gt) + " ground truths exceed " + std::to_string(c.n_pred) +
                     " prediction slots");
  }
  if (c.cost.size() != c.n_pred * c.n_gt) throw DimensionError("hungarian: cost buffer size mismatch");
  for (double x : c.cost) {
    if (!std::isfinite(x)) throw NumericError("hungarian: non-finite cost");
  }
}

// Optimal assignment of gts [first, n_gt) to the slots not in `taken`.
struct SubResult {
  double cost = 0.0;
  std::vector<int> slot;  // indexed by gt - first, in original slot numbering
};

SubResult sub_solve(const CostMatrix& c, std::size_t first, const std::vector<bool>& taken) {
  SubResult r;
  const std::size_t n = c.n_gt - first;
  if (n == 0) return r;
  std::vector<std::size_t> free_slots;
  for (std::size_t j = 0; j < c.n_pred; ++j) {
    if (!taken[j]) free_slots.push_back(j);
  }
  auto view = [&](std::size_t gt, std::size_t k) { return c(free_slots[k], first + gt); };
  const auto sol = solve(n, free_slots.size(), view);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(sol.slot[i]);
    r.cost += view(i, k);
    r.slot.push_back(static_cast<int>(free_slots[k]));
  }
  return r;
}

}  // namespace

double hungarian_cost(const CostMatrix& c) {
  validate(c);
  return sub_solve(c, 0, std::vector<bool>(c.n_pred, false)).cost;
}

// Among all optimal assignments, returns the lexicographically smallest slot
// sequence in gt order. An edge can belong to an optimal assignment only if its
// reduced cost under the optimal potentials is zero, which prunes nearly every
// candidate when costs are distinct.
Assignment hungarian(const CostMatrix& c) {
  validate(c);
  Assignment a;
  if (c.n_gt == 0) return a;
  auto full = [&](std::size_t gt, std::size_t j) { return c(j, gt); };
  const Solution sol = solve(c.n_gt, c.n_pred, full);
  double best = 0.0;
  double scale = 1.0;
  for (std::size_t gt = 0; gt < c.n_gt; ++gt) best += c(static_cast<std::size_t>(sol.slot[gt]), gt);
  for (double x : c.cost) scale = std::max(scale, std::abs(x));
  const double tol = 1e-11 * std::max(1.0, std::abs(best));
  const double slack_tol = 1e-9 * scale * static_cast<double>(c.n_gt + 1);

  std::vector<bool> taken(c.n_pred, false);
  std::vector<int> completion = sol.slot;  // an optimal assignment consistent with the fixed prefix
  double prefix = 0.0;
  for (std::size_t gt = 0; gt < c.n_gt; ++gt) {
    const auto current = static_cast<std::size_t>(completion[gt]);
    std::size_t chosen = current;
    for (std::size_t j = 0; j < current; ++j) {
      if (taken[j]) continue;
      if (c(j, gt) - sol.u[gt + 1] - sol.v[j + 1] > slack_tol) continue;
      taken[j] = true;
      SubResult rest = sub_solve(c, gt + 1, taken);
      if (prefix + c(j, gt) + rest.cost <= best + tol) {
        chosen = j;
        for (std::size_t k = 0; k < rest.slot.size(); ++k) completion[gt + 1 + k] = rest.slot[k];
        break;
      }
      taken[j] = false;
    }
    taken[chosen] = true;
    completion[gt] = static_cast<int>(chosen);
    prefix += c(chosen, gt);
    a.slot_of_gt.push_back(static_cast<int>(chosen));
  }
  a.cost = prefix;
  return a;
}

}  // namespace pirnn
