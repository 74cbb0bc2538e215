#pragma once

#include <functional>
#include <string>

#include "pirnn/autodiff.hpp"

namespace pirnn {

using LossFn = std::function<Var(Tape&, const ParamStore&)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
};

/// Central-difference check of every parameter entry against backward().
/// Relative error per entry is |a - n| / max(|a|, |n|, 1e-8).
GradCheckResult grad_check_detailed(const LossFn& loss_fn, ParamStore& params, double eps = 1e-6);

inline double grad_check(const LossFn& loss_fn, ParamStore& params, double eps = 1e-6) {
  return grad_check_detailed(loss_fn, params, eps).max_rel_error;
}

}  // namespace pirnn
