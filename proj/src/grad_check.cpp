#include "pirnn/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "pirnn/errors.hpp"

namespace pirnn {

GradCheckResult grad_check_detailed(const LossFn& loss_fn, ParamStore& params, double eps) {
  if (!(eps > 0.0 && eps <= 1e-3)) throw UsageError("grad_check: eps must lie in (0, 1e-3]");
  {
    Tape tape;
    Var loss = loss_fn(tape, params);
    backward(loss, params);
  }
  auto eval = [&] {
    Tape tape(false);
    return loss_fn(tape, params).value()[0];
  };

  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    for (std::size_t i = 0; i < params.value(p).size(); ++i) {
      double& x = params.value(p)[i];
      const double saved = x;
      x = saved + eps;
      const double up = eval();
      x = saved - eps;
      const double down = eval();
      x = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double analytic = params.grad(p)[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      if (rel > result.max_rel_error) result = {rel, params.name(p), i};
    }
  }
  return result;
}

}  // namespace pirnn
