#include "capsre/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace capsre {

namespace {

double eval_scalar(const std::function<Var(const Var&)>& f, const Tensor& x) {
  const Var y = f(Var(x));
  if (y.value().size() != 1) {
    throw ContractViolation("grad_check: function must return a scalar, got " +
                            y.shape().str());
  }
  const double v = y.value().item();
  if (!std::isfinite(v)) {
    throw CheckedFailure("grad_check: function value is not finite");
  }
  return v;
}

}  // namespace

double grad_check(const std::function<Var(const Var&)>& f, const Tensor& x,
                  double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw ContractViolation("grad_check: eps " + std::to_string(eps) +
                            " outside [1e-7, 1e-3]");
  }
  Tape tape;
  const Var leaf = tape.leaf(x);
  const Var y = f(leaf);
  if (!y.tracked()) {
    // Output does not depend on x: analytic gradient is zero.
    eval_scalar(f, x);
  }
  if (y.value().size() != 1) {
    throw ContractViolation("grad_check: function must return a scalar, got " +
                            y.shape().str());
  }
  if (!std::isfinite(y.value().item())) {
    throw CheckedFailure("grad_check: function value is not finite");
  }
  const Tensor analytic = y.tracked() ? tape.backward(y).wrt(leaf) : Tensor(x.shape());

  double worst = 0.0;
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double up = eval_scalar(f, probe);
    probe[i] = orig - eps;
    const double down = eval_scalar(f, probe);
    probe[i] = orig;
    const double numeric = (up - down) / (2.0 * eps);
    const double err =
        std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace capsre
