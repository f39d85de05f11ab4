#pragma once

#include <functional>

#include "capsre/autodiff.hpp"

namespace capsre {

/// Compares the tape gradient of a scalar function against central
/// differences. Returns the largest
///   |analytic - numeric| / max(1, |numeric|)
/// over all coordinates of `x`. `eps` must lie in [1e-7, 1e-3]; a non-finite
/// function value raises CheckedFailure.
double grad_check(const std::function<Var(const Var&)>& f, const Tensor& x,
                  double eps = 1e-5);

}  // namespace capsre
