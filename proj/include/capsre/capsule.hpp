#pragma once

#include <cstddef>
#include <span>

#include "capsre/autodiff.hpp"

namespace capsre::capsule {

/// Child capsules: u is H x d with H = (L+1) * C, activation holds |u_i|.
struct CapsuleSet {
  Var u;
  Var activation;
};

/// Final iteration of routing-by-agreement.
struct RoutingState {
  Var logits;      // b, H x E, as used by the final iteration
  Var couplings;   // c, H x E; row i sums to activation_i
  Var parents;     // v, E x d
  Var activation;  // a, E; a_j = |v_j|
};

/// squash(x) = |x|^2 / (0.5 + |x|^2) * x / |x|, zero at zero.
Var squash(const Var& x);

/// 2-gram capsules over the sequence padded by one zero row at each end, so
/// L rows yield L+1 windows. `filters` is (C*d) x (2 * width): each row is one
/// flattened 2 x width filter. Responses of one window are grouped into C
/// capsules of d consecutive filters and squashed per capsule.
CapsuleSet primary_capsules(const Var& sequence, const Var& filters,
                            const Var& bias, std::size_t channels,
                            std::size_t dim);

/// Votes u_hat[i, j] = W_j u_i + b_j, shape H x E x d.
Var votes(const CapsuleSet& children, const Var& transforms, const Var& bias);

/// Routing over `iterations` rounds starting from zero logits:
///   c = a_child * softmax_j(b);  v = squash(sum_i c u_hat);  b += u_hat . v
/// The logit update after the last round has no effect and is skipped.
RoutingState dynamic_routing(const Var& votes, const Var& child_activation,
                             std::size_t iterations);

}  // namespace capsre::capsule
