#include "capsre/capsule.hpp"

#include <array>

#include "capsre/ops.hpp"

namespace capsre::capsule {

Var squash(const Var& x) {
  const Shape s = x.shape();
  const std::size_t n = x.value().size();
  return ops::reshape(ops::squash_rows(ops::reshape(x, Shape{1, n})), s);
}

CapsuleSet primary_capsules(const Var& sequence, const Var& filters,
                            const Var& bias, std::size_t channels,
                            std::size_t dim) {
  const std::size_t len = sequence.value().rows();
  const std::size_t width = sequence.value().cols();
  if (filters.shape() != Shape{channels * dim, 2 * width} ||
      bias.value().size() != channels * dim) {
    throw ContractViolation("primary_capsules: filters " + filters.shape().str() +
                            " / bias " + bias.shape().str() + " do not match C=" +
                            std::to_string(channels) + ", d=" + std::to_string(dim) +
                            ", width " + std::to_string(width));
  }
  const Var pad(Tensor(Shape{1, width}));
  const std::array<Var, 3> padded_parts{pad, sequence, pad};
  const Var padded = ops::concat(padded_parts, 0);  // (L+2) x width
  const std::array<Var, 2> window_parts{ops::slice(padded, 0, 0, len + 1),
                                        ops::slice(padded, 0, 1, len + 2)};
  const Var windows = ops::concat(window_parts, 1);  // (L+1) x 2width
  const Var responses =
      ops::add_row(ops::matmul(windows, ops::transpose(filters)), bias);
  const Var grouped = ops::reshape(responses, Shape{(len + 1) * channels, dim});
  CapsuleSet out;
  out.u = ops::squash_rows(grouped);
  out.activation = ops::row_norms(out.u);
  return out;
}

Var votes(const CapsuleSet& children, const Var& transforms, const Var& bias) {
  return ops::capsule_votes(children.u, transforms, bias);
}

RoutingState dynamic_routing(const Var& votes, const Var& child_activation,
                             std::size_t iterations) {
  if (iterations < 1) {
    throw ContractViolation("dynamic_routing: iterations must be >= 1");
  }
  const Tensor& v = votes.value();
  if (v.rank() != 3 || child_activation.value().size() != v.dim(0)) {
    throw ContractViolation("dynamic_routing: votes " + v.shape().str() +
                            " vs child activations " +
                            child_activation.shape().str());
  }
  const std::size_t h = v.dim(0), e = v.dim(1);
  RoutingState st;
  st.logits = Var(Tensor(Shape{h, e}));
  for (std::size_t it = 0; it < iterations; ++it) {
    if (it > 0) st.logits = ops::add(st.logits, ops::route_agreement(votes, st.parents));
    st.couplings = ops::scale_rows(ops::softmax(st.logits, 1), child_activation);
    st.parents = ops::squash_rows(ops::route_aggregate(st.couplings, votes));
    st.activation = ops::row_norms(st.parents);
  }
  return st;
}

}  // namespace capsre::capsule
