#include <algorithm>

#include "capsre/ops.hpp"
#include "capsre/training.hpp"

namespace capsre {

LossReport margin_loss(const Var& activations, std::span<const int> gold,
                       const MarginConfig& margins) {
  const Tensor& a = activations.value();
  if (a.rank() != 1) {
    throw ContractViolation("margin_loss: activations must be rank-1, got " +
                            a.shape().str());
  }
  const std::size_t e = a.size();
  Tensor pos_mask(Shape{e});
  for (int k : gold) {
    if (k < 0 || static_cast<std::size_t>(k) >= e) {
      throw ContractViolation("margin_loss: gold relation " + std::to_string(k) +
                              " outside [0, " + std::to_string(e) + ")");
    }
    pos_mask[static_cast<std::size_t>(k)] = 1.0;
  }
  Tensor neg_mask(Shape{e});
  for (std::size_t k = 0; k < e; ++k) neg_mask[k] = margins.lambda * (1.0 - pos_mask[k]);

  const Var shortfall = ops::relu(ops::add_scalar(ops::scale(activations, -1.0), margins.m_pos));
  const Var excess = ops::relu(ops::add_scalar(activations, -margins.m_neg));
  const Var per = ops::add(ops::mul(ops::square(shortfall), Var(std::move(pos_mask))),
                           ops::mul(ops::square(excess), Var(std::move(neg_mask))));
  LossReport out;
  out.per_relation.assign(per.value().data().begin(), per.value().data().end());
  out.total = ops::sum(per);
  return out;
}

}  // namespace capsre
