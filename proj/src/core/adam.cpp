#include "capsre/adam.hpp"

#include <cmath>

namespace capsre {

Adam::Adam(const ParameterSet& params, AdamConfig config) : config_(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_.emplace_back(params[i].value->shape());
    v_.emplace_back(params[i].value->shape());
  }
}

void Adam::step(ParameterSet& params, const Gradients& grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ContractViolation("adam: optimizer built for " +
                            std::to_string(m_.size()) + " parameters, got " +
                            std::to_string(params.size()) + " / " +
                            std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& g = grads.raw(i);
    if (g.empty()) continue;
    require_same_shape("adam", params[i].value->shape(), g.shape());
    if (!g.all_finite()) {
      throw CheckedFailure("adam: non-finite gradient for parameter '" +
                           params[i].name + "'");
    }
  }

  ++step_;
  const double t = static_cast<double>(step_);
  const double c1 = 1.0 - std::pow(config_.beta1, t);
  const double c2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Tensor& g = grads.raw(i);
    auto p = params[i].value->data();
    auto m = m_[i].data();
    auto v = v_[i].data();
    for (std::size_t k = 0; k < p.size(); ++k) {
      const double gk = g.empty() ? 0.0 : g[k];
      m[k] = config_.beta1 * m[k] + (1.0 - config_.beta1) * gk;
      v[k] = config_.beta2 * v[k] + (1.0 - config_.beta2) * gk * gk;
      const double mhat = m[k] / c1;
      const double vhat = v[k] / c2;
      p[k] -= config_.lr * mhat / (std::sqrt(vhat) + config_.eps);
    }
  }
}

void Adam::restore(std::uint64_t steps, std::vector<Tensor> m,
                   std::vector<Tensor> v) {
  if (m.size() != m_.size() || v.size() != v_.size()) {
    throw ContractViolation("adam: restored state has wrong parameter count");
  }
  for (std::size_t i = 0; i < m_.size(); ++i) {
    require_same_shape("adam restore", m_[i].shape(), m[i].shape());
    require_same_shape("adam restore", v_[i].shape(), v[i].shape());
  }
  step_ = steps;
  m_ = std::move(m);
  v_ = std::move(v);
}

}  // namespace capsre
