#pragma once

#include <cstdint>
#include <vector>

#include "capsre/autodiff.hpp"

namespace capsre {

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Bias-corrected Adam. Moment tensors are aligned with the ParameterSet the
/// optimizer was built for.
class Adam {
 public:
  Adam(const ParameterSet& params, AdamConfig config);

  /// One update. A non-finite gradient aborts before any parameter changes
  /// and raises CheckedFailure naming the parameter.
  void step(ParameterSet& params, const Gradients& grads);

  const AdamConfig& config() const { return config_; }
  std::uint64_t steps() const { return step_; }
  const std::vector<Tensor>& first_moments() const { return m_; }
  const std::vector<Tensor>& second_moments() const { return v_; }

  /// Restores state saved from an optimizer over the same parameter shapes.
  void restore(std::uint64_t steps, std::vector<Tensor> m, std::vector<Tensor> v);

 private:
  AdamConfig config_;
  std::uint64_t step_ = 0;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
};

}  // namespace capsre
