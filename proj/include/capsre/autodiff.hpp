#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "capsre/tensor.hpp"

namespace capsre {

/// A named, learnable tensor. The value is shared with every Var that reads
/// it; optimizers update it in place between forward passes.
struct Parameter {
  std::string name;
  std::shared_ptr<Tensor> value;
};

/// Ordered collection of parameters with stable addresses.
class ParameterSet {
 public:
  Parameter& add(std::string name, Tensor value);
  bool contains(const std::string& name) const;
  Parameter& get(const std::string& name);
  const Parameter& get(const std::string& name) const;
  /// nullptr when absent.
  const Parameter* find(const std::string& name) const;
  std::size_t index_of(const Parameter& p) const;

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return *params_[i]; }
  const Parameter& operator[](std::size_t i) const { return *params_[i]; }

  /// Total number of scalar entries.
  std::size_t scalar_count() const;
  ParameterSet clone() const;

 private:
  std::vector<std::unique_ptr<Parameter>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

class Tape;

/// Handle to a tensor value, optionally tracked on a Tape. Untracked Vars are
/// constants: ops on them record nothing.
class Var {
 public:
  Var() = default;
  explicit Var(Tensor value);
  explicit Var(std::shared_ptr<const Tensor> value);

  const Tensor& value() const { return *value_; }
  const std::shared_ptr<const Tensor>& shared() const { return value_; }
  const Shape& shape() const { return value_->shape(); }
  bool tracked() const { return tape_ != nullptr; }
  Tape* tape() const { return tape_; }
  std::int32_t slot() const { return slot_; }

 private:
  friend class Tape;
  std::shared_ptr<const Tensor> value_;
  Tape* tape_ = nullptr;
  std::int32_t slot_ = -1;
};

/// Backward rule: given d(loss)/d(output), accumulate into d(loss)/d(input_k).
/// Entries of `input_grads` are nullptr for untracked inputs.
using BackwardFn = std::function<void(const Tensor& output_grad,
                                      std::span<Tensor* const> input_grads)>;

/// Per-parameter gradients produced by one backward pass, aligned with a
/// ParameterSet. Parameters the loss never touched have empty tensors.
class Gradients {
 public:
  Gradients() = default;
  explicit Gradients(const ParameterSet& params);

  std::size_t size() const { return grads_.size(); }
  /// Zero tensor shaped like the parameter when no gradient reached it.
  Tensor of(std::size_t param_index) const;
  const Tensor& raw(std::size_t param_index) const { return grads_[param_index]; }
  Tensor& raw(std::size_t param_index) { return grads_[param_index]; }

  /// Gradient of a tape leaf created with Tape::leaf().
  const Tensor& wrt(const Var& leaf) const;

  /// this += scale * other (other may have empty entries).
  void accumulate(const Gradients& other, double scale = 1.0);

 private:
  friend class Tape;
  std::vector<Tensor> grads_;
  std::vector<Shape> shapes_;
  std::unordered_map<std::int32_t, Tensor> leaves_;
};

/// Records differentiable operations in creation order (a topological order)
/// and replays them in reverse on backward(). Single-writer; use one tape per
/// thread.
class Tape {
 public:
  explicit Tape(const ParameterSet* params = nullptr) : params_(params) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// A differentiable input not tied to a parameter.
  Var leaf(Tensor value);
  /// A tracked view of a parameter. Repeated calls return the same node.
  Var param(const Parameter& p);

  /// Records `value` as the output of an op over `inputs`. When no input is
  /// tracked, the result is an untracked constant and nothing is recorded.
  static Var record(Tensor value, std::span<const Var> inputs,
                    BackwardFn backward);
  static Var record(std::shared_ptr<const Tensor> value,
                    std::span<const Var> inputs, BackwardFn backward);

  /// Reverse pass from a scalar loss recorded on this tape.
  Gradients backward(const Var& loss) const;

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Shape shape;
    std::vector<std::int32_t> inputs;
    BackwardFn backward;
    const Parameter* param = nullptr;
    bool is_leaf = false;
  };

  Var push(std::shared_ptr<const Tensor> value, Node node);

  const ParameterSet* params_;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, Var> param_vars_;
};

/// Maps parameters to Vars for one forward pass: tracked on a tape in
/// training, plain constants in evaluation. Overrides substitute a specific
/// Var for a parameter (used by gradient checks).
class Binder {
 public:
  Binder() = default;
  explicit Binder(Tape* tape) : tape_(tape) {}

  Var operator()(const Parameter& p) const;
  void override_with(const Parameter& p, Var v) { overrides_[&p] = std::move(v); }
  Tape* tape() const { return tape_; }

 private:
  Tape* tape_ = nullptr;
  std::unordered_map<const Parameter*, Var> overrides_;
};

}  // namespace capsre
