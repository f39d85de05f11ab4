#include "capsre/autodiff.hpp"

namespace capsre {

Parameter& ParameterSet::add(std::string name, Tensor value) {
  if (index_.count(name)) {
    throw ContractViolation("duplicate parameter name '" + name + "'");
  }
  index_.emplace(name, params_.size());
  params_.push_back(std::make_unique<Parameter>(
      Parameter{std::move(name), std::make_shared<Tensor>(std::move(value))}));
  return *params_.back();
}

bool ParameterSet::contains(const std::string& name) const {
  return index_.count(name) != 0;
}

Parameter& ParameterSet::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) {
    throw ContractViolation("no parameter named '" + name + "'");
  }
  return *params_[it->second];
}

const Parameter& ParameterSet::get(const std::string& name) const {
  return const_cast<ParameterSet*>(this)->get(name);
}

const Parameter* ParameterSet::find(const std::string& name) const {
  auto it = index_.find(name);
  return it == index_.end() ? nullptr : params_[it->second].get();
}

std::size_t ParameterSet::index_of(const Parameter& p) const {
  auto it = index_.find(p.name);
  if (it == index_.end() || params_[it->second].get() != &p) {
    throw ContractViolation("parameter '" + p.name +
                            "' does not belong to this set");
  }
  return it->second;
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p->value->size();
  return n;
}

ParameterSet ParameterSet::clone() const {
  ParameterSet out;
  for (const auto& p : params_) out.add(p->name, *p->value);
  return out;
}

Var::Var(Tensor value)
    : value_(std::make_shared<const Tensor>(std::move(value))) {}

Var::Var(std::shared_ptr<const Tensor> value) : value_(std::move(value)) {}

Gradients::Gradients(const ParameterSet& params) {
  grads_.resize(params.size());
  shapes_.reserve(params.size());
  for (std::size_t i = 0; i < params.size(); ++i) {
    shapes_.push_back(params[i].value->shape());
  }
}

Tensor Gradients::of(std::size_t param_index) const {
  if (grads_.at(param_index).empty() && shapes_[param_index].size() != 0) {
    return Tensor(shapes_[param_index]);
  }
  return grads_[param_index];
}

const Tensor& Gradients::wrt(const Var& leaf) const {
  auto it = leaves_.find(leaf.slot());
  if (it == leaves_.end()) {
    throw ContractViolation("no gradient recorded for this Var");
  }
  return it->second;
}

void Gradients::accumulate(const Gradients& other, double scale) {
  if (grads_.size() != other.grads_.size()) {
    throw ContractViolation("gradient sets of different sizes");
  }
  for (std::size_t i = 0; i < grads_.size(); ++i) {
    const Tensor& src = other.grads_[i];
    if (src.empty()) continue;
    if (grads_[i].empty()) grads_[i] = Tensor(src.shape());
    auto dst = grads_[i].data();
    auto s = src.data();
    for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += scale * s[k];
  }
}

Var Tape::push(std::shared_ptr<const Tensor> value, Node node) {
  Var v(std::move(value));
  v.tape_ = this;
  v.slot_ = static_cast<std::int32_t>(nodes_.size());
  nodes_.push_back(std::move(node));
  return v;
}

Var Tape::leaf(Tensor value) {
  Node n;
  n.shape = value.shape();
  n.is_leaf = true;
  return push(std::make_shared<const Tensor>(std::move(value)), std::move(n));
}

Var Tape::param(const Parameter& p) {
  auto it = param_vars_.find(&p);
  if (it != param_vars_.end()) return it->second;
  if (params_ == nullptr) {
    throw ContractViolation("tape has no parameter set; cannot bind '" +
                            p.name + "'");
  }
  params_->index_of(p);
  Node n;
  n.shape = p.value->shape();
  n.is_leaf = true;
  n.param = &p;
  Var v = push(p.value, std::move(n));
  param_vars_.emplace(&p, v);
  return v;
}

Var Tape::record(Tensor value, std::span<const Var> inputs,
                 BackwardFn backward) {
  return record(std::make_shared<const Tensor>(std::move(value)), inputs,
                std::move(backward));
}

Var Tape::record(std::shared_ptr<const Tensor> value,
                 std::span<const Var> inputs, BackwardFn backward) {
  Tape* tape = nullptr;
  for (const Var& in : inputs) {
    if (!in.tracked()) continue;
    if (tape != nullptr && tape != in.tape()) {
      throw ContractViolation("op mixes Vars from different tapes");
    }
    tape = in.tape();
  }
  if (tape == nullptr) return Var(std::move(value));
  Node n;
  n.shape = value->shape();
  n.inputs.reserve(inputs.size());
  for (const Var& in : inputs) n.inputs.push_back(in.tracked() ? in.slot() : -1);
  n.backward = std::move(backward);
  return tape->push(std::move(value), std::move(n));
}

Gradients Tape::backward(const Var& loss) const {
  if (loss.tape() != this) {
    throw ContractViolation("backward: loss is not recorded on this tape");
  }
  if (loss.value().size() != 1) {
    throw ContractViolation("backward: loss must be scalar, got shape " +
                            loss.shape().str());
  }
  Gradients out = params_ ? Gradients(*params_) : Gradients();
  std::vector<Tensor> grads(nodes_.size());
  grads[loss.slot()] = Tensor(loss.shape(), 1.0);

  std::vector<Tensor*> in_ptrs;
  for (std::int32_t s = loss.slot(); s >= 0; --s) {
    const Node& node = nodes_[s];
    if (grads[s].empty() && node.shape.size() != 0) continue;
    if (node.is_leaf) {
      if (node.param != nullptr) {
        out.grads_[params_->index_of(*node.param)] = std::move(grads[s]);
      } else {
        out.leaves_[s] = std::move(grads[s]);
      }
      continue;
    }
    in_ptrs.assign(node.inputs.size(), nullptr);
    for (std::size_t k = 0; k < node.inputs.size(); ++k) {
      const std::int32_t in = node.inputs[k];
      if (in < 0) continue;
      if (grads[in].empty()) grads[in] = Tensor(nodes_[in].shape);
      in_ptrs[k] = &grads[in];
    }
    node.backward(grads[s], in_ptrs);
    grads[s] = Tensor();
  }
  // Leaves the loss does not depend on get explicit zeros.
  for (std::size_t s = 0; s < nodes_.size(); ++s) {
    const Node& node = nodes_[s];
    if (!node.is_leaf || node.param != nullptr) continue;
    const auto key = static_cast<std::int32_t>(s);
    if (!out.leaves_.count(key)) out.leaves_[key] = Tensor(node.shape);
  }
  return out;
}

Var Binder::operator()(const Parameter& p) const {
  auto it = overrides_.find(&p);
  if (it != overrides_.end()) return it->second;
  if (tape_ != nullptr) return tape_->param(p);
  return Var(std::shared_ptr<const Tensor>(p.value));
}

}  // namespace capsre
