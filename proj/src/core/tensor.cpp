#include "capsre/tensor.hpp"

#include <cmath>
#include <sstream>

namespace capsre {

Shape::Shape(std::initializer_list<std::size_t> dims)
    : Shape(std::span<const std::size_t>(dims.begin(), dims.size())) {}

Shape::Shape(std::span<const std::size_t> dims) {
  if (dims.size() > kMaxRank) {
    throw ContractViolation("tensor rank " + std::to_string(dims.size()) +
                            " exceeds 3");
  }
  rank_ = dims.size();
  for (std::size_t i = 0; i < rank_; ++i) dims_[i] = dims[i];
}

std::size_t Shape::operator[](std::size_t axis) const {
  if (axis >= rank_) {
    throw ContractViolation("axis " + std::to_string(axis) +
                            " out of range for shape " + str());
  }
  return dims_[axis];
}

std::size_t Shape::size() const {
  std::size_t n = 1;
  for (std::size_t i = 0; i < rank_; ++i) n *= dims_[i];
  return n;
}

bool Shape::operator==(const Shape& other) const {
  if (rank_ != other.rank_) return false;
  for (std::size_t i = 0; i < rank_; ++i) {
    if (dims_[i] != other.dims_[i]) return false;
  }
  return true;
}

std::string Shape::str() const {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < rank_; ++i) {
    if (i) os << 'x';
    os << dims_[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, double fill)
    : shape_(shape), data_(shape.size(), fill) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(shape), data_(std::move(data)) {
  if (data_.size() != shape_.size()) {
    throw ContractViolation("tensor data length " +
                            std::to_string(data_.size()) +
                            " does not match shape " + shape_.str());
  }
}

Tensor Tensor::scalar(double value) { return Tensor(Shape{}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor(Shape{n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols,
                      std::vector<double> values) {
  return Tensor(Shape{rows, cols}, std::move(values));
}

std::size_t Tensor::rows() const {
  switch (rank()) {
    case 1:
      return 1;
    case 2:
      return shape_[0];
    default:
      throw ContractViolation("rows() needs rank 1 or 2, got " + shape_.str());
  }
}

std::size_t Tensor::cols() const {
  switch (rank()) {
    case 1:
      return shape_[0];
    case 2:
      return shape_[1];
    default:
      throw ContractViolation("cols() needs rank 1 or 2, got " + shape_.str());
  }
}

double Tensor::item() const {
  if (data_.size() != 1) {
    throw ContractViolation("item() on non-scalar tensor " + shape_.str());
  }
  return data_[0];
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape.size() != shape_.size()) {
    throw ContractViolation("cannot reshape " + shape_.str() + " to " +
                            shape.str());
  }
  return Tensor(shape, data_);
}

bool Tensor::all_finite() const {
  for (double x : data_) {
    if (!std::isfinite(x)) return false;
  }
  return true;
}

void Tensor::check_finite(const std::string& what) const {
  if (!all_finite()) {
    throw CheckedFailure("non-finite value in " + what);
  }
}

void Tensor::fill(double value) {
  for (double& x : data_) x = value;
}

Tensor& Tensor::operator+=(const Tensor& other) {
  require_same_shape("+=", shape_, other.shape_);
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

void require_same_shape(const char* op, const Shape& a, const Shape& b) {
  if (a != b) {
    throw ContractViolation(std::string(op) + ": shape mismatch " + a.str() +
                            " vs " + b.str());
  }
}

}  // namespace capsre
