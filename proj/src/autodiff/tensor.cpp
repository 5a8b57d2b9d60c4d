#include "causalign/autodiff.hpp"

#include <cmath>

namespace causalign::ad {

std::string Shape::str() const {
  return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]";
}

Tensor::Tensor(Index rows, Index cols, bool requires_grad)
    : data_(Matrix::Zero(rows, cols)) {
  set_requires_grad(requires_grad);
}

Tensor::Tensor(Matrix data, bool requires_grad) : data_(std::move(data)) {
  set_requires_grad(requires_grad);
}

void Tensor::set_requires_grad(bool on) {
  requires_grad_ = on;
  if (on) grad_ = Matrix::Zero(data_.rows(), data_.cols());
  else grad_.resize(0, 0);
}

void Tensor::zero_grad() {
  if (requires_grad_) grad_.setZero(data_.rows(), data_.cols());
}

const Matrix& Var::value() const { return tape_->value(id_); }

double Var::item() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1)
    throw ShapeError("item() needs a 1x1 value, got " + shape_of(v).str());
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::leaf(Matrix value, bool requires_grad) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::param(Tensor& p) {
  Node n;
  n.value = p.data();
  n.needs_grad = p.requires_grad();
  n.param = p.requires_grad() ? &p : nullptr;
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Var Tape::record(Matrix value, std::vector<std::size_t> inputs, Backward rule) {
#ifndef NDEBUG
  if (!value.allFinite()) throw NonFiniteError("non-finite value produced on tape");
#endif
  Node n;
  n.value = std::move(value);
  for (std::size_t i : inputs) n.needs_grad = n.needs_grad || nodes_[i].needs_grad;
  n.inputs = std::move(inputs);
  if (n.needs_grad) n.rule = std::move(rule);
  nodes_.push_back(std::move(n));
  return {this, nodes_.size() - 1};
}

Matrix& Tape::grad_mut(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var scalar) {
  if (&scalar.tape() != this) throw Error("tape", "backward on a var from another tape");
  const Matrix& v = value(scalar.id());
  if (v.rows() != 1 || v.cols() != 1)
    throw ShapeError("backward needs a scalar, got " + shape_of(v).str());
  grad_mut(scalar.id())(0, 0) += 1.0;
  for (std::size_t i = scalar.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.rule) n.rule(*this, i);
    if (n.param != nullptr) n.param->grad() += n.grad;
  }
}

}  // namespace causalign::ad
