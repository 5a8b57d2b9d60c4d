#pragma once

// Dense float64 tensors with a reverse-mode tape.
//
// Everything in this project is a matrix (node x feature, token x feature,
// 1 x class), so a Tensor is always rank 2 and row-major. A Tape records one
// forward pass; `backward` replays the recorded rules in reverse and
// accumulates into any parameter Tensor bound with `Tape::param`.

#include <Eigen/Dense>

#include <cstddef>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "causalign/errors.hpp"

namespace causalign::ad {

using Index = Eigen::Index;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Shape {
  Index rows = 0;
  Index cols = 0;
  friend bool operator==(const Shape&, const Shape&) = default;
  Index size() const { return rows * cols; }
  std::string str() const;
};

inline Shape shape_of(const Matrix& m) { return {m.rows(), m.cols()}; }

class Tensor {
 public:
  Tensor() = default;
  Tensor(Index rows, Index cols, bool requires_grad = false);
  explicit Tensor(Matrix data, bool requires_grad = false);

  Shape shape() const { return shape_of(data_); }
  const Matrix& data() const { return data_; }
  Matrix& data() { return data_; }
  const Matrix& grad() const { return grad_; }
  Matrix& grad() { return grad_; }
  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on);
  void zero_grad();

 private:
  Matrix data_;
  Matrix grad_;
  bool requires_grad_ = false;
};

class Tape;

// Handle to a value recorded on a tape. Cheap to copy; only valid while the
// tape is alive.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }
  const Matrix& value() const;
  Shape shape() const { return shape_of(value()); }
  double item() const;  // value of a 1x1 var

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var leaf(Matrix value, bool requires_grad);
  // Leaf whose gradient is added into `p.grad()` by backward().
  Var param(Tensor& p);

  Var record(Matrix value, std::vector<std::size_t> inputs, Backward rule);

  void backward(Var scalar);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const { return nodes_[id].grad; }
  Matrix& grad_mut(std::size_t id);
  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Sign pattern of every ReLU-family input seen so far; used by grad_check
  // to detect finite-difference stencils that straddle a kink.
  std::vector<bool>& activation_signature() { return signature_; }
  const std::vector<bool>& activation_signature() const { return signature_; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    std::vector<std::size_t> inputs;
    Backward rule;
    Tensor* param = nullptr;
  };
  std::vector<Node> nodes_;
  std::vector<bool> signature_;
};

// ---- ops -------------------------------------------------------------------
// All ops throw ShapeError naming both operand shapes on mismatch.

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);                        // same shape
Var add_row(Var a, Var row);                  // a (n x c) + row (1 x c)
Var outer_sum(Var col, Var row);              // (n x 1) + (1 x m) -> n x m
Var sub(Var a, Var b);
Var mul(Var a, Var b);                        // elementwise
Var mul_col(Var a, Var col);                  // row i of a scaled by col(i)
Var scale(Var a, double s);
Var relu(Var a);
Var leaky_relu(Var a, double slope);
Var row_softmax(Var a);
// Row softmax restricted to entries where mask != 0; masked entries are 0.
Var masked_row_softmax(Var a, const Matrix& mask);
// One softmax over every entry of `a` taken together.
Var joint_softmax(Var a);
// Column vector split into consecutive groups of `group` rows; a joint
// softmax is applied inside each group.
Var group_softmax(Var col, Index group);
Var sum(Var a);
Var mean(Var a);
Var row_mean(Var a);                          // n x c -> n x 1
Var col_mean(Var a);                          // n x c -> 1 x c
Var col_max(Var a);                           // n x c -> 1 x c; ties go to the lowest row
Var segment_sum(Var a, Index group);          // sums consecutive row groups
Var concat_cols(Var a, Var b);
Var concat_rows(std::span<const Var> parts);
Var index_select(Var a, std::span<const Index> rows);
// Replace a rectangular region (given rows, columns [col_begin, col_end)) by
// constants. Gradient does not flow into the replaced region.
Var patch(Var a, std::span<const Index> rows, Index col_begin, Index col_end,
          const Matrix& values);
// For row blocks of size m: Q_b K_b^T stacked, (B*m) x m.
Var block_qk(Var q, Var k, Index m);
// For row blocks of size m: P_b V_b stacked, (B*m) x w.
Var block_apply(Var p, Var v, Index m);
// Mean cross-entropy of a 1 x C (or n x C) logit matrix against one-hot rows.
Var cross_entropy(Var logits, const Matrix& one_hot);

// ---- numerics without a tape -----------------------------------------------

Matrix softmax_rows(const Matrix& logits);
double cross_entropy_value(const Matrix& logits, const Matrix& one_hot);

// ---- gradient checking -----------------------------------------------------

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t skipped_kinks = 0;
};

using ScalarFn = std::function<Var(Tape&)>;

// Central differences over every coordinate of `params`. f must bind the
// params onto the tape with Tape::param. The error per coordinate is
// |analytic - numeric| / max(1, |analytic|). Coordinates whose stencil
// changes the sign pattern of a ReLU-family input are skipped.
GradCheckResult grad_check(const ScalarFn& f, std::span<Tensor* const> params,
                           double epsilon = 1e-6);

// Single-point form: f receives the point as a requires-grad leaf.
double grad_check(const std::function<Var(Tape&, Var)>& f, const Matrix& point,
                  double epsilon = 1e-6);

// ---- optimisation ----------------------------------------------------------

class SgdMomentum {
 public:
  SgdMomentum(double lr, double momentum) : lr_(lr), momentum_(momentum) {}
  void step(std::span<Tensor* const> params);
  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }

 private:
  double lr_;
  double momentum_;
  std::vector<Matrix> velocity_;
};

// Zero grads, backprop `loss`, apply one optimizer step. Returns the loss.
// Throws TrainingDiverged on a non-finite loss.
double train_step(Tape& tape, Var loss, std::span<Tensor* const> params,
                  SgdMomentum& opt);

}  // namespace causalign::ad
