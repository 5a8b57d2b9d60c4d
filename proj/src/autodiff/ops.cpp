#include <algorithm>
#include <cmath>
#include <limits>

#include "causalign/autodiff.hpp"

namespace causalign::ad {
namespace {

[[noreturn]] void mismatch(const char* op, const Matrix& a, const Matrix& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_of(a).str() +
                   " and " + shape_of(b).str());
}

void same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw Error("tape", "operands recorded on different tapes");
}

// Numerically stable softmax of one row (or any contiguous run of values).
template <typename In, typename Out>
void softmax_into(const In& x, Out&& y) {
  const double mx = x.maxCoeff();
  y = (x.array() - mx).exp();
  y /= y.sum();
}

}  // namespace

Var matmul(Var a, Var b) {
  same_tape(a, b);
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  if (A.cols() != B.rows()) mismatch("matmul", A, B);
  Matrix out;
  out.noalias() = A * B;
  return a.tape().record(std::move(out), {a.id(), b.id()},
                         [ai = a.id(), bi = b.id()](Tape& t, std::size_t self) {
                           const Matrix& g = t.grad(self);
                           if (t.needs_grad(ai)) t.grad_mut(ai).noalias() += g * t.value(bi).transpose();
                           if (t.needs_grad(bi)) t.grad_mut(bi).noalias() += t.value(ai).transpose() * g;
                         });
}

Var transpose(Var a) {
  Matrix out = a.value().transpose();
  return a.tape().record(std::move(out), {a.id()}, [ai = a.id()](Tape& t, std::size_t self) {
    t.grad_mut(ai) += t.grad(self).transpose();
  });
}

Var add(Var a, Var b) {
  same_tape(a, b);
  if (a.shape() != b.shape()) mismatch("add", a.value(), b.value());
  Matrix out = a.value() + b.value();
  return a.tape().record(std::move(out), {a.id(), b.id()},
                         [ai = a.id(), bi = b.id()](Tape& t, std::size_t self) {
                           if (t.needs_grad(ai)) t.grad_mut(ai) += t.grad(self);
                           if (t.needs_grad(bi)) t.grad_mut(bi) += t.grad(self);
                         });
}

Var add_row(Var a, Var row) {
  same_tape(a, row);
  const Matrix& A = a.value();
  const Matrix& R = row.value();
  if (R.rows() != 1 || R.cols() != A.cols()) mismatch("add_row", A, R);
  Matrix out = A.rowwise() + R.row(0);
  return a.tape().record(std::move(out), {a.id(), row.id()},
                         [ai = a.id(), ri = row.id()](Tape& t, std::size_t self) {
                           if (t.needs_grad(ai)) t.grad_mut(ai) += t.grad(self);
                           if (t.needs_grad(ri)) t.grad_mut(ri) += t.grad(self).colwise().sum();
                         });
}

Var outer_sum(Var col, Var row) {
  same_tape(col, row);
  const Matrix& C = col.value();
  const Matrix& R = row.value();
  if (C.cols() != 1 || R.rows() != 1) mismatch("outer_sum", C, R);
  Matrix out(C.rows(), R.cols());
  for (Index i = 0; i < C.rows(); ++i) out.row(i) = R.row(0).array() + C(i, 0);
  return col.tape().record(std::move(out), {col.id(), row.id()},
                           [ci = col.id(), ri = row.id()](Tape& t, std::size_t self) {
                             const Matrix& g = t.grad(self);
                             if (t.needs_grad(ci)) t.grad_mut(ci) += g.rowwise().sum();
                             if (t.needs_grad(ri)) t.grad_mut(ri) += g.colwise().sum();
                           });
}

Var sub(Var a, Var b) {
  same_tape(a, b);
  if (a.shape() != b.shape()) mismatch("sub", a.value(), b.value());
  Matrix out = a.value() - b.value();
  return a.tape().record(std::move(out), {a.id(), b.id()},
                         [ai = a.id(), bi = b.id()](Tape& t, std::size_t self) {
                           if (t.needs_grad(ai)) t.grad_mut(ai) += t.grad(self);
                           if (t.needs_grad(bi)) t.grad_mut(bi) -= t.grad(self);
                         });
}

Var mul(Var a, Var b) {
  same_tape(a, b);
  if (a.shape() != b.shape()) mismatch("mul", a.value(), b.value());
  Matrix out = a.value().cwiseProduct(b.value());
  return a.tape().record(std::move(out), {a.id(), b.id()},
                         [ai = a.id(), bi = b.id()](Tape& t, std::size_t self) {
                           const Matrix& g = t.grad(self);
                           if (t.needs_grad(ai)) t.grad_mut(ai) += g.cwiseProduct(t.value(bi));
                           if (t.needs_grad(bi)) t.grad_mut(bi) += g.cwiseProduct(t.value(ai));
                         });
}

Var mul_col(Var a, Var col) {
  same_tape(a, col);
  const Matrix& A = a.value();
  const Matrix& C = col.value();
  if (C.cols() != 1 || C.rows() != A.rows()) mismatch("mul_col", A, C);
  Matrix out = A.array().colwise() * C.col(0).array();
  return a.tape().record(std::move(out), {a.id(), col.id()},
                         [ai = a.id(), ci = col.id()](Tape& t, std::size_t self) {
                           const Matrix& g = t.grad(self);
                           if (t.needs_grad(ai))
                             t.grad_mut(ai).array() += g.array().colwise() * t.value(ci).col(0).array();
                           if (t.needs_grad(ci))
                             t.grad_mut(ci) += g.cwiseProduct(t.value(ai)).rowwise().sum();
                         });
}

Var scale(Var a, double s) {
  Matrix out = a.value() * s;
  return a.tape().record(std::move(out), {a.id()}, [ai = a.id(), s](Tape& t, std::size_t self) {
    t.grad_mut(ai) += s * t.grad(self);
  });
}

Var relu(Var a) { return leaky_relu(a, 0.0); }

Var leaky_relu(Var a, double slope) {
  const Matrix& A = a.value();
  auto& sig = a.tape().activation_signature();
  Matrix out(A.rows(), A.cols());
  for (Index i = 0; i < A.size(); ++i) {
    const double x = A.data()[i];
    sig.push_back(x > 0.0);
    out.data()[i] = x > 0.0 ? x : slope * x;
  }
  return a.tape().record(std::move(out), {a.id()}, [ai = a.id(), slope](Tape& t, std::size_t self) {
    const Matrix& x = t.value(ai);
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad_mut(ai);
    for (Index i = 0; i < x.size(); ++i)
      ga.data()[i] += x.data()[i] > 0.0 ? g.data()[i] : slope * g.data()[i];
  });
}

namespace {

// dx = y * (g - <y, g>) per row; masked entries have y == 0 and get nothing.
void softmax_backward_rows(const Matrix& y, const Matrix& g, Matrix& gx) {
  for (Index r = 0; r < y.rows(); ++r) {
    const double dot = y.row(r).dot(g.row(r));
    gx.row(r).array() += y.row(r).array() * (g.row(r).array() - dot);
  }
}

}  // namespace

Var row_softmax(Var a) {
  const Matrix& A = a.value();
  Matrix out(A.rows(), A.cols());
  for (Index r = 0; r < A.rows(); ++r) softmax_into(A.row(r), out.row(r));
  return a.tape().record(std::move(out), {a.id()}, [ai = a.id()](Tape& t, std::size_t self) {
    softmax_backward_rows(t.value(self), t.grad(self), t.grad_mut(ai));
  });
}

Var masked_row_softmax(Var a, const Matrix& mask) {
  const Matrix& A = a.value();
  if (shape_of(mask) != shape_of(A)) mismatch("masked_row_softmax", A, mask);
  Matrix out = Matrix::Zero(A.rows(), A.cols());
  for (Index r = 0; r < A.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (Index c = 0; c < A.cols(); ++c)
      if (mask(r, c) != 0.0) mx = std::max(mx, A(r, c));
    if (!std::isfinite(mx)) continue;
    double total = 0.0;
    for (Index c = 0; c < A.cols(); ++c)
      if (mask(r, c) != 0.0) total += (out(r, c) = std::exp(A(r, c) - mx));
    out.row(r) /= total;
  }
  return a.tape().record(std::move(out), {a.id()}, [ai = a.id()](Tape& t, std::size_t self) {
    softmax_backward_rows(t.value(self), t.grad(self), t.grad_mut(ai));
  });
}

Var joint_softmax(Var a) {
  const Matrix& A = a.value();
  Matrix out(A.rows(), A.cols());
  softmax_into(A.reshaped<Eigen::RowMajor>(), out.reshaped<Eigen::RowMajor>());
  return a.tape().record(std::move(out), {a.id()}, [ai = a.id()](Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    const double dot = y.cwiseProduct(g).sum();
    t.grad_mut(ai).array() += y.array() * (g.array() - dot);
  });
}

Var group_softmax(Var col, Index group) {
  const Matrix& C = col.value();
  if (C.cols() != 1 || group <= 0 || C.rows() % group != 0)
    throw ShapeError("group_softmax: column " + shape_of(C).str() +
                     " is not divisible into groups of " + std::to_string(group));
  Matrix out(C.rows(), 1);
  for (Index s = 0; s < C.rows(); s += group)
    softmax_into(C.col(0).segment(s, group), out.col(0).segment(s, group));
  return col.tape().record(std::move(out), {col.id()},
                           [ci = col.id(), group](Tape& t, std::size_t self) {
                             const Matrix& y = t.value(self);
                             const Matrix& g = t.grad(self);
                             Matrix& gx = t.grad_mut(ci);
                             for (Index s = 0; s < y.rows(); s += group) {
                               const double dot =
                                   y.col(0).segment(s, group).dot(g.col(0).segment(s, group));
                               gx.col(0).segment(s, group).array() +=
                                   y.col(0).segment(s, group).array() *
                                   (g.col(0).segment(s, group).array() - dot);
                             }
                           });
}

Var sum(Var a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape().record(std::move(out), {a.id()}, [ai = a.id()](Tape& t, std::size_t self) {
    t.grad_mut(ai).array() += t.grad(self)(0, 0);
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  Matrix out(1, 1);
  out(0, 0) = a.value().sum() / n;
  return a.tape().record(std::move(out), {a.id()}, [ai = a.id(), n](Tape& t, std::size_t self) {
    t.grad_mut(ai).array() += t.grad(self)(0, 0) / n;
  });
}

Var row_mean(Var a) {
  const double n = static_cast<double>(a.value().cols());
  Matrix out = a.value().rowwise().sum() / n;
  return a.tape().record(std::move(out), {a.id()}, [ai = a.id(), n](Tape& t, std::size_t self) {
    t.grad_mut(ai).colwise() += t.grad(self).col(0) / n;
  });
}

Var col_mean(Var a) {
  const double n = static_cast<double>(a.value().rows());
  Matrix out = a.value().colwise().sum() / n;
  return a.tape().record(std::move(out), {a.id()}, [ai = a.id(), n](Tape& t, std::size_t self) {
    t.grad_mut(ai).rowwise() += t.grad(self).row(0) / n;
  });
}

Var col_max(Var a) {
  const Matrix& A = a.value();
  if (A.rows() == 0) throw ShapeError("col_max: " + shape_of(A).str() + " has no rows");
  Matrix out(1, A.cols());
  std::vector<Index> arg(static_cast<std::size_t>(A.cols()), 0);
  for (Index c = 0; c < A.cols(); ++c) {
    for (Index r = 1; r < A.rows(); ++r)
      if (A(r, c) > A(arg[static_cast<std::size_t>(c)], c)) arg[static_cast<std::size_t>(c)] = r;
    out(0, c) = A(arg[static_cast<std::size_t>(c)], c);
  }
  return a.tape().record(std::move(out), {a.id()}, [ai = a.id(), arg = std::move(arg)](Tape& t, std::size_t self) {
    Matrix& g = t.grad_mut(ai);
    for (std::size_t c = 0; c < arg.size(); ++c)
      g(arg[c], static_cast<Index>(c)) += t.grad(self)(0, static_cast<Index>(c));
  });
}

Var segment_sum(Var a, Index group) {
  const Matrix& A = a.value();
  if (group <= 0 || A.rows() % group != 0)
    throw ShapeError("segment_sum: " + shape_of(A).str() + " is not divisible into groups of " +
                     std::to_string(group));
  const Index n = A.rows() / group;
  Matrix out = Matrix::Zero(n, A.cols());
  for (Index r = 0; r < A.rows(); ++r) out.row(r / group) += A.row(r);
  return a.tape().record(std::move(out), {a.id()}, [ai = a.id(), group](Tape& t, std::size_t self) {
    const Matrix& g = t.grad(self);
    Matrix& ga = t.grad_mut(ai);
    for (Index r = 0; r < ga.rows(); ++r) ga.row(r) += g.row(r / group);
  });
}

Var concat_cols(Var a, Var b) {
  same_tape(a, b);
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  if (A.rows() != B.rows()) mismatch("concat_cols", A, B);
  Matrix out(A.rows(), A.cols() + B.cols());
  out << A, B;
  return a.tape().record(std::move(out), {a.id(), b.id()},
                         [ai = a.id(), bi = b.id(), ac = A.cols(), bc = B.cols()](Tape& t,
                                                                                  std::size_t self) {
                           const Matrix& g = t.grad(self);
                           if (t.needs_grad(ai)) t.grad_mut(ai) += g.leftCols(ac);
                           if (t.needs_grad(bi)) t.grad_mut(bi) += g.rightCols(bc);
                         });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  Index rows = 0;
  const Index cols = parts[0].value().cols();
  std::vector<std::size_t> ids;
  std::vector<Index> offsets;
  for (const Var& p : parts) {
    same_tape(parts[0], p);
    if (p.value().cols() != cols) mismatch("concat_rows", parts[0].value(), p.value());
    offsets.push_back(rows);
    rows += p.value().rows();
    ids.push_back(p.id());
  }
  Matrix out(rows, cols);
  for (std::size_t i = 0; i < parts.size(); ++i)
    out.middleRows(offsets[i], parts[i].value().rows()) = parts[i].value();
  auto inputs = ids;
  return parts[0].tape().record(std::move(out), std::move(inputs),
                                [ids, offsets](Tape& t, std::size_t self) {
                                  const Matrix& g = t.grad(self);
                                  for (std::size_t i = 0; i < ids.size(); ++i) {
                                    if (!t.needs_grad(ids[i])) continue;
                                    Matrix& gi = t.grad_mut(ids[i]);
                                    gi += g.middleRows(offsets[i], gi.rows());
                                  }
                                });
}

Var index_select(Var a, std::span<const Index> rows) {
  const Matrix& A = a.value();
  Matrix out(static_cast<Index>(rows.size()), A.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= A.rows())
      throw ShapeError("index_select: row " + std::to_string(rows[i]) + " outside " +
                       shape_of(A).str());
    out.row(static_cast<Index>(i)) = A.row(rows[i]);
  }
  std::vector<Index> idx(rows.begin(), rows.end());
  return a.tape().record(std::move(out), {a.id()},
                         [ai = a.id(), idx = std::move(idx)](Tape& t, std::size_t self) {
                           const Matrix& g = t.grad(self);
                           Matrix& ga = t.grad_mut(ai);
                           for (std::size_t i = 0; i < idx.size(); ++i)
                             ga.row(idx[i]) += g.row(static_cast<Index>(i));
                         });
}

Var patch(Var a, std::span<const Index> rows, Index col_begin, Index col_end,
          const Matrix& values) {
  const Matrix& A = a.value();
  const Index width = col_end - col_begin;
  if (col_begin < 0 || col_end > A.cols() || width <= 0 ||
      values.rows() != static_cast<Index>(rows.size()) || values.cols() != width)
    throw ShapeError("patch: values " + shape_of(values).str() + " do not fit region of " +
                     shape_of(A).str());
  Matrix out = A;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= A.rows())
      throw ShapeError("patch: row " + std::to_string(rows[i]) + " outside " + shape_of(A).str());
    out.row(rows[i]).segment(col_begin, width) = values.row(static_cast<Index>(i));
  }
  std::vector<Index> idx(rows.begin(), rows.end());
  return a.tape().record(std::move(out), {a.id()},
                         [ai = a.id(), idx = std::move(idx), col_begin, width](Tape& t,
                                                                             std::size_t self) {
                           Matrix g = t.grad(self);
                           for (Index r : idx) g.row(r).segment(col_begin, width).setZero();
                           t.grad_mut(ai) += g;
                         });
}

Var block_qk(Var q, Var k, Index m) {
  same_tape(q, k);
  const Matrix& Q = q.value();
  const Matrix& K = k.value();
  if (shape_of(Q) != shape_of(K) || m <= 0 || Q.rows() % m != 0) mismatch("block_qk", Q, K);
  Matrix out(Q.rows(), m);
  for (Index s = 0; s < Q.rows(); s += m)
    out.middleRows(s, m).noalias() = Q.middleRows(s, m) * K.middleRows(s, m).transpose();
  return q.tape().record(std::move(out), {q.id(), k.id()},
                         [qi = q.id(), ki = k.id(), m](Tape& t, std::size_t self) {
                           const Matrix& g = t.grad(self);
                           const Matrix& Qv = t.value(qi);
                           const Matrix& Kv = t.value(ki);
                           for (Index s = 0; s < g.rows(); s += m) {
                             if (t.needs_grad(qi))
                               t.grad_mut(qi).middleRows(s, m).noalias() +=
                                   g.middleRows(s, m) * Kv.middleRows(s, m);
                             if (t.needs_grad(ki))
                               t.grad_mut(ki).middleRows(s, m).noalias() +=
                                   g.middleRows(s, m).transpose() * Qv.middleRows(s, m);
                           }
                         });
}

Var block_apply(Var p, Var v, Index m) {
  same_tape(p, v);
  const Matrix& P = p.value();
  const Matrix& V = v.value();
  if (P.cols() != m || P.rows() != V.rows() || m <= 0 || P.rows() % m != 0)
    mismatch("block_apply", P, V);
  Matrix out(V.rows(), V.cols());
  for (Index s = 0; s < P.rows(); s += m)
    out.middleRows(s, m).noalias() = P.middleRows(s, m) * V.middleRows(s, m);
  return p.tape().record(std::move(out), {p.id(), v.id()},
                         [pi = p.id(), vi = v.id(), m](Tape& t, std::size_t self) {
                           const Matrix& g = t.grad(self);
                           const Matrix& Pv = t.value(pi);
                           const Matrix& Vv = t.value(vi);
                           for (Index s = 0; s < g.rows(); s += m) {
                             if (t.needs_grad(pi))
                               t.grad_mut(pi).middleRows(s, m).noalias() +=
                                   g.middleRows(s, m) * Vv.middleRows(s, m).transpose();
                             if (t.needs_grad(vi))
                               t.grad_mut(vi).middleRows(s, m).noalias() +=
                                   Pv.middleRows(s, m).transpose() * g.middleRows(s, m);
                           }
                         });
}

Matrix softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Index r = 0; r < logits.rows(); ++r) softmax_into(logits.row(r), out.row(r));
  return out;
}

double cross_entropy_value(const Matrix& logits, const Matrix& one_hot) {
  if (shape_of(logits) != shape_of(one_hot)) mismatch("cross_entropy", logits, one_hot);
  double total = 0.0;
  for (Index r = 0; r < logits.rows(); ++r) {
    const double mx = logits.row(r).maxCoeff();
    const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    for (Index c = 0; c < logits.cols(); ++c)
      if (one_hot(r, c) != 0.0) total -= one_hot(r, c) * (logits(r, c) - lse);
  }
  return total / static_cast<double>(logits.rows());
}

Var cross_entropy(Var logits, const Matrix& one_hot) {
  const Matrix& L = logits.value();
  Matrix out(1, 1);
  out(0, 0) = cross_entropy_value(L, one_hot);
  return logits.tape().record(std::move(out), {logits.id()},
                              [li = logits.id(), y = one_hot](Tape& t, std::size_t self) {
                                const Matrix p = softmax_rows(t.value(li));
                                const double g = t.grad(self)(0, 0) / static_cast<double>(p.rows());
                                Matrix& gl = t.grad_mut(li);
                                for (Index r = 0; r < p.rows(); ++r)
                                  gl.row(r) += g * (p.row(r) * y.row(r).sum() - y.row(r));
                              });
}

}  // namespace causalign::ad
