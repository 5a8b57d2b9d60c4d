#include <algorithm>
#include <cmath>

#include "causalign/autodiff.hpp"

namespace causalign::ad {
namespace {

struct Eval {
  double value;
  std::vector<bool> signature;
};

Eval evaluate(const ScalarFn& f) {
  Tape tape;
  const Var y = f(tape);
  const double v = y.item();
  if (!std::isfinite(v)) throw NonFiniteError("grad_check: function value is not finite");
  return {v, tape.activation_signature()};
}

}  // namespace

GradCheckResult grad_check(const ScalarFn& f, std::span<Tensor* const> params, double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1e-2))
    throw InvalidParams("grad_check: epsilon must lie in (0, 1e-2], got " + std::to_string(epsilon));

  for (Tensor* p : params) {
    if (!p->requires_grad()) p->set_requires_grad(true);
    p->zero_grad();
  }
  {
    Tape tape;
    const Var y = f(tape);
    if (!std::isfinite(y.item())) throw NonFiniteError("grad_check: function value is not finite");
    tape.backward(y);
  }
  std::vector<Matrix> analytic;
  analytic.reserve(params.size());
  for (Tensor* p : params) {
    if (!p->grad().allFinite()) throw NonFiniteError("grad_check: analytic gradient is not finite");
    analytic.push_back(p->grad());
  }

  GradCheckResult result;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Matrix& x = params[k]->data();
    for (Index i = 0; i < x.size(); ++i) {
      const double saved = x.data()[i];
      x.data()[i] = saved + epsilon;
      const Eval plus = evaluate(f);
      x.data()[i] = saved - epsilon;
      const Eval minus = evaluate(f);
      x.data()[i] = saved;
      if (plus.signature != minus.signature) {
        ++result.skipped_kinks;
        continue;
      }
      const double numeric = (plus.value - minus.value) / (2.0 * epsilon);
      const double a = analytic[k].data()[i];
      const double err = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      result.max_rel_error = std::max(result.max_rel_error, err);
      ++result.checked;
    }
  }
  return result;
}

double grad_check(const std::function<Var(Tape&, Var)>& f, const Matrix& point, double epsilon) {
  Tensor x(point, true);
  Tensor* params[] = {&x};
  return grad_check([&](Tape& t) { return f(t, t.param(x)); }, params, epsilon).max_rel_error;
}

void SgdMomentum::step(std::span<Tensor* const> params) {
  if (velocity_.size() != params.size()) {
    velocity_.clear();
    for (Tensor* p : params) velocity_.push_back(Matrix::Zero(p->data().rows(), p->data().cols()));
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    Matrix& v = velocity_[i];
    v = momentum_ * v + params[i]->grad();
    params[i]->data() -= lr_ * v;
  }
}

double train_step(Tape& tape, Var loss, std::span<Tensor* const> params, SgdMomentum& opt) {
  const double value = loss.item();
  if (!std::isfinite(value))
    throw TrainingDiverged("loss became non-finite (" + std::to_string(value) + ")");
  for (Tensor* p : params) p->zero_grad();
  tape.backward(loss);
  opt.step(params);
  return value;
}

}  // namespace causalign::ad
