#include "apf/pade.hpp"

#include <cmath>

#include "apf/error.hpp"
#include "apf/sensitivity.hpp"

namespace apf {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

VectorXd center_or_zero(const VectorXd& x0, Index n) {
  if (x0.size() == 0) return VectorXd::Zero(n);
  if (x0.size() != n) throw Error(ErrorCode::kDimensionMismatch, "expansion point size");
  return x0;
}

}  // namespace

PadeModel pade11(double f0, const VectorXd& grad, const MatrixXd& lambda, const VectorXd& x0) {
  const Index n = grad.size();
  if (lambda.rows() != n || lambda.cols() != n) {
    throw Error(ErrorCode::kDimensionMismatch, "gradient and curvature sizes differ");
  }
  PadeModel m;
  m.x0 = center_or_zero(x0, n);
  m.a0 = f0;
  const double gg = grad.squaredNorm();
  if (std::sqrt(gg) <= 1e-12) {
    m.vanishing_gradient = true;
    m.b1 = VectorXd::Zero(n);
  } else {
    const VectorXd lg = lambda * grad;
    const double s = -grad.dot(lg) / (2.0 * gg);
    m.b1 = (-lg - s * grad) / gg;
  }
  m.a1 = grad + f0 * m.b1;
  return m;
}

TaylorModel taylor1(double f0, const VectorXd& grad, const VectorXd& x0) {
  TaylorModel t;
  t.order = 1;
  t.x0 = center_or_zero(x0, grad.size());
  t.f0 = f0;
  t.grad = grad;
  return t;
}

TaylorModel taylor2(double f0, const VectorXd& grad, const MatrixXd& hessian, const VectorXd& x0) {
  if (hessian.rows() != grad.size() || hessian.cols() != grad.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "gradient and Hessian sizes differ");
  }
  TaylorModel t = taylor1(f0, grad, x0);
  t.order = 2;
  t.hessian = 0.5 * (hessian + hessian.transpose());
  return t;
}

EvalResult evaluate(const PadeModel& m, const VectorXd& x) {
  if (x.size() != m.x0.size()) throw Error(ErrorCode::kDimensionMismatch, "model input size");
  const VectorXd d = x - m.x0;
  EvalResult r;
  r.denominator = 1.0 + m.b1.dot(d);
  r.value = (m.a0 + m.a1.dot(d)) / r.denominator;
  r.in_domain = r.denominator >= m.epsilon;
  return r;
}

EvalResult evaluate(const ApproximationModel& m, const VectorXd& x) {
  EvalResult r;
  r.denominator = m.denominator(x);
  r.value = m.numerator(x) / r.denominator;
  r.in_domain = m.kind == ModelKind::kLinear || r.denominator >= m.epsilon;
  return r;
}

double evaluate(const TaylorModel& m, const VectorXd& x) {
  if (x.size() != m.x0.size()) throw Error(ErrorCode::kDimensionMismatch, "model input size");
  const VectorXd d = x - m.x0;
  double v = m.f0 + m.grad.dot(d);
  if (m.order == 2) v += 0.5 * d.dot(m.hessian * d);
  return v;
}

namespace {

LinearConstraint rational_constraint(double a0, const VectorXd& a1, const VectorXd& b1,
                                     const VectorXd& x0, double bound, Sense sense) {
  if (sense == Sense::kEq) {
    throw Error(ErrorCode::kValidation, "rational bounds must be inequalities");
  }
  LinearConstraint c;
  c.sense = sense;
  c.coeffs = b1.size() == 0 ? a1 : VectorXd(a1 - bound * b1);
  c.rhs = bound - a0 + c.coeffs.dot(x0);
  return c;
}

}  // namespace

LinearConstraint to_linear_constraint(const PadeModel& m, double bound, Sense sense) {
  return rational_constraint(m.a0, m.a1, m.b1, m.x0, bound, sense);
}

LinearConstraint to_linear_constraint(const ApproximationModel& m, double bound, Sense sense) {
  return rational_constraint(m.a0, m.a1, m.b1, m.x0, bound, sense);
}

ApproximationModel to_approximation(const PadeModel& m, const QuantityOfInterest& q) {
  ApproximationModel out;
  out.kind = ModelKind::kPade;
  out.a0 = m.a0;
  out.a1 = m.a1;
  out.b1 = m.b1;
  out.x0 = m.x0;
  out.epsilon = m.epsilon;
  out.quantity = q;
  return out;
}

VectorXd pade_weights(const PadeModel& m, const MatrixXd& xs) {
  VectorXd w(xs.rows());
  for (Index k = 0; k < xs.rows(); ++k) {
    const double den = evaluate(m, xs.row(k).transpose()).denominator;
    w[k] = den > m.epsilon ? 1.0 / den : 1.0;
  }
  return w;
}

LocalExpansion expand_voltage(const PowerSystem& sys, const InjectionVector& x0, int bus_id) {
  const auto sol = solve_newton(sys, x0, sys.flat_start());
  if (!sol.converged) {
    throw Error(ErrorCode::kNumericalFailure, "power flow did not converge at the expansion point");
  }
  const auto bundle = build_bundle(sys, sol.state);
  const auto so = second_order(bundle, sys, bus_id);
  const double f0 = sol.v[sys.bus_position(bus_id)];
  const VectorXd grad = bundle.first_order.row(so.coord).transpose();
  const VectorXd center = x0.stacked();
  LocalExpansion out;
  out.first = taylor1(f0, grad, center);
  out.second = taylor2(f0, grad, so.lambda, center);
  out.pade = pade11(f0, grad, so.lambda, center);
  return out;
}

}  // namespace apf
