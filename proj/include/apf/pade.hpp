#pragma once

#include <Eigen/Dense>

#include "apf/lp.hpp"
#include "apf/pfcore.hpp"
#include "apf/regress.hpp"

namespace apf {

// (a0 + a1^T (x - x0)) / (1 + b1^T (x - x0)) matching value and gradient at x0.
struct PadeModel {
  Eigen::VectorXd x0;
  double a0 = 0.0;
  Eigen::VectorXd a1;
  Eigen::VectorXd b1;
  double epsilon = 0.1;
  bool vanishing_gradient = false;  // b1 forced to zero
};

struct TaylorModel {
  int order = 1;
  Eigen::VectorXd x0;
  double f0 = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd hessian;  // order 2 only
};

// b1 minimizes ||b1 g^T + g b1^T + L||_F; then a0 = f0, a1 = g + f0 b1.
// x0 defaults to the origin when left empty.
PadeModel pade11(double f0, const Eigen::VectorXd& grad, const Eigen::MatrixXd& lambda,
                 const Eigen::VectorXd& x0 = {});

TaylorModel taylor1(double f0, const Eigen::VectorXd& grad, const Eigen::VectorXd& x0 = {});
TaylorModel taylor2(double f0, const Eigen::VectorXd& grad, const Eigen::MatrixXd& hessian,
                    const Eigen::VectorXd& x0 = {});

struct EvalResult {
  double value = 0.0;
  double denominator = 1.0;
  bool in_domain = true;  // denominator >= epsilon
};

EvalResult evaluate(const PadeModel& m, const Eigen::VectorXd& x);
EvalResult evaluate(const ApproximationModel& m, const Eigen::VectorXd& x);
double evaluate(const TaylorModel& m, const Eigen::VectorXd& x);

struct LinearConstraint {
  Eigen::VectorXd coeffs;
  Sense sense = Sense::kLe;
  double rhs = 0.0;

  double residual(const Eigen::VectorXd& x) const { return coeffs.dot(x) - rhs; }
};

// Rewrites model(x) <= bound (kLe) or >= bound (kGe) as a linear inequality
// in x, valid wherever the denominator is positive.
LinearConstraint to_linear_constraint(const PadeModel& m, double bound, Sense sense);
LinearConstraint to_linear_constraint(const ApproximationModel& m, double bound, Sense sense);

ApproximationModel to_approximation(const PadeModel& m, const QuantityOfInterest& q);

// Initial reweighting weights 1 / (1 + b1^T (x - x0)); 1 where the
// denominator is not above the floor.
Eigen::VectorXd pade_weights(const PadeModel& m, const Eigen::MatrixXd& xs);

// Value, gradient and Hessian of a PQ-bus voltage with respect to the
// reduced injections, expanded at x0.
struct LocalExpansion {
  TaylorModel first;
  TaylorModel second;
  PadeModel pade;
};

LocalExpansion expand_voltage(const PowerSystem& sys, const InjectionVector& x0, int bus_id);

}  // namespace apf
