#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include <Eigen/Dense>

#include "apf/netmodel.hpp"
#include "apf/pfcore.hpp"

namespace testing {

inline std::string data_path(const std::string& name) { return std::string(APF_DATA_DIR) + "/" + name; }

inline apf::PowerSystem load_system(const std::string& name) {
  return apf::PowerSystem(apf::load_matpower(data_path(name)));
}

// Largest entrywise difference relative to the largest reference entry.
inline double rel_err(const Eigen::MatrixXd& got, const Eigen::MatrixXd& ref) {
  const double scale = std::max(ref.cwiseAbs().maxCoeff(), 1e-12);
  return (got - ref).cwiseAbs().maxCoeff() / scale;
}

// Bus injections from the polar power-flow equations, written out term by
// term and independent of the library's complex-matrix path.
inline void polar_injections(const apf::PowerSystem& sys, const Eigen::VectorXd& vm,
                             const Eigen::VectorXd& va, Eigen::VectorXd& p, Eigen::VectorXd& q) {
  const Eigen::MatrixXd g = sys.ybus().g();
  const Eigen::MatrixXd b = sys.ybus().b();
  const Eigen::Index n = vm.size();
  p = Eigen::VectorXd::Zero(n);
  q = Eigen::VectorXd::Zero(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index k = 0; k < n; ++k) {
      const double d = va[i] - va[k];
      p[i] += vm[i] * vm[k] * (g(i, k) * std::cos(d) + b(i, k) * std::sin(d));
      q[i] += vm[i] * vm[k] * (g(i, k) * std::sin(d) - b(i, k) * std::cos(d));
    }
  }
}

// Max mismatch between specified reduced injections and the polar equations.
inline double polar_residual(const apf::PowerSystem& sys, const apf::InjectionVector& x,
                             const apf::PowerFlowSolution& sol) {
  Eigen::VectorXd p, q;
  polar_injections(sys, sol.v, sol.theta, p, q);
  const auto& lay = sys.layout();
  double worst = 0.0;
  for (size_t i = 0; i < lay.pvpq.size(); ++i) worst = std::max(worst, std::abs(p[lay.pvpq[i]] - x.p[static_cast<Eigen::Index>(i)]));
  for (size_t i = 0; i < lay.pq.size(); ++i) worst = std::max(worst, std::abs(q[lay.pq[i]] - x.q[static_cast<Eigen::Index>(i)]));
  return worst;
}

// Random reduced injections inside a +-spread multiplicative box around nominal.
inline Eigen::VectorXd perturbed_injection(const apf::PowerSystem& sys, std::mt19937_64& rng, double spread) {
  std::uniform_real_distribution<double> u(1.0 - spread, 1.0 + spread);
  Eigen::VectorXd x = sys.nominal_injection().stacked();
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] *= u(rng);
  return x;
}

inline apf::PowerFlowSolution solve_at_injection(const apf::PowerSystem& sys, const Eigen::VectorXd& x,
                                                 double tol = 1e-12) {
  apf::NewtonOptions opts;
  opts.tol = tol;
  opts.max_iter = 30;
  return apf::solve_newton(sys, apf::InjectionVector::from_stacked(sys.layout(), x), sys.flat_start(), opts);
}

// Closed-form load-bus voltage of the lossless two-bus line (x = 0.1) with P = 0.
inline double two_bus_voltage(double q2) { return (1.0 + std::sqrt(1.0 + 0.4 * q2)) / 2.0; }

}  // namespace testing
