#pragma once

#include <limits>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace apf {

enum class Sense { kLe, kEq, kGe };

// min c^T x  s.t.  rows, lower <= x <= upper. Variables are free unless
// bounded explicitly.
struct LinearProgram {
  struct Row {
    std::vector<std::pair<Eigen::Index, double>> terms;
    Sense sense = Sense::kLe;
    double rhs = 0.0;
  };

  static constexpr double kInf = std::numeric_limits<double>::infinity();

  Eigen::VectorXd objective;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;
  std::vector<Row> rows;

  Eigen::Index num_vars() const { return objective.size(); }
  Eigen::Index add_variable(double cost, double lo = -kInf, double hi = kInf);
  void add_row(std::vector<std::pair<Eigen::Index, double>> terms, Sense sense, double rhs);
  void add_dense_row(const Eigen::VectorXd& coeffs, Sense sense, double rhs,
                     Eigen::Index offset = 0);
};

enum class LpStatus { kOptimal, kInfeasible, kUnbounded };

const char* to_string(LpStatus s);

struct LpResult {
  LpStatus status = LpStatus::kInfeasible;
  Eigen::VectorXd x;  // original variables; valid when optimal
  double value = 0.0;
  int iterations = 0;
};

struct LpOptions {
  double feasibility_tol = 1e-9;
  double optimality_tol = 1e-9;
  int max_iterations = 0;  // 0: derived from problem size
};

// Two-phase revised simplex. Dantzig pricing, falling back to Bland's rule
// while the objective stalls on degenerate pivots. Raises
// ErrorCode::kNumericalFailure when the iteration guard trips.
LpResult solve_lp(const LinearProgram& lp, const LpOptions& opts = {});

// Largest violation of rows and bounds at x.
double max_violation(const LinearProgram& lp, const Eigen::VectorXd& x);

}  // namespace apf
