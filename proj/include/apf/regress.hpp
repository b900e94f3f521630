#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "apf/lp.hpp"
#include "apf/sample_set.hpp"

namespace apf {

enum class ModelKind { kLinear, kRational, kPade };
enum class Direction { kNone, kOver, kUnder };

std::string_view to_string(ModelKind k);
std::string_view to_string(Direction d);
ModelKind parse_model_kind(std::string_view s);
Direction parse_direction(std::string_view s);

struct FitReport {
  double mean_abs_err = 0.0;  // true residuals on the training set
  double max_abs_err = 0.0;
  int iterations = 0;
  std::vector<double> w_delta_history;
  bool converged = true;
  bool degenerate = false;  // sample matrix rank below dimension
  int rank = 0;
};

// (a0 + a1^T (x - x0)) / (1 + b1^T (x - x0)); b1 = 0 for linear models.
struct ApproximationModel {
  ModelKind kind = ModelKind::kLinear;
  double a0 = 0.0;
  Eigen::VectorXd a1;
  Eigen::VectorXd b1;
  Eigen::VectorXd x0;
  Direction direction = Direction::kNone;
  QuantityOfInterest quantity;
  OperatingRange range;
  double epsilon = 0.1;
  FitReport report;

  double numerator(const Eigen::VectorXd& x) const;
  double denominator(const Eigen::VectorXd& x) const;
  double predict(const Eigen::VectorXd& x) const { return numerator(x) / denominator(x); }

  // Short label: la, cla, ra, cra or pade.
  std::string label() const;
};

// Mean / max absolute prediction error over rows of xs.
struct ErrorStats {
  double mean = 0.0;
  double max = 0.0;
};
ErrorStats prediction_errors(const ApproximationModel& model, const Eigen::MatrixXd& xs,
                             const Eigen::VectorXd& beta);

// L1 fit of an affine model. direction None gives LA, Over/Under give CLA.
ApproximationModel fit_linear(const Eigen::MatrixXd& xs, const Eigen::VectorXd& beta,
                              Direction direction);

ApproximationModel fit_la(const SampleSet& samples, const QuantityOfInterest& q);
ApproximationModel fit_cla(const SampleSet& samples, const QuantityOfInterest& q,
                           Direction direction);

struct RationalFitOptions {
  Direction direction = Direction::kNone;
  double epsilon = 0.1;
  std::optional<Eigen::VectorXd> w0;  // per-sample initial weights, default all ones
  double tol = 1e-6;
  int max_iter = 15;
};

// Iteratively reweighted L1 fit of the rational template. The returned
// model is the best iterate by true training error; the affine fit
// (b1 = 0) is always among the candidates.
ApproximationModel fit_rational(const Eigen::MatrixXd& xs, const Eigen::VectorXd& beta,
                                const RationalFitOptions& opts);
ApproximationModel fit_rational(const SampleSet& samples, const QuantityOfInterest& q,
                                const RationalFitOptions& opts);

}  // namespace apf
