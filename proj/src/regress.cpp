#include "apf/regress.hpp"

#include <algorithm>
#include <cmath>

#include "apf/error.hpp"

namespace apf {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::kLinear: return "linear";
    case ModelKind::kRational: return "rational";
    case ModelKind::kPade: return "pade";
  }
  return "?";
}

std::string_view to_string(Direction d) {
  switch (d) {
    case Direction::kNone: return "none";
    case Direction::kOver: return "over";
    case Direction::kUnder: return "under";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "linear") return ModelKind::kLinear;
  if (s == "rational") return ModelKind::kRational;
  if (s == "pade") return ModelKind::kPade;
  throw Error(ErrorCode::kValidation, "unknown model kind '" + std::string(s) + "'");
}

Direction parse_direction(std::string_view s) {
  if (s == "none") return Direction::kNone;
  if (s == "over") return Direction::kOver;
  if (s == "under") return Direction::kUnder;
  throw Error(ErrorCode::kValidation, "unknown direction '" + std::string(s) + "'");
}

double ApproximationModel::numerator(const VectorXd& x) const {
  if (x.size() != x0.size()) throw Error(ErrorCode::kDimensionMismatch, "model input size");
  return a0 + a1.dot(x - x0);
}

double ApproximationModel::denominator(const VectorXd& x) const {
  if (x.size() != x0.size()) throw Error(ErrorCode::kDimensionMismatch, "model input size");
  if (b1.size() == 0) return 1.0;
  return 1.0 + b1.dot(x - x0);
}

std::string ApproximationModel::label() const {
  if (kind == ModelKind::kPade) return "pade";
  const bool conservative = direction != Direction::kNone;
  if (kind == ModelKind::kLinear) return conservative ? "cla" : "la";
  return conservative ? "cra" : "ra";
}

ErrorStats prediction_errors(const ApproximationModel& model, const MatrixXd& xs,
                             const VectorXd& beta) {
  ErrorStats st;
  if (xs.rows() == 0) return st;
  for (Index m = 0; m < xs.rows(); ++m) {
    const double e = std::abs(beta[m] - model.predict(xs.row(m).transpose()));
    st.mean += e;
    st.max = std::max(st.max, e);
  }
  st.mean /= static_cast<double>(xs.rows());
  return st;
}

namespace {

// Centered, whitened coordinates z = map (x - x0) with unit RMS per retained
// principal direction. Fitting in z keeps the LP well scaled, and mapping
// coefficients back through map^T yields the minimum-norm representative
// when the samples do not span the full space.
struct Whitening {
  VectorXd x0;
  MatrixXd map;  // r x n
  MatrixXd z;    // M x r
  int rank = 0;
};

Whitening whiten(const MatrixXd& xs) {
  Whitening w;
  const Index m = xs.rows();
  const Index n = xs.cols();
  w.x0 = xs.colwise().mean().transpose();
  const MatrixXd xc = xs.rowwise() - w.x0.transpose();
  w.map = MatrixXd::Zero(0, n);
  w.z = MatrixXd::Zero(m, 0);
  if (n == 0) return w;
  Eigen::BDCSVD<MatrixXd> svd(xc, Eigen::ComputeThinV);
  const VectorXd& sig = svd.singularValues();
  if (sig.size() == 0 || !(sig[0] > 0.0)) return w;
  Index r = 0;
  while (r < sig.size() && sig[r] > 1e-9 * sig[0]) ++r;
  const VectorXd scale = sig.head(r) / std::sqrt(static_cast<double>(m));
  w.map = scale.cwiseInverse().asDiagonal() * svd.matrixV().leftCols(r).transpose();
  w.z = xc * w.map.transpose();
  w.rank = static_cast<int>(r);
  return w;
}

void check_inputs(const MatrixXd& xs, const VectorXd& beta) {
  if (xs.rows() == 0) throw Error(ErrorCode::kValidation, "no training samples");
  if (beta.size() != xs.rows()) {
    throw Error(ErrorCode::kDimensionMismatch, "sample and target counts differ");
  }
  if (!xs.allFinite() || !beta.allFinite()) {
    throw Error(ErrorCode::kValidation, "non-finite training data");
  }
}

// One weighted L1 problem. With `rational` false the denominator is fixed at 1.
struct FitLp {
  double a0 = 0.0;
  VectorXd alpha;
  VectorXd gamma;
};

FitLp solve_fit_lp(const Whitening& wh, const VectorXd& beta, const VectorXd& weights,
                   Direction direction, bool rational, double epsilon) {
  const Index m = wh.z.rows();
  const Index r = wh.rank;
  const double inv_m = 1.0 / static_cast<double>(m);
  LinearProgram lp;
  const Index i_a0 = lp.add_variable(0.0);
  const Index i_alpha = lp.num_vars();
  for (Index j = 0; j < r; ++j) lp.add_variable(0.0);
  const Index i_gamma = lp.num_vars();
  if (rational) {
    for (Index j = 0; j < r; ++j) lp.add_variable(0.0);
  }
  lp.rows.reserve(static_cast<size_t>(rational ? 2 * m : m));

  const double sign = direction == Direction::kUnder ? -1.0 : 1.0;
  for (Index k = 0; k < m; ++k) {
    std::vector<std::pair<Index, double>> terms;
    terms.reserve(static_cast<size_t>(2 * r + 3));
    terms.emplace_back(i_a0, 1.0);
    for (Index j = 0; j < r; ++j) terms.emplace_back(i_alpha + j, wh.z(k, j));
    if (rational) {
      for (Index j = 0; j < r; ++j) terms.emplace_back(i_gamma + j, -beta[k] * wh.z(k, j));
    }
    const double wk = weights[k] * inv_m;
    if (direction == Direction::kNone) {
      const Index ep = lp.add_variable(wk, 0.0);
      const Index en = lp.add_variable(wk, 0.0);
      terms.emplace_back(ep, 1.0);
      terms.emplace_back(en, -1.0);
      lp.add_row(std::move(terms), Sense::kEq, beta[k]);
    } else {
      // Residual is sign * (numerator - beta * denominator) >= 0; its
      // weighted sum is the objective, up to a constant.
      for (const auto& [idx, a] : terms) lp.objective[idx] += sign * wk * a;
      lp.add_row(std::move(terms), direction == Direction::kOver ? Sense::kGe : Sense::kLe, beta[k]);
    }
  }
  if (rational) {
    for (Index k = 0; k < m; ++k) {
      std::vector<std::pair<Index, double>> terms;
      for (Index j = 0; j < r; ++j) terms.emplace_back(i_gamma + j, wh.z(k, j));
      lp.add_row(std::move(terms), Sense::kGe, epsilon - 1.0);
    }
  }

  const LpResult res = solve_lp(lp);
  if (res.status == LpStatus::kInfeasible) {
    throw Error(direction == Direction::kNone ? ErrorCode::kNumericalFailure
                                              : ErrorCode::kInfeasibleConservative,
                "regression LP is infeasible");
  }
  if (res.status == LpStatus::kUnbounded) {
    throw Error(ErrorCode::kNumericalFailure, "regression LP is unbounded");
  }
  FitLp out;
  out.a0 = res.x[i_a0];
  out.alpha = res.x.segment(i_alpha, r);
  out.gamma = rational ? VectorXd(res.x.segment(i_gamma, r)) : VectorXd::Zero(r);
  return out;
}

ApproximationModel to_model(const Whitening& wh, const FitLp& sol, ModelKind kind,
                            Direction direction) {
  ApproximationModel model;
  model.kind = kind;
  model.direction = direction;
  model.x0 = wh.x0;
  model.a0 = sol.a0;
  model.a1 = wh.map.transpose() * sol.alpha;
  model.b1 = wh.map.transpose() * sol.gamma;
  model.report.rank = wh.rank;
  model.report.degenerate = wh.rank < wh.x0.size();
  return model;
}

void attach_errors(ApproximationModel& model, const MatrixXd& xs, const VectorXd& beta) {
  const ErrorStats st = prediction_errors(model, xs, beta);
  model.report.mean_abs_err = st.mean;
  model.report.max_abs_err = st.max;
}

}  // namespace

ApproximationModel fit_linear(const MatrixXd& xs, const VectorXd& beta, Direction direction) {
  check_inputs(xs, beta);
  const Whitening wh = whiten(xs);
  const VectorXd ones = VectorXd::Ones(xs.rows());
  ApproximationModel model =
      to_model(wh, solve_fit_lp(wh, beta, ones, direction, false, 0.0), ModelKind::kLinear, direction);
  model.b1 = VectorXd::Zero(xs.cols());
  model.epsilon = 0.0;
  model.report.iterations = 1;
  attach_errors(model, xs, beta);
  return model;
}

ApproximationModel fit_la(const SampleSet& samples, const QuantityOfInterest& q) {
  ApproximationModel model = fit_linear(samples.xs, samples.beta(q), Direction::kNone);
  model.quantity = q;
  return model;
}

ApproximationModel fit_cla(const SampleSet& samples, const QuantityOfInterest& q,
                           Direction direction) {
  if (direction == Direction::kNone) {
    throw Error(ErrorCode::kValidation, "conservative fits need a direction");
  }
  ApproximationModel model = fit_linear(samples.xs, samples.beta(q), direction);
  model.quantity = q;
  return model;
}

ApproximationModel fit_rational(const MatrixXd& xs, const VectorXd& beta,
                                const RationalFitOptions& opts) {
  check_inputs(xs, beta);
  if (!(opts.epsilon > 0.0 && opts.epsilon < 1.0)) {
    throw Error(ErrorCode::kValidation, "epsilon must lie in (0, 1)");
  }
  if (opts.max_iter < 1 || !(opts.tol >= 0.0)) {
    throw Error(ErrorCode::kValidation, "max_iter must be positive and tol non-negative");
  }
  const Index m = xs.rows();
  VectorXd w = VectorXd::Ones(m);
  if (opts.w0) {
    if (opts.w0->size() != m) throw Error(ErrorCode::kDimensionMismatch, "w0 length");
    if (!(opts.w0->minCoeff() > 0.0)) throw Error(ErrorCode::kValidation, "w0 must be positive");
    w = *opts.w0;
  }
  const Whitening wh = whiten(xs);

  // The affine fit is a feasible point of every reweighted problem.
  ApproximationModel best = to_model(wh, solve_fit_lp(wh, beta, VectorXd::Ones(m), opts.direction,
                                                      false, opts.epsilon),
                                     ModelKind::kRational, opts.direction);
  attach_errors(best, xs, beta);

  FitReport report;
  report.converged = false;
  for (int it = 1; it <= opts.max_iter; ++it) {
    ApproximationModel cand =
        to_model(wh, solve_fit_lp(wh, beta, w, opts.direction, true, opts.epsilon),
                 ModelKind::kRational, opts.direction);
    attach_errors(cand, xs, beta);
    if (cand.report.mean_abs_err < best.report.mean_abs_err) best = cand;

    VectorXd w_next(m);
    for (Index k = 0; k < m; ++k) w_next[k] = 1.0 / cand.denominator(xs.row(k).transpose());
    const double delta = (w_next - w).lpNorm<1>();
    report.w_delta_history.push_back(delta);
    report.iterations = it;
    w = w_next;
    if (delta <= opts.tol) {
      report.converged = true;
      break;
    }
  }
  report.mean_abs_err = best.report.mean_abs_err;
  report.max_abs_err = best.report.max_abs_err;
  report.rank = wh.rank;
  report.degenerate = wh.rank < xs.cols();
  best.report = report;
  best.epsilon = opts.epsilon;
  return best;
}

ApproximationModel fit_rational(const SampleSet& samples, const QuantityOfInterest& q,
                                const RationalFitOptions& opts) {
  ApproximationModel model = fit_rational(samples.xs, samples.beta(q), opts);
  model.quantity = q;
  return model;
}

}  // namespace apf
