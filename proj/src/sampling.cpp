#include "apf/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "apf/error.hpp"
#include "apf/sensitivity.hpp"

namespace apf {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

OperatingRange OperatingRange::scalar(Index n, double lower, double upper) {
  return OperatingRange{VectorXd::Constant(n, lower), VectorXd::Constant(n, upper)};
}

void OperatingRange::validate(Index n) const {
  if (lower.size() != n || upper.size() != n) {
    throw Error(ErrorCode::kValidation, "operating range has " + std::to_string(lower.size()) +
                                            " factors, expected " + std::to_string(n));
  }
  for (Index i = 0; i < n; ++i) {
    if (!std::isfinite(lower[i]) || !std::isfinite(upper[i]) || lower[i] > upper[i]) {
      throw Error(ErrorCode::kValidation, "operating range needs finite lower <= upper");
    }
  }
}

void OperatingRange::box(const VectorXd& nominal, VectorXd& lo, VectorXd& hi) const {
  validate(nominal.size());
  const VectorXd a = lower.cwiseProduct(nominal);
  const VectorXd b = upper.cwiseProduct(nominal);
  lo = a.cwiseMin(b);
  hi = a.cwiseMax(b);
}

Index SampleSet::column_of(const QuantityOfInterest& q) const {
  for (size_t i = 0; i < quantities.size(); ++i) {
    if (quantities[i] == q) return static_cast<Index>(i);
  }
  throw Error(ErrorCode::kUnknownQuantity, "sample set has no column " + q.label());
}

void SampleSet::append_rows(const SampleSet& other, const std::vector<Index>& rows) {
  if (other.quantities != quantities || other.xs.cols() != xs.cols()) {
    throw Error(ErrorCode::kDimensionMismatch, "sample sets are not compatible");
  }
  const Index old = xs.rows();
  const auto add = static_cast<Index>(rows.size());
  xs.conservativeResize(old + add, Eigen::NoChange);
  betas.conservativeResize(old + add, Eigen::NoChange);
  for (Index i = 0; i < add; ++i) {
    xs.row(old + i) = other.xs.row(rows[static_cast<size_t>(i)]);
    betas.row(old + i) = other.betas.row(rows[static_cast<size_t>(i)]);
  }
}

std::string_view to_string(Placement p) {
  switch (p) {
    case Placement::kExtreme: return "extreme";
    case Placement::kCentral: return "central";
    case Placement::kMixed: return "mixed";
  }
  return "?";
}

Placement parse_placement(std::string_view s) {
  if (s == "extreme") return Placement::kExtreme;
  if (s == "central") return Placement::kCentral;
  if (s == "mixed") return Placement::kMixed;
  throw Error(ErrorCode::kValidation, "unknown placement '" + std::string(s) + "'");
}

Placement placement_for(Direction d) {
  switch (d) {
    case Direction::kUnder: return Placement::kExtreme;
    case Direction::kOver: return Placement::kCentral;
    case Direction::kNone: return Placement::kMixed;
  }
  return Placement::kMixed;
}

void ImportanceConfig::validate() const {
  if (!(subspace_fraction >= 0.0 && subspace_fraction <= 1.0)) {
    throw Error(ErrorCode::kValidation, "subspace_fraction must lie in [0, 1]");
  }
  if (k < 1) throw Error(ErrorCode::kValidation, "k must be at least 1");
  if (!(step_scale > 0.0) || !std::isfinite(step_scale)) {
    throw Error(ErrorCode::kValidation, "step_scale must be positive");
  }
}

MatrixXd draw_uniform(const VectorXd& nominal, const OperatingRange& range, Index count,
                      std::uint64_t seed) {
  if (count < 1) throw Error(ErrorCode::kValidation, "sample count must be positive");
  VectorXd lo, hi;
  range.box(nominal, lo, hi);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  MatrixXd xs(count, nominal.size());
  for (Index m = 0; m < count; ++m) {
    for (Index i = 0; i < nominal.size(); ++i) xs(m, i) = lo[i] + (hi[i] - lo[i]) * u01(rng);
  }
  return xs;
}

SubspaceDraw draw_subspace(const VectorXd& nominal, const MatrixXd& vectors,
                           const OperatingRange& range, Index count, Placement placement,
                           std::uint64_t seed, double step_scale) {
  if (vectors.cols() == 0) throw Error(ErrorCode::kEmptyBasis, "no subspace vectors");
  if (vectors.rows() != nominal.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "subspace vectors do not match injection size");
  }
  if (count < 1) throw Error(ErrorCode::kValidation, "sample count must be positive");
  VectorXd lo, hi;
  range.box(nominal, lo, hi);
  const VectorXd half = 0.5 * (hi - lo);
  const Index k = vectors.cols();
  const VectorXd support = step_scale * (vectors.cwiseAbs().transpose() * half);

  SubspaceDraw out;
  out.anchor = 0.5 * (lo + hi);
  out.xs.resize(count, nominal.size());
  out.coefficients.resize(count, k);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  for (Index m = 0; m < count; ++m) {
    for (Index j = 0; j < k; ++j) {
      const double u = u01(rng);
      double mag = u;
      if (placement == Placement::kExtreme) mag = std::cbrt(u);
      else if (placement == Placement::kCentral) mag = u * u * u;
      const double sign = u01(rng) < 0.5 ? -1.0 : 1.0;
      out.coefficients(m, j) = sign * support[j] * mag;
    }
    const VectorXd raw = out.anchor + vectors * out.coefficients.row(m).transpose();
    const VectorXd x = raw.cwiseMax(lo).cwiseMin(hi);
    if ((x - raw).cwiseAbs().maxCoeff() > 0.0) ++out.clipped;
    out.xs.row(m) = x.transpose();
  }
  return out;
}

MatrixXd draw_importance(const VectorXd& nominal, const MatrixXd& vectors,
                         const OperatingRange& range, Index count, const ImportanceConfig& cfg,
                         std::uint64_t seed) {
  cfg.validate();
  if (count < 1) throw Error(ErrorCode::kValidation, "sample count must be positive");
  const double frac = cfg.placement == Placement::kMixed ? 0.5 : cfg.subspace_fraction;
  const auto n_sub = static_cast<Index>(std::llround(frac * static_cast<double>(count)));
  // Independent streams for the two parts keep each reproducible on its own.
  std::seed_seq seq{seed, static_cast<std::uint64_t>(0x5eed)};
  std::uint64_t seeds[2];
  std::mt19937_64 splitter(seq);
  seeds[0] = splitter();
  seeds[1] = splitter();
  MatrixXd xs(count, nominal.size());
  if (n_sub > 0) {
    const MatrixXd basis = vectors.leftCols(std::min<Index>(cfg.k, vectors.cols()));
    xs.topRows(n_sub) =
        draw_subspace(nominal, basis, range, n_sub, cfg.placement, seeds[0], cfg.step_scale).xs;
  }
  if (count - n_sub > 0) {
    xs.bottomRows(count - n_sub) = draw_uniform(nominal, range, count - n_sub, seeds[1]);
  }
  return xs;
}

MatrixXd dominant_directions(const PowerSystem& sys, int bus_id, int k) {
  const auto sol = solve_newton(sys, sys.nominal_injection(), sys.flat_start());
  if (!sol.converged) {
    throw Error(ErrorCode::kNumericalFailure, "nominal power flow did not converge");
  }
  const auto bundle = build_bundle(sys, sol.state);
  return top_singular_vectors(second_order(bundle, sys, bus_id).lambda, k);
}

SampleSet evaluate_samples(const PowerSystem& sys, const MatrixXd& xs,
                           const std::vector<QuantityOfInterest>& quantities, std::uint64_t seed,
                           const NewtonOptions& newton) {
  if (quantities.empty()) throw Error(ErrorCode::kValidation, "no quantities requested");
  for (const auto& q : quantities) validate_quantity(sys, q);
  const auto& lay = sys.layout();
  if (xs.cols() != lay.dim()) throw Error(ErrorCode::kDimensionMismatch, "sample width");

  StateVector warm = sys.flat_start();
  const auto nominal = solve_newton(sys, sys.nominal_injection(), warm, newton);
  if (nominal.converged) warm = nominal.state;

  SampleSet out;
  out.quantities = quantities;
  out.seed = seed;
  out.xs.resize(xs.rows(), xs.cols());
  out.betas.resize(xs.rows(), static_cast<Index>(quantities.size()));
  Index kept = 0;
  for (Index m = 0; m < xs.rows(); ++m) {
    PowerFlowSolution sol;
    try {
      sol = solve_newton(sys, InjectionVector::from_stacked(lay, xs.row(m).transpose()), warm,
                         newton);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSingularJacobian) throw;
      ++out.skipped;
      continue;
    }
    if (!sol.converged) {
      ++out.skipped;
      continue;
    }
    out.xs.row(kept) = xs.row(m);
    for (size_t q = 0; q < quantities.size(); ++q) {
      out.betas(kept, static_cast<Index>(q)) = extract_quantity(sys, sol, quantities[q]);
    }
    ++kept;
  }
  if (kept == 0) throw Error(ErrorCode::kAllSamplesFailed, "no sample converged");
  out.xs.conservativeResize(kept, Eigen::NoChange);
  out.betas.conservativeResize(kept, Eigen::NoChange);
  return out;
}

std::vector<Index> violating_rows(const ApproximationModel& model, const MatrixXd& xs,
                                  const VectorXd& beta) {
  if (model.direction == Direction::kNone) {
    throw Error(ErrorCode::kValidation, "violation rate needs an Over or Under model");
  }
  constexpr double kTol = 1e-9;
  std::vector<Index> rows;
  for (Index m = 0; m < xs.rows(); ++m) {
    const VectorXd x = xs.row(m).transpose();
    const double den = model.denominator(x);
    bool bad = !(den > 0.0);
    if (!bad) {
      const double pred = model.numerator(x) / den;
      bad = model.direction == Direction::kOver ? beta[m] > pred + kTol : beta[m] < pred - kTol;
    }
    if (bad) rows.push_back(m);
  }
  return rows;
}

double violation_rate(const ApproximationModel& model, const SampleSet& fresh) {
  if (fresh.size() == 0) return 0.0;
  const auto rows = violating_rows(model, fresh.xs, fresh.beta(model.quantity));
  return static_cast<double>(rows.size()) / static_cast<double>(fresh.size());
}

RefinementResult iterative_refinement(const FitFunction& fit, const SamplerFunction& sampler,
                                      SampleSet initial, int rounds, Index batch) {
  if (rounds < 1) throw Error(ErrorCode::kValidation, "rounds must be at least 1");
  if (batch < 1) throw Error(ErrorCode::kValidation, "batch must be at least 1");
  RefinementResult out;
  out.training = std::move(initial);
  out.model = fit(out.training);
  for (int r = 1; r <= rounds; ++r) {
    const SampleSet fresh = sampler(r, batch);
    const auto rows = violating_rows(out.model, fresh.xs, fresh.beta(out.model.quantity));
    out.rate_history.push_back(fresh.size() == 0 ? 0.0
                                                 : static_cast<double>(rows.size()) /
                                                       static_cast<double>(fresh.size()));
    if (rows.empty()) continue;
    out.training.append_rows(fresh, rows);
    out.model = fit(out.training);
  }
  return out;
}

}  // namespace apf
