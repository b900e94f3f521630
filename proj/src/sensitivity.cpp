#include "apf/sensitivity.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "apf/error.hpp"
#include "apf/sampling.hpp"

namespace apf {

using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using cplx = std::complex<double>;

Eigen::MatrixXd jacobian_state_derivative(const PowerSystem& sys, const StateVector& state,
                                          Index coord) {
  const auto& lay = sys.layout();
  if (coord < 0 || coord >= lay.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "state coordinate out of range");
  }
  VectorXd vm, va;
  expand_state(sys, state, vm, va);
  const MatrixXcd& y = sys.ybus().y;
  const Index n = vm.size();
  VectorXcd v(n), e(n);
  for (Index i = 0; i < n; ++i) {
    e[i] = std::polar(1.0, va[i]);
    v[i] = vm[i] * e[i];
  }
  const VectorXcd cur = y * v;
  const cplx j(0.0, 1.0);
  const int b = lay.bus_of(coord);

  // Selector vectors: zero except entry b, which holds V_b or e^{j theta_b}.
  VectorXcd v_sel = VectorXcd::Zero(n);
  VectorXcd e_sel = VectorXcd::Zero(n);
  v_sel[b] = v[b];
  e_sel[b] = e[b];

  ComplexJacobianBlocks d;
  if (lay.is_theta(coord)) {
    // d/dtheta_b of j diag(V) conj(diag(I) - Y diag(V)).
    MatrixXcd inner = -(y * v.asDiagonal());
    inner.diagonal() += cur;
    MatrixXcd sel_inner = -(y * v_sel.asDiagonal());
    sel_inner.diagonal() += y * v_sel;
    d.ds_dtheta = -(v_sel.asDiagonal() * inner.conjugate()) +
                  v.asDiagonal() * sel_inner.conjugate();

    // d/dtheta_b of diag(e) conj(diag(I)) + diag(V) conj(Y diag(e)).
    MatrixXcd t = v_sel.asDiagonal() * (y * e.asDiagonal()).conjugate() -
                  v.asDiagonal() * (y * e_sel.asDiagonal()).conjugate();
    t.diagonal() += e_sel.cwiseProduct(cur.conjugate()) -
                    e.cwiseProduct((y * v_sel).conjugate());
    d.ds_dv = j * t;
  } else {
    // d/dV_b: dV = e_sel, dI = Y e_sel.
    MatrixXcd inner = -(y * v.asDiagonal());
    inner.diagonal() += cur;
    MatrixXcd sel_inner = -(y * e_sel.asDiagonal());
    sel_inner.diagonal() += y * e_sel;
    d.ds_dtheta = j * (e_sel.asDiagonal() * inner.conjugate() +
                       v.asDiagonal() * sel_inner.conjugate());

    d.ds_dv = e_sel.asDiagonal() * (y * e.asDiagonal()).conjugate();
    d.ds_dv.diagonal() += e.cwiseProduct((y * e_sel).conjugate());
  }
  return real_jacobian(d, lay);
}

SensitivityBundle build_bundle(const PowerSystem& sys, const StateVector& state) {
  SensitivityBundle bundle;
  bundle.jacobian = jacobian_at(sys, state);
  const auto lu = factorize_jacobian(bundle.jacobian);
  bundle.first_order = lu.inverse();
  const Index n = sys.layout().dim();
  bundle.gammas.reserve(static_cast<size_t>(n));
  for (Index m = 0; m < n; ++m) {
    bundle.gammas.push_back(jacobian_state_derivative(sys, state, m));
  }
  return bundle;
}

MatrixXd second_order_unsymmetrized(const SensitivityBundle& bundle, Index coord) {
  const MatrixXd& inv = bundle.first_order;
  const Index n = inv.rows();
  if (coord < 0 || coord >= n || static_cast<Index>(bundle.gammas.size()) != n) {
    throw Error(ErrorCode::kDimensionMismatch, "target coordinate out of range");
  }
  const Eigen::RowVectorXd row = inv.row(coord);
  MatrixXd u(n, n);
  for (Index m = 0; m < n; ++m) u.row(m) = row * bundle.gammas[static_cast<size_t>(m)];
  return -(inv.transpose() * u * inv);
}

SecondOrderSensitivity second_order(const SensitivityBundle& bundle, const PowerSystem& sys,
                                    int bus_id) {
  const int pos = sys.bus_position(bus_id);
  const Index coord = sys.layout().v_coord(pos);
  if (coord < 0) {
    throw Error(ErrorCode::kUnknownQuantity,
                "second-order targets must be PQ-bus voltages; bus " + std::to_string(bus_id) +
                    " is not PQ");
  }
  SecondOrderSensitivity out;
  out.target = QuantityOfInterest::bus_voltage(bus_id);
  out.coord = coord;
  const MatrixXd raw = second_order_unsymmetrized(bundle, coord);
  out.asymmetry = (raw - raw.transpose()).cwiseAbs().maxCoeff();
  const double scale = std::max(1.0, raw.cwiseAbs().maxCoeff());
  if (!(out.asymmetry <= 1e-8 * scale)) {
    throw Error(ErrorCode::kNumericalFailure,
                "second-order matrix asymmetry " + std::to_string(out.asymmetry));
  }
  out.lambda = 0.5 * (raw + raw.transpose());
  return out;
}

std::string_view to_string(Curvature c) {
  switch (c) {
    case Curvature::kConcave: return "concave";
    case Curvature::kConvex: return "convex";
    case Curvature::kIndefinite: return "indefinite";
  }
  return "?";
}

SpectralSummary dominant_subspace(const MatrixXd& lambda, double threshold) {
  if (lambda.size() == 0) throw Error(ErrorCode::kEmptyMatrix, "empty sensitivity matrix");
  if (!(threshold > 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::kValidation, "threshold must lie in (0, 1]");
  }
  Eigen::JacobiSVD<MatrixXd> svd(lambda, Eigen::ComputeThinU);
  SpectralSummary s;
  s.singular_values = svd.singularValues();
  const double cut = threshold * s.singular_values[0];
  Index keep = 0;
  while (keep < s.singular_values.size() && s.singular_values[keep] >= cut) ++keep;
  s.dominant_vectors = svd.matrixU().leftCols(keep);

  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(lambda, Eigen::EigenvaluesOnly);
  s.eigen_min = eig.eigenvalues().minCoeff();
  s.eigen_max = eig.eigenvalues().maxCoeff();
  if (s.eigen_max <= 1e-6) s.curvature = Curvature::kConcave;
  else if (s.eigen_min >= -1e-6) s.curvature = Curvature::kConvex;
  else s.curvature = Curvature::kIndefinite;
  return s;
}

MatrixXd top_singular_vectors(const MatrixXd& lambda, Index k) {
  if (lambda.size() == 0) throw Error(ErrorCode::kEmptyMatrix, "empty sensitivity matrix");
  Eigen::JacobiSVD<MatrixXd> svd(lambda, Eigen::ComputeThinU);
  return svd.matrixU().leftCols(std::min(k, lambda.cols()));
}

SpanStability stacked_span(const std::vector<MatrixXd>& bases) {
  if (bases.empty()) throw Error(ErrorCode::kEmptyMatrix, "no bases to stack");
  Index cols = 0;
  for (const auto& b : bases) cols += b.cols();
  MatrixXd stacked(bases.front().rows(), cols);
  Index c = 0;
  for (const auto& b : bases) {
    stacked.middleCols(c, b.cols()) = b;
    c += b.cols();
  }
  SpanStability out;
  out.used = static_cast<int>(bases.size());
  Eigen::BDCSVD<MatrixXd> svd(stacked);
  out.singular_values = svd.singularValues();
  const double cut = 0.01 * out.singular_values[0];
  for (Index i = 0; i < out.singular_values.size(); ++i) {
    if (out.singular_values[i] >= cut) ++out.approximate_rank;
  }
  return out;
}

SpanStability span_stability(const PowerSystem& sys, const OperatingRange& range, int count,
                             int k, int bus_id, std::uint64_t seed) {
  if (count < 1 || k < 1) throw Error(ErrorCode::kValidation, "count and k must be positive");
  const InjectionVector nominal = sys.nominal_injection();
  const auto warm = solve_newton(sys, nominal, sys.flat_start());
  const MatrixXd xs = draw_uniform(nominal.stacked(), range, count, seed);

  std::vector<MatrixXd> bases;
  int skipped = 0;
  for (Index m = 0; m < xs.rows(); ++m) {
    try {
      const auto x = InjectionVector::from_stacked(sys.layout(), xs.row(m).transpose());
      const auto sol = solve_newton(sys, x, warm.converged ? warm.state : sys.flat_start());
      if (!sol.converged) {
        ++skipped;
        continue;
      }
      const auto bundle = build_bundle(sys, sol.state);
      bases.push_back(top_singular_vectors(second_order(bundle, sys, bus_id).lambda, k));
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSingularJacobian) throw;
      ++skipped;
    }
  }
  if (bases.empty()) throw Error(ErrorCode::kAllSamplesFailed, "no operating point converged");
  SpanStability out = stacked_span(bases);
  out.skipped = skipped;
  return out;
}

}  // namespace apf
