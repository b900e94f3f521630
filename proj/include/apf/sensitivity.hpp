#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Dense>

#include "apf/pfcore.hpp"

namespace apf {

struct OperatingRange;

// First-order data at one operating point, in the reduced coordinates of
// BusLayout. first_order = J^{-1} = d y / d x.
struct SensitivityBundle {
  Eigen::MatrixXd jacobian;
  std::vector<Eigen::MatrixXd> gammas;  // d J / d y_m, one per state coordinate
  Eigen::MatrixXd first_order;
};

// Derivative of the reduced real Jacobian with respect to state coordinate
// `coord`, assembled from the complex-form derivatives of dS/dtheta and dS/dV.
Eigen::MatrixXd jacobian_state_derivative(const PowerSystem& sys, const StateVector& state,
                                          Eigen::Index coord);

// Raises kSingularJacobian when J cannot be factorized.
SensitivityBundle build_bundle(const PowerSystem& sys, const StateVector& state);

struct SecondOrderSensitivity {
  QuantityOfInterest target;
  Eigen::Index coord = -1;
  Eigen::MatrixXd lambda;  // d^2 y_k / dx dx, symmetrized
  double asymmetry = 0.0;  // max |L - L^T| before symmetrization
};

// Hessian of the state coordinate `coord` with respect to the injections:
// L = -J^{-T} U J^{-1} with U[m, :] = [J^{-1}]_k Gamma_m.
Eigen::MatrixXd second_order_unsymmetrized(const SensitivityBundle& bundle, Eigen::Index coord);

// Second-order sensitivity of the voltage magnitude at a PQ bus.
SecondOrderSensitivity second_order(const SensitivityBundle& bundle, const PowerSystem& sys,
                                    int bus_id);

enum class Curvature { kConcave, kConvex, kIndefinite };

std::string_view to_string(Curvature c);

struct SpectralSummary {
  Eigen::VectorXd singular_values;   // descending
  Eigen::MatrixXd dominant_vectors;  // columns with sigma >= threshold * sigma_max
  double eigen_min = 0.0;
  double eigen_max = 0.0;
  Curvature curvature = Curvature::kIndefinite;
};

SpectralSummary dominant_subspace(const Eigen::MatrixXd& lambda, double threshold = 0.1);

// Leading k left singular vectors of a symmetric matrix.
Eigen::MatrixXd top_singular_vectors(const Eigen::MatrixXd& lambda, Eigen::Index k);

struct SpanStability {
  Eigen::VectorXd singular_values;  // of the stacked basis matrix, descending
  int approximate_rank = 0;         // count of sigma >= 0.01 * sigma_max
  int used = 0;
  int skipped = 0;
};

// Stacks the columns of every basis and measures the rank of the result.
SpanStability stacked_span(const std::vector<Eigen::MatrixXd>& bases);

// Samples `count` operating points uniformly in `range`, takes the leading k
// singular vectors of the voltage Hessian at `bus_id` at each point, and
// measures how much their span varies. Non-convergent points are skipped.
SpanStability span_stability(const PowerSystem& sys, const OperatingRange& range, int count,
                             int k, int bus_id, std::uint64_t seed);

}  // namespace apf
