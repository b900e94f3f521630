#pragma once

#include <cstdint>
#include <functional>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "apf/pfcore.hpp"
#include "apf/regress.hpp"
#include "apf/sample_set.hpp"

namespace apf {

enum class Placement { kExtreme, kCentral, kMixed };

std::string_view to_string(Placement p);
Placement parse_placement(std::string_view s);

// Underestimates of a concave quantity fail near the range boundary, so
// they get Extreme placement; overestimates fail in the middle.
Placement placement_for(Direction d);

struct ImportanceConfig {
  double subspace_fraction = 0.5;
  Placement placement = Placement::kExtreme;
  int k = 3;
  double step_scale = 1.0;

  void validate() const;
};

// Each component uniform in the box of `range` around `nominal`.
Eigen::MatrixXd draw_uniform(const Eigen::VectorXd& nominal, const OperatingRange& range,
                             Eigen::Index count, std::uint64_t seed);

struct SubspaceDraw {
  Eigen::MatrixXd xs;            // clipped into the box
  Eigen::MatrixXd coefficients;  // count x k, before clipping
  Eigen::VectorXd anchor;        // box center
  int clipped = 0;               // rows touched by clipping
};

// Rows anchor + V c. Coefficient j has support step_scale * sum_i h_i |V_ij|
// (h the box half-widths); |c| = support * u^(1/3) for Extreme,
// support * u^3 for Central and support * u for Mixed, with a random sign.
SubspaceDraw draw_subspace(const Eigen::VectorXd& nominal, const Eigen::MatrixXd& vectors,
                           const OperatingRange& range, Eigen::Index count, Placement placement,
                           std::uint64_t seed, double step_scale = 1.0);

// subspace_fraction of the rows from draw_subspace, the rest uniform.
// Mixed placement always splits 50/50.
Eigen::MatrixXd draw_importance(const Eigen::VectorXd& nominal, const Eigen::MatrixXd& vectors,
                                const OperatingRange& range, Eigen::Index count,
                                const ImportanceConfig& cfg, std::uint64_t seed);

// Leading k singular vectors of the voltage Hessian at `bus_id`, at the
// nominal operating point.
Eigen::MatrixXd dominant_directions(const PowerSystem& sys, int bus_id, int k);

// Solves each row once (warm-started from the nominal solution) and reads
// every quantity from that solution. Non-convergent rows are dropped.
SampleSet evaluate_samples(const PowerSystem& sys, const Eigen::MatrixXd& xs,
                           const std::vector<QuantityOfInterest>& quantities,
                           std::uint64_t seed = 0, const NewtonOptions& newton = {});

// Rows where beta lies strictly on the non-conservative side (tol 1e-9),
// or where a rational denominator is not positive.
std::vector<Eigen::Index> violating_rows(const ApproximationModel& model, const Eigen::MatrixXd& xs,
                                         const Eigen::VectorXd& beta);
double violation_rate(const ApproximationModel& model, const SampleSet& fresh);

using FitFunction = std::function<ApproximationModel(const SampleSet&)>;
using SamplerFunction = std::function<SampleSet(int round, Eigen::Index batch)>;

struct RefinementResult {
  ApproximationModel model;
  std::vector<double> rate_history;
  SampleSet training;
};

RefinementResult iterative_refinement(const FitFunction& fit, const SamplerFunction& sampler,
                                      SampleSet initial, int rounds, Eigen::Index batch);

}  // namespace apf
