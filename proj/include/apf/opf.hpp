#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "apf/lp.hpp"
#include "apf/pfcore.hpp"
#include "apf/regress.hpp"

namespace apf {

enum class OpfVariant { kDC, kLA, kCLA, kRA, kCRA };

std::string_view to_string(OpfVariant v);
OpfVariant parse_opf_variant(std::string_view s);

// Approximation inputs u = [P at each PV bus; V set point at each generator
// bus]. Loads stay at nominal. The box comes from generator P limits and
// generator-bus voltage limits.
struct OpfInputs {
  std::vector<int> p_buses;  // bus positions
  std::vector<int> v_buses;  // bus positions, reference bus first
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::Index dim() const { return lower.size(); }
};

OpfInputs opf_inputs(const PowerSystem& sys);

// Load-bus voltages, reactive output per generator bus, slack active power.
std::vector<QuantityOfInterest> opf_quantities(const PowerSystem& sys);

// AC power flow with generator P and V set from u.
PowerFlowSolution solve_at(const PowerSystem& sys, const OpfInputs& in, const Eigen::VectorXd& u,
                           const StateVector* warm = nullptr);

struct QuantityModels {
  QuantityOfInterest quantity;
  std::optional<ApproximationModel> none;
  std::optional<ApproximationModel> over;
  std::optional<ApproximationModel> under;
};

struct ApproximationSet {
  OpfInputs inputs;
  std::vector<QuantityModels> entries;

  const QuantityModels* find(const QuantityOfInterest& q) const;
  QuantityModels& at(const QuantityOfInterest& q);
};

struct OpfTrainingOptions {
  Eigen::Index samples = 300;
  std::uint64_t seed = 1;
  double epsilon = 0.1;
  double tol = 1e-6;
  int max_iter = 15;
};

// Uniform samples in the u box plus every box corner, evaluated by AC power flow.
SampleSet opf_training_set(const PowerSystem& sys, const OpfInputs& in,
                           const OpfTrainingOptions& opts);

// Fits what `variant` needs; the slack linear model is always present.
ApproximationSet train_approximations(const PowerSystem& sys, OpfVariant variant,
                                      const SampleSet& training, const OpfTrainingOptions& opts);

struct OpfOptions {
  int cost_segments = 8;
};

struct OpfRowTag {
  std::string quantity;  // QuantityOfInterest label, or "cost", "slack", "denominator", "dc_flow"
  std::string role;      // "upper", "lower", "equality", "floor", "cut"
};

struct OpfProblem {
  OpfVariant variant = OpfVariant::kLA;
  OpfInputs inputs;
  LinearProgram lp;
  std::vector<OpfRowTag> tags;  // one per lp row
  std::vector<Eigen::Index> pg_var;  // per generator, -1 when out of service
  std::vector<Eigen::Index> v_var;   // per inputs.v_buses, -1 for DC
  Eigen::VectorXd v_fixed;           // DC: case voltage set points per inputs.v_buses
  std::vector<Eigen::Index> z_var;   // cost epigraph per generator
  double cost_gap_bound = 0.0;       // largest shortfall of the piecewise cost
};

// Raises kMissingModel when a constrained quantity lacks the model the
// variant needs. `approx` may be null for DC.
OpfProblem build_opf(const PowerSystem& sys, OpfVariant variant, const ApproximationSet* approx,
                     const OpfOptions& opts = {});

struct OpfSetpoints {
  Eigen::VectorXd gen_p;  // per generator (reference generators as planned)
  Eigen::VectorXd v_set;  // per OpfInputs::v_buses
};

struct AcEvaluation {
  bool converged = false;
  double ac_cost = 0.0;
  double max_v_violation = 0.0;  // load buses
  double q_violation = 0.0;      // largest generator-bus reactive limit excess
  double slack_violation = 0.0;
  Eigen::VectorXd gen_p;  // actual outputs, slack included
};

struct OpfSolution {
  OpfVariant variant = OpfVariant::kLA;
  LpStatus status = LpStatus::kInfeasible;
  OpfSetpoints setpoints;
  double model_cost = 0.0;
  AcEvaluation ac;
};

OpfSolution solve_opf(const OpfProblem& problem);

// Total generation cost at the given generator outputs.
double generation_cost(const NetworkCase& net, const Eigen::VectorXd& gen_p);

Eigen::VectorXd inputs_from_setpoints(const PowerSystem& sys, const OpfInputs& in,
                                      const OpfSetpoints& sp);

AcEvaluation ac_evaluate(const PowerSystem& sys, const OpfInputs& in, const OpfSetpoints& sp);

struct GridSearchResult {
  bool found = false;
  double best_cost = 0.0;
  Eigen::VectorXd best_u;
  long long points = 0;
  long long feasible = 0;
};

// Exhaustive search over the u box at `step` resolution, keeping AC
// power-flow points that meet every limit. Needs one generator per bus.
GridSearchResult grid_search(const PowerSystem& sys, const OpfInputs& in, double step = 0.001,
                             double limit_tol = 1e-9);

}  // namespace apf
