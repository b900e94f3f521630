#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "apf/error.hpp"
#include "apf/opf.hpp"
#include "apf/pade.hpp"
#include "support.hpp"

using namespace apf;
using Eigen::Index;
using Eigen::VectorXd;

namespace {

struct Trained {
  PowerSystem sys;
  OpfInputs in;
  SampleSet training;
};

const Trained& opf3() {
  static const Trained t = [] {
    auto sys = testing::load_system("opf3.m");
    auto in = opf_inputs(sys);
    OpfTrainingOptions opts;
    opts.samples = 200;
    auto training = opf_training_set(sys, in, opts);
    return Trained{std::move(sys), std::move(in), std::move(training)};
  }();
  return t;
}

ApproximationSet trained(OpfVariant v) {
  return train_approximations(opf3().sys, v, opf3().training, OpfTrainingOptions{});
}

OpfSolution solve_variant(const PowerSystem& sys, OpfVariant v, const ApproximationSet* set,
                          int segments = 8) {
  OpfOptions o;
  o.cost_segments = segments;
  auto sol = solve_opf(build_opf(sys, v, set, o));
  if (sol.status == LpStatus::kOptimal) sol.ac = ac_evaluate(sys, opf_inputs(sys), sol.setpoints);
  return sol;
}

// LP variable values that realise input vector u (reference generators left at zero).
VectorXd lp_point(const PowerSystem& sys, const OpfProblem& pb, const VectorXd& u) {
  VectorXd x = VectorXd::Zero(pb.lp.num_vars());
  const auto& net = sys.network();
  Index k = 0;
  for (int pos : pb.inputs.p_buses) {
    for (size_t g = 0; g < net.gens.size(); ++g) {
      if (net.gens[g].bus == net.buses[static_cast<size_t>(pos)].id) x[pb.pg_var[g]] = u[k];
    }
    ++k;
  }
  for (size_t i = 0; i < pb.v_var.size(); ++i) x[pb.v_var[i]] = u[k++];
  return x;
}

double row_residual(const LinearProgram::Row& row, const VectorXd& x) {
  double s = -row.rhs;
  for (const auto& [j, c] : row.terms) s += c * x[j];
  return s;
}

}  // namespace

TEST_CASE("variant names round trip") {
  for (OpfVariant v : {OpfVariant::kDC, OpfVariant::kLA, OpfVariant::kCLA, OpfVariant::kRA, OpfVariant::kCRA}) {
    CHECK(parse_opf_variant(to_string(v)) == v);
  }
  CHECK_THROWS_AS(parse_opf_variant("ac"), Error);
}

TEST_CASE("OPF inputs of the three-bus case") {
  const auto& in = opf3().in;
  REQUIRE(in.dim() == 3);
  CHECK(in.p_buses.size() == 1);
  CHECK(in.v_buses.size() == 2);
  CHECK(in.v_buses.front() == opf3().sys.layout().ref);
  CHECK(in.lower[0] == doctest::Approx(0.3));
  CHECK(in.upper[0] == doctest::Approx(0.6));
  CHECK(in.lower[1] == doctest::Approx(1.0));
  CHECK(in.upper[2] == doctest::Approx(1.05));
  // 200 uniform points plus 8 corners.
  CHECK(opf3().training.size() == 208);
  CHECK(opf_quantities(opf3().sys).size() == 4);
}

TEST_CASE("DC dispatch follows merit order with linear costs") {
  auto net = load_matpower(testing::data_path("opf3.m"));
  net.gens[0].cost = {0.0, 4000.0, 0.0};
  net.gens[1].cost = {0.0, 1500.0, 0.0};
  net.gens[1].p_min = 0.0;
  net.gens[1].p_max = 2.0;
  const PowerSystem sys(net);
  const auto sol = solve_opf(build_opf(sys, OpfVariant::kDC, nullptr));
  REQUIRE(sol.status == LpStatus::kOptimal);
  CHECK(sol.setpoints.gen_p[0] == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(sol.setpoints.gen_p[1] == doctest::Approx(0.9).epsilon(1e-9));
  CHECK(sol.model_cost == doctest::Approx(1350.0).epsilon(1e-9));
  // Voltages stay at the case set points.
  CHECK(sol.setpoints.v_set.size() == 2);
  CHECK(sol.setpoints.v_set.cwiseAbs().minCoeff() == 1.0);
}

TEST_CASE("piecewise cost under-estimates the quadratic within the gap bound") {
  const auto& sys = opf3().sys;
  for (int k : {1, 2, 8}) {
    OpfOptions o;
    o.cost_segments = k;
    const auto pb = build_opf(sys, OpfVariant::kDC, nullptr, o);
    const auto sol = solve_opf(pb);
    REQUIRE(sol.status == LpStatus::kOptimal);
    const double truth = generation_cost(sys.network(), sol.setpoints.gen_p);
    CHECK(sol.model_cost <= truth + 1e-7);
    CHECK(truth - sol.model_cost <= pb.cost_gap_bound + 1e-7);
  }
  const double c1 = solve_opf(build_opf(sys, OpfVariant::kDC, nullptr, OpfOptions{1})).model_cost;
  const double c8 = solve_opf(build_opf(sys, OpfVariant::kDC, nullptr, OpfOptions{8})).model_cost;
  CHECK(c8 >= c1 - 1e-9);
  CHECK_THROWS_AS(build_opf(sys, OpfVariant::kDC, nullptr, OpfOptions{0}), Error);
}

TEST_CASE("conservative rows are the linearised model bounds") {
  const auto& sys = opf3().sys;
  const auto set = trained(OpfVariant::kCRA);
  const auto pb = build_opf(sys, OpfVariant::kCRA, &set);
  REQUIRE(pb.tags.size() == pb.lp.rows.size());
  const auto q = QuantityOfInterest::bus_voltage(3);
  const auto& models = *set.find(q);
  const auto upper = to_linear_constraint(*models.over, 1.01, Sense::kLe);
  const auto lower = to_linear_constraint(*models.under, 0.99, Sense::kGe);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  int seen = 0;
  for (size_t r = 0; r < pb.lp.rows.size(); ++r) {
    if (pb.tags[r].quantity != q.label()) continue;
    const auto& role = pb.tags[r].role;
    if (role != "upper" && role != "lower") continue;
    const auto& c = role == "upper" ? upper : lower;
    CHECK(pb.lp.rows[r].sense == c.sense);
    for (int t = 0; t < 20; ++t) {
      VectorXd u(3);
      for (Index j = 0; j < 3; ++j) u[j] = opf3().in.lower[j] + u01(rng) * (opf3().in.upper[j] - opf3().in.lower[j]);
      CHECK(row_residual(pb.lp.rows[r], lp_point(sys, pb, u)) == doctest::Approx(c.residual(u)).epsilon(1e-12));
    }
    ++seen;
  }
  CHECK(seen == 2);
  int slack_eq = 0;
  for (const auto& tag : pb.tags) slack_eq += tag.quantity == "P:slack" && tag.role == "equality";
  CHECK(slack_eq == 1);
}

TEST_CASE("conservative variants meet the AC limits and track the grid optimum") {
  const auto& sys = opf3().sys;
  const auto grid = grid_search(sys, opf3().in, 0.005);
  REQUIRE(grid.found);
  CHECK(grid.feasible <= grid.points);
  for (OpfVariant v : {OpfVariant::kLA, OpfVariant::kCLA, OpfVariant::kRA, OpfVariant::kCRA}) {
    CAPTURE(to_string(v));
    const auto set = trained(v);
    const auto sol = solve_variant(sys, v, &set);
    REQUIRE(sol.status == LpStatus::kOptimal);
    REQUIRE(sol.ac.converged);
    CHECK(std::abs(sol.ac.ac_cost - grid.best_cost) <= 0.05 * grid.best_cost);
    if (v == OpfVariant::kCLA || v == OpfVariant::kCRA) {
      CHECK(sol.ac.max_v_violation <= 1e-6);
      // A feasible point cannot beat the continuous optimum, which the grid
      // brackets to within its step.
      CHECK(sol.ac.ac_cost >= grid.best_cost * 0.99);
    }
  }
}

TEST_CASE("DC set points violate the tight load voltage band") {
  const auto sol = solve_variant(opf3().sys, OpfVariant::kDC, nullptr);
  REQUIRE(sol.status == LpStatus::kOptimal);
  REQUIRE(sol.ac.converged);
  CHECK(sol.ac.max_v_violation > 1e-3);
}

TEST_CASE("tightening a voltage limit never lowers the model cost") {
  const auto set = trained(OpfVariant::kCLA);
  auto net = opf3().sys.network();
  const double base = solve_opf(build_opf(opf3().sys, OpfVariant::kCLA, &set)).model_cost;
  net.buses[2].v_min = 0.995;
  const auto tight = solve_opf(build_opf(PowerSystem(net), OpfVariant::kCLA, &set));
  if (tight.status == LpStatus::kOptimal) CHECK(tight.model_cost >= base - 1e-9);
  else CHECK(tight.status == LpStatus::kInfeasible);
}

TEST_CASE("an empty voltage band is infeasible") {
  const auto set = trained(OpfVariant::kLA);
  auto net = opf3().sys.network();
  net.buses[2].v_min = 1.02;
  net.buses[2].v_max = 1.0;
  CHECK(solve_opf(build_opf(PowerSystem(net), OpfVariant::kLA, &set)).status == LpStatus::kInfeasible);
}

TEST_CASE("missing or mismatched models are reported") {
  const auto& sys = opf3().sys;
  const auto la = trained(OpfVariant::kLA);
  auto code = [&](OpfVariant v, const ApproximationSet* s) {
    try {
      build_opf(sys, v, s);
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::kIo;
  };
  CHECK(code(OpfVariant::kLA, nullptr) == ErrorCode::kMissingModel);
  CHECK(code(OpfVariant::kCLA, &la) == ErrorCode::kMissingModel);
  CHECK(code(OpfVariant::kRA, &la) == ErrorCode::kMissingModel);
  ApproximationSet bare;
  bare.inputs = la.inputs;
  CHECK(code(OpfVariant::kLA, &bare) == ErrorCode::kMissingModel);
}

TEST_CASE("AC evaluation charges the slack with the actual losses") {
  const auto& sys = opf3().sys;
  OpfSetpoints sp;
  sp.gen_p = Eigen::Vector2d(0.0, 0.45);
  sp.v_set = Eigen::Vector2d(1.03, 1.03);
  const auto ev = ac_evaluate(sys, opf3().in, sp);
  REQUIRE(ev.converged);
  // Slack supplies the load minus the PV output plus positive losses.
  CHECK(ev.gen_p[0] > 0.45);
  CHECK(ev.gen_p[0] < 0.55);
  CHECK(ev.ac_cost == doctest::Approx(generation_cost(sys.network(), ev.gen_p)));
}
