#include "apf/opf.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "apf/error.hpp"
#include "apf/pade.hpp"
#include "apf/sampling.hpp"

namespace apf {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

std::string_view to_string(OpfVariant v) {
  switch (v) {
    case OpfVariant::kDC: return "dc";
    case OpfVariant::kLA: return "la";
    case OpfVariant::kCLA: return "cla";
    case OpfVariant::kRA: return "ra";
    case OpfVariant::kCRA: return "cra";
  }
  return "?";
}

OpfVariant parse_opf_variant(std::string_view s) {
  if (s == "dc") return OpfVariant::kDC;
  if (s == "la") return OpfVariant::kLA;
  if (s == "cla") return OpfVariant::kCLA;
  if (s == "ra") return OpfVariant::kRA;
  if (s == "cra") return OpfVariant::kCRA;
  throw Error(ErrorCode::kValidation, "unknown OPF variant '" + std::string(s) + "'");
}

namespace {

std::vector<int> gens_at(const NetworkCase& net, int bus_id) {
  std::vector<int> out;
  for (size_t g = 0; g < net.gens.size(); ++g) {
    if (net.gens[g].in_service && net.gens[g].bus == bus_id) out.push_back(static_cast<int>(g));
  }
  return out;
}


}  // namespace

OpfInputs opf_inputs(const PowerSystem& sys) {
  const auto& net = sys.network();
  const auto& lay = sys.layout();
  OpfInputs in;
  in.p_buses = lay.pv;
  in.v_buses.push_back(lay.ref);
  in.v_buses.insert(in.v_buses.end(), lay.pv.begin(), lay.pv.end());
  const auto d = static_cast<Index>(in.p_buses.size() + in.v_buses.size());
  in.lower.resize(d);
  in.upper.resize(d);
  Index k = 0;
  for (int pos : in.p_buses) {
    double lo = 0.0, hi = 0.0;
    for (int g : gens_at(net, net.buses[static_cast<size_t>(pos)].id)) {
      lo += net.gens[static_cast<size_t>(g)].p_min;
      hi += net.gens[static_cast<size_t>(g)].p_max;
    }
    in.lower[k] = lo;
    in.upper[k] = hi;
    ++k;
  }
  for (int pos : in.v_buses) {
    in.lower[k] = net.buses[static_cast<size_t>(pos)].v_min;
    in.upper[k] = net.buses[static_cast<size_t>(pos)].v_max;
    ++k;
  }
  return in;
}

std::vector<QuantityOfInterest> opf_quantities(const PowerSystem& sys) {
  const auto& net = sys.network();
  const auto& lay = sys.layout();
  std::vector<QuantityOfInterest> qs;
  for (int pos : lay.pq) qs.push_back(QuantityOfInterest::bus_voltage(net.buses[static_cast<size_t>(pos)].id));
  qs.push_back(QuantityOfInterest::gen_reactive(net.buses[static_cast<size_t>(lay.ref)].id));
  for (int pos : lay.pv) qs.push_back(QuantityOfInterest::gen_reactive(net.buses[static_cast<size_t>(pos)].id));
  qs.push_back(QuantityOfInterest::slack_active());
  return qs;
}

PowerFlowSolution solve_at(const PowerSystem& sys, const OpfInputs& in, const VectorXd& u,
                           const StateVector* warm) {
  if (u.size() != in.dim()) throw Error(ErrorCode::kDimensionMismatch, "OPF input size");
  PowerSystem local = sys;
  const auto& net = sys.network();
  const auto& lay = sys.layout();
  InjectionVector x = sys.nominal_injection();
  Index k = 0;
  for (int pos : in.p_buses) {
    x.p[lay.theta_coord(pos)] = u[k++] - net.buses[static_cast<size_t>(pos)].p_load;
  }
  for (int pos : in.v_buses) local.set_voltage_setpoint(pos, u[k++]);
  return solve_newton(local, x, warm ? *warm : local.flat_start());
}

const QuantityModels* ApproximationSet::find(const QuantityOfInterest& q) const {
  for (const auto& e : entries) {
    if (e.quantity == q) return &e;
  }
  return nullptr;
}

QuantityModels& ApproximationSet::at(const QuantityOfInterest& q) {
  for (auto& e : entries) {
    if (e.quantity == q) return e;
  }
  entries.push_back(QuantityModels{q, std::nullopt, std::nullopt, std::nullopt});
  return entries.back();
}

SampleSet opf_training_set(const PowerSystem& sys, const OpfInputs& in,
                           const OpfTrainingOptions& opts) {
  const Index d = in.dim();
  if (d > 16) throw Error(ErrorCode::kValidation, "too many OPF inputs for corner sampling");
  const Index corners = Index{1} << d;
  MatrixXd us(opts.samples + corners, d);
  if (opts.samples > 0) {
    // Factors 0..1 mapped onto the box.
    const MatrixXd unit = draw_uniform(VectorXd::Ones(d), OperatingRange::scalar(d, 0.0, 1.0),
                                       opts.samples, opts.seed);
    for (Index m = 0; m < opts.samples; ++m) {
      us.row(m) = (in.lower + (in.upper - in.lower).cwiseProduct(unit.row(m).transpose())).transpose();
    }
  }
  for (Index c = 0; c < corners; ++c) {
    for (Index j = 0; j < d; ++j) {
      us(opts.samples + c, j) = ((c >> j) & 1) ? in.upper[j] : in.lower[j];
    }
  }

  const auto qs = opf_quantities(sys);
  SampleSet out;
  out.quantities = qs;
  out.seed = opts.seed;
  out.xs.resize(us.rows(), d);
  out.betas.resize(us.rows(), static_cast<Index>(qs.size()));
  Index kept = 0;
  for (Index m = 0; m < us.rows(); ++m) {
    PowerFlowSolution sol;
    try {
      sol = solve_at(sys, in, us.row(m).transpose());
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSingularJacobian) throw;
      ++out.skipped;
      continue;
    }
    if (!sol.converged) {
      ++out.skipped;
      continue;
    }
    out.xs.row(kept) = us.row(m);
    for (size_t q = 0; q < qs.size(); ++q) {
      out.betas(kept, static_cast<Index>(q)) = extract_quantity(sys, sol, qs[q]);
    }
    ++kept;
  }
  if (kept == 0) throw Error(ErrorCode::kAllSamplesFailed, "no OPF training point converged");
  out.xs.conservativeResize(kept, Eigen::NoChange);
  out.betas.conservativeResize(kept, Eigen::NoChange);
  return out;
}

ApproximationSet train_approximations(const PowerSystem& sys, OpfVariant variant,
                                      const SampleSet& training, const OpfTrainingOptions& opts) {
  ApproximationSet set;
  set.inputs = opf_inputs(sys);
  if (training.xs.cols() != set.inputs.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "training set does not match OPF inputs");
  }
  const QuantityOfInterest slack = QuantityOfInterest::slack_active();
  set.at(slack).none = fit_la(training, slack);
  if (variant == OpfVariant::kDC) return set;

  const bool rational = variant == OpfVariant::kRA || variant == OpfVariant::kCRA;
  const bool conservative = variant == OpfVariant::kCLA || variant == OpfVariant::kCRA;
  for (const auto& q : training.quantities) {
    auto& entry = set.at(q);
    auto fit = [&](Direction dir) {
      if (!rational) {
        ApproximationModel m = fit_linear(training.xs, training.beta(q), dir);
        m.quantity = q;
        return m;
      }
      RationalFitOptions ro;
      ro.direction = dir;
      ro.epsilon = opts.epsilon;
      ro.tol = opts.tol;
      ro.max_iter = opts.max_iter;
      return fit_rational(training, q, ro);
    };
    if (conservative) {
      entry.over = fit(Direction::kOver);
      entry.under = fit(Direction::kUnder);
    } else if (!(q == slack)) {
      entry.none = fit(Direction::kNone);
    }
  }
  return set;
}

namespace {

struct Builder {
  const PowerSystem& sys;
  OpfProblem& pb;

  // LP terms for coeffs^T u.
  std::vector<std::pair<Index, double>> u_terms(const VectorXd& coeffs) const {
    const auto& net = sys.network();
    std::vector<std::pair<Index, double>> terms;
    Index k = 0;
    for (int pos : pb.inputs.p_buses) {
      const double c = coeffs[k++];
      if (c == 0.0) continue;
      for (int g : gens_at(net, net.buses[static_cast<size_t>(pos)].id)) {
        terms.emplace_back(pb.pg_var[static_cast<size_t>(g)], c);
      }
    }
    for (size_t i = 0; i < pb.inputs.v_buses.size(); ++i) {
      const double c = coeffs[k++];
      if (c != 0.0) terms.emplace_back(pb.v_var[i], c);
    }
    return terms;
  }

  void add(std::vector<std::pair<Index, double>> terms, Sense s, double rhs, const std::string& q,
           const std::string& role) {
    pb.lp.add_row(std::move(terms), s, rhs);
    pb.tags.push_back({q, role});
  }

  void add_linear(const LinearConstraint& c, const std::string& q, const std::string& role) {
    add(u_terms(c.coeffs), c.sense, c.rhs, q, role);
  }

  void bound(const ApproximationModel& m, double value, Sense s, const std::string& role) {
    if (!std::isfinite(value)) return;
    add_linear(to_linear_constraint(m, value, s), m.quantity.label(), role);
  }

  void floor(const ApproximationModel& m) {
    if (m.kind == ModelKind::kLinear || m.b1.cwiseAbs().maxCoeff() == 0.0) return;
    // 1 + b1^T (u - u0) >= epsilon
    add(u_terms(m.b1), Sense::kGe, m.epsilon - 1.0 + m.b1.dot(m.x0), m.quantity.label(), "floor");
  }
};

const ApproximationModel& require(const std::optional<ApproximationModel>& m,
                                  const QuantityOfInterest& q, const char* what) {
  if (!m) throw Error(ErrorCode::kMissingModel, std::string(what) + " model for " + q.label());
  return *m;
}

}  // namespace

OpfProblem build_opf(const PowerSystem& sys, OpfVariant variant, const ApproximationSet* approx,
                     const OpfOptions& opts) {
  if (opts.cost_segments < 1) throw Error(ErrorCode::kValidation, "cost_segments must be >= 1");
  const auto& net = sys.network();
  const auto& lay = sys.layout();
  OpfProblem pb;
  pb.variant = variant;
  pb.inputs = opf_inputs(sys);
  Builder b{sys, pb};

  pb.pg_var.assign(net.gens.size(), -1);
  pb.z_var.assign(net.gens.size(), -1);
  for (size_t g = 0; g < net.gens.size(); ++g) {
    const auto& gen = net.gens[g];
    if (!gen.in_service) continue;
    pb.pg_var[g] = pb.lp.add_variable(0.0, gen.p_min, gen.p_max);
    pb.z_var[g] = pb.lp.add_variable(1.0);
  }
  if (variant != OpfVariant::kDC) {
    for (int pos : pb.inputs.v_buses) {
      const auto& bus = net.buses[static_cast<size_t>(pos)];
      pb.v_var.push_back(pb.lp.add_variable(0.0, bus.v_min, bus.v_max));
    }
  } else {
    pb.v_var.assign(pb.inputs.v_buses.size(), -1);
    pb.v_fixed.resize(static_cast<Index>(pb.inputs.v_buses.size()));
    for (size_t i = 0; i < pb.inputs.v_buses.size(); ++i) {
      pb.v_fixed[static_cast<Index>(i)] = sys.v_setpoints()[pb.inputs.v_buses[i]];
    }
  }

  // Tangent cuts at cost_segments + 1 uniform breakpoints: an under-estimate
  // whose largest gap on a segment of width w is c2 w^2 / 4.
  for (size_t g = 0; g < net.gens.size(); ++g) {
    const auto& gen = net.gens[g];
    if (!gen.in_service) continue;
    const int k = gen.cost[2] == 0.0 || gen.p_max <= gen.p_min ? 0 : opts.cost_segments;
    for (int i = 0; i <= k; ++i) {
      const double p = k == 0 ? gen.p_min : gen.p_min + (gen.p_max - gen.p_min) * i / k;
      const double slope = gen.cost[1] + 2.0 * gen.cost[2] * p;
      b.add({{pb.z_var[g], 1.0}, {pb.pg_var[g], -slope}}, Sense::kGe, gen.cost_at(p) - slope * p,
            "cost", "cut");
    }
    if (k > 0) {
      const double w = (gen.p_max - gen.p_min) / k;
      pb.cost_gap_bound += gen.cost[2] * w * w / 4.0;
    }
  }

  const int ref_id = net.buses[static_cast<size_t>(lay.ref)].id;
  const auto ref_gens = gens_at(net, ref_id);

  if (variant == OpfVariant::kDC) {
    // B' theta = P_gen - P_load with theta_ref = 0 and V held at set points.
    std::vector<Index> theta_var(static_cast<size_t>(lay.n_bus), -1);
    for (int pos : lay.pvpq) theta_var[static_cast<size_t>(pos)] = pb.lp.add_variable(0.0);
    const auto index = bus_index_map(net);
    std::vector<std::vector<std::pair<Index, double>>> rows(static_cast<size_t>(lay.n_bus));
    for (const auto& br : net.branches) {
      if (!br.in_service) continue;
      const double bx = 1.0 / (br.x * br.tap);
      const int f = index.at(br.from_bus);
      const int t = index.at(br.to_bus);
      for (const auto& [i, j, s] : {std::tuple{f, f, 1.0}, {f, t, -1.0}, {t, t, 1.0}, {t, f, -1.0}}) {
        const Index tv = theta_var[static_cast<size_t>(j)];
        if (tv >= 0) rows[static_cast<size_t>(i)].emplace_back(tv, s * bx);
      }
    }
    for (int pos = 0; pos < lay.n_bus; ++pos) {
      auto terms = rows[static_cast<size_t>(pos)];
      for (int g : gens_at(net, net.buses[static_cast<size_t>(pos)].id)) {
        terms.emplace_back(pb.pg_var[static_cast<size_t>(g)], -1.0);
      }
      b.add(std::move(terms), Sense::kEq, -net.buses[static_cast<size_t>(pos)].p_load,
            "bus:" + std::to_string(net.buses[static_cast<size_t>(pos)].id), "dc_flow");
    }
    return pb;
  }

  if (approx == nullptr) throw Error(ErrorCode::kMissingModel, "no approximation set");
  if (approx->inputs.dim() != pb.inputs.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "approximation inputs do not match the case");
  }

  // Slack output tied to the linear slack model: sum P_ref - a1^T u = a0 - a1^T u0.
  const QuantityOfInterest slack = QuantityOfInterest::slack_active();
  const auto* slack_models = approx->find(slack);
  if (!slack_models) throw Error(ErrorCode::kMissingModel, "no model for " + slack.label());
  const auto& slack_la = require(slack_models->none, slack, "linear");
  {
    auto terms = b.u_terms(-slack_la.a1);
    for (int g : ref_gens) terms.emplace_back(pb.pg_var[static_cast<size_t>(g)], 1.0);
    b.add(std::move(terms), Sense::kEq, slack_la.a0 - slack_la.a1.dot(slack_la.x0), slack.label(),
          "equality");
  }

  const bool conservative = variant == OpfVariant::kCLA || variant == OpfVariant::kCRA;
  const bool rational = variant == OpfVariant::kRA || variant == OpfVariant::kCRA;
  auto check_kind = [&](const ApproximationModel& m) {
    const bool is_rational = m.kind != ModelKind::kLinear;
    if (is_rational != rational) {
      throw Error(ErrorCode::kMissingModel, std::string(to_string(variant)) + " needs " +
                                                (rational ? "rational" : "linear") + " models for " +
                                                m.quantity.label());
    }
  };

  auto constrain = [&](const QuantityOfInterest& q, double lo, double hi, bool skip_plain) {
    const auto* models = approx->find(q);
    if (!models) throw Error(ErrorCode::kMissingModel, "no model for " + q.label());
    if (conservative) {
      const auto& over = require(models->over, q, "over");
      const auto& under = require(models->under, q, "under");
      check_kind(over);
      check_kind(under);
      b.bound(over, hi, Sense::kLe, "upper");
      b.bound(under, lo, Sense::kGe, "lower");
      b.floor(over);
      b.floor(under);
    } else if (!skip_plain) {
      const auto& m = require(models->none, q, "plain");
      check_kind(m);
      b.bound(m, hi, Sense::kLe, "upper");
      b.bound(m, lo, Sense::kGe, "lower");
      b.floor(m);
    }
  };

  for (int pos : lay.pq) {
    const auto& bus = net.buses[static_cast<size_t>(pos)];
    constrain(QuantityOfInterest::bus_voltage(bus.id), bus.v_min, bus.v_max, false);
  }
  for (int pos : pb.inputs.v_buses) {
    const int id = net.buses[static_cast<size_t>(pos)].id;
    double lo = 0.0, hi = 0.0;
    for (int g : gens_at(net, id)) {
      lo += net.gens[static_cast<size_t>(g)].q_min;
      hi += net.gens[static_cast<size_t>(g)].q_max;
    }
    constrain(QuantityOfInterest::gen_reactive(id), lo, hi, false);
  }
  // Slack limits: generator bounds already cap the linear slack model;
  // conservative variants add their own envelopes.
  if (conservative) {
    double lo = 0.0, hi = 0.0;
    for (int g : ref_gens) {
      lo += net.gens[static_cast<size_t>(g)].p_min;
      hi += net.gens[static_cast<size_t>(g)].p_max;
    }
    constrain(slack, lo, hi, true);
  }
  return pb;
}

double generation_cost(const NetworkCase& net, const VectorXd& gen_p) {
  double c = 0.0;
  for (size_t g = 0; g < net.gens.size(); ++g) {
    if (net.gens[g].in_service) c += net.gens[g].cost_at(gen_p[static_cast<Index>(g)]);
  }
  return c;
}

VectorXd inputs_from_setpoints(const PowerSystem& sys, const OpfInputs& in, const OpfSetpoints& sp) {
  const auto& net = sys.network();
  VectorXd u(in.dim());
  Index k = 0;
  for (int pos : in.p_buses) {
    double p = 0.0;
    for (int g : gens_at(net, net.buses[static_cast<size_t>(pos)].id)) p += sp.gen_p[g];
    u[k++] = p;
  }
  for (size_t i = 0; i < in.v_buses.size(); ++i) u[k++] = sp.v_set[static_cast<Index>(i)];
  return u;
}

AcEvaluation ac_evaluate(const PowerSystem& sys, const OpfInputs& in, const OpfSetpoints& sp) {
  const auto& net = sys.network();
  const auto& lay = sys.layout();
  AcEvaluation ev;
  PowerFlowSolution sol;
  try {
    sol = solve_at(sys, in, inputs_from_setpoints(sys, in, sp));
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kSingularJacobian) throw;
    return ev;
  }
  if (!sol.converged) return ev;
  ev.converged = true;

  ev.gen_p = sp.gen_p;
  const int ref_id = net.buses[static_cast<size_t>(lay.ref)].id;
  const auto ref_gens = gens_at(net, ref_id);
  double slack = extract_quantity(sys, sol, QuantityOfInterest::slack_active());
  double lo = 0.0, hi = 0.0;
  for (size_t i = 0; i < ref_gens.size(); ++i) {
    const auto& gen = net.gens[static_cast<size_t>(ref_gens[i])];
    lo += gen.p_min;
    hi += gen.p_max;
  }
  ev.slack_violation = std::max({0.0, lo - slack, slack - hi});
  // The first reference generator absorbs whatever the others do not supply.
  for (size_t i = 1; i < ref_gens.size(); ++i) slack -= ev.gen_p[ref_gens[i]];
  if (!ref_gens.empty()) ev.gen_p[ref_gens.front()] = slack;
  ev.ac_cost = generation_cost(net, ev.gen_p);

  for (int pos : lay.pq) {
    const auto& bus = net.buses[static_cast<size_t>(pos)];
    const double v = sol.v[pos];
    ev.max_v_violation = std::max({ev.max_v_violation, bus.v_min - v, v - bus.v_max});
  }
  for (int pos : in.v_buses) {
    const int id = net.buses[static_cast<size_t>(pos)].id;
    double qlo = 0.0, qhi = 0.0;
    for (int g : gens_at(net, id)) {
      qlo += net.gens[static_cast<size_t>(g)].q_min;
      qhi += net.gens[static_cast<size_t>(g)].q_max;
    }
    const double q = extract_quantity(sys, sol, QuantityOfInterest::gen_reactive(id));
    ev.q_violation = std::max({ev.q_violation, qlo - q, q - qhi});
  }
  return ev;
}

OpfSolution solve_opf(const OpfProblem& pb) {
  OpfSolution out;
  out.variant = pb.variant;
  const LpResult res = solve_lp(pb.lp);
  out.status = res.status;
  if (res.status != LpStatus::kOptimal) return out;
  out.model_cost = 0.0;
  out.setpoints.gen_p = VectorXd::Zero(static_cast<Index>(pb.pg_var.size()));
  for (size_t g = 0; g < pb.pg_var.size(); ++g) {
    if (pb.pg_var[g] < 0) continue;
    out.setpoints.gen_p[static_cast<Index>(g)] = res.x[pb.pg_var[g]];
    out.model_cost += res.x[pb.z_var[g]];
  }
  out.setpoints.v_set.resize(static_cast<Index>(pb.v_var.size()));
  for (size_t i = 0; i < pb.v_var.size(); ++i) {
    out.setpoints.v_set[static_cast<Index>(i)] = pb.v_var[i] >= 0 ? res.x[pb.v_var[i]] : pb.v_fixed[static_cast<Index>(i)];
  }
  return out;
}

GridSearchResult grid_search(const PowerSystem& sys, const OpfInputs& in, double step,
                             double limit_tol) {
  if (!(step > 0.0)) throw Error(ErrorCode::kValidation, "grid step must be positive");
  const auto& net = sys.network();
  for (int pos : in.v_buses) {
    if (gens_at(net, net.buses[static_cast<size_t>(pos)].id).size() != 1) {
      throw Error(ErrorCode::kValidation, "grid search needs one generator per bus");
    }
  }
  const Index d = in.dim();
  std::vector<long long> counts(static_cast<size_t>(d));
  long long total = 1;
  for (Index j = 0; j < d; ++j) {
    counts[static_cast<size_t>(j)] =
        static_cast<long long>(std::floor((in.upper[j] - in.lower[j]) / step + 1e-9)) + 1;
    total *= counts[static_cast<size_t>(j)];
    if (total > 20'000'000) throw Error(ErrorCode::kValidation, "grid too large");
  }

  GridSearchResult out;
  const auto& lay = sys.layout();
  const int ref_id = net.buses[static_cast<size_t>(lay.ref)].id;
  std::vector<long long> idx(static_cast<size_t>(d), 0);
  VectorXd u(d);
  std::optional<StateVector> warm;
  OpfSetpoints sp;
  sp.gen_p = VectorXd::Zero(static_cast<Index>(net.gens.size()));
  sp.v_set.resize(static_cast<Index>(in.v_buses.size()));
  for (long long n = 0; n < total; ++n) {
    for (Index j = 0; j < d; ++j) {
      u[j] = std::min(in.upper[j], in.lower[j] + step * static_cast<double>(idx[static_cast<size_t>(j)]));
    }
    ++out.points;
    PowerFlowSolution sol;
    bool ok = true;
    try {
      sol = solve_at(sys, in, u, warm ? &*warm : nullptr);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::kSingularJacobian) throw;
      ok = false;
    }
    if (ok && !sol.converged && warm) {
      sol = solve_at(sys, in, u);
    }
    if (ok && sol.converged) {
      warm = sol.state;
      bool feasible = true;
      for (int pos : lay.pq) {
        const auto& bus = net.buses[static_cast<size_t>(pos)];
        if (sol.v[pos] < bus.v_min - limit_tol || sol.v[pos] > bus.v_max + limit_tol) feasible = false;
      }
      Index k = 0;
      for (int pos : in.p_buses) {
        sp.gen_p[gens_at(net, net.buses[static_cast<size_t>(pos)].id).front()] = u[k++];
      }
      for (int pos : in.v_buses) {
        const int id = net.buses[static_cast<size_t>(pos)].id;
        const auto& gen = net.gens[static_cast<size_t>(gens_at(net, id).front())];
        const double q = extract_quantity(sys, sol, QuantityOfInterest::gen_reactive(id));
        if (q < gen.q_min - limit_tol || q > gen.q_max + limit_tol) feasible = false;
      }
      const int ref_gen = gens_at(net, ref_id).front();
      const double slack = extract_quantity(sys, sol, QuantityOfInterest::slack_active());
      const auto& rg = net.gens[static_cast<size_t>(ref_gen)];
      if (slack < rg.p_min - limit_tol || slack > rg.p_max + limit_tol) feasible = false;
      sp.gen_p[ref_gen] = slack;
      if (feasible) {
        ++out.feasible;
        const double c = generation_cost(net, sp.gen_p);
        if (!out.found || c < out.best_cost) {
          out.found = true;
          out.best_cost = c;
          out.best_u = u;
        }
      }
    }
    // Odometer step; the last coordinate varies fastest so warm starts stay close.
    for (Index j = d - 1; j >= 0; --j) {
      if (++idx[static_cast<size_t>(j)] < counts[static_cast<size_t>(j)]) break;
      idx[static_cast<size_t>(j)] = 0;
    }
  }
  return out;
}

}  // namespace apf
