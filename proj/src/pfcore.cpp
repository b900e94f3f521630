#include "apf/pfcore.hpp"

#include <cmath>
#include <complex>

#include "apf/error.hpp"

namespace apf {

using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using cplx = std::complex<double>;

int BusLayout::bus_of(Index coord) const {
  return is_theta(coord) ? pvpq[coord] : pq[coord - n_theta()];
}

Index BusLayout::v_coord(int bus_pos) const {
  return v_of_bus[bus_pos] < 0 ? -1 : n_theta() + v_of_bus[bus_pos];
}

Index BusLayout::theta_coord(int bus_pos) const { return theta_of_bus[bus_pos]; }

BusLayout make_layout(const NetworkCase& net) {
  BusLayout layout;
  layout.ref = reference_bus(net);
  layout.n_bus = static_cast<int>(net.buses.size());
  layout.theta_of_bus.assign(layout.n_bus, -1);
  layout.v_of_bus.assign(layout.n_bus, -1);
  for (int i = 0; i < layout.n_bus; ++i) {
    switch (net.buses[i].kind) {
      case BusKind::kPV: layout.pv.push_back(i); break;
      case BusKind::kPQ: layout.pq.push_back(i); break;
      case BusKind::kRef: break;
    }
    if (net.buses[i].kind != BusKind::kRef) {
      layout.theta_of_bus[i] = static_cast<Index>(layout.pvpq.size());
      layout.pvpq.push_back(i);
    }
    if (net.buses[i].kind == BusKind::kPQ) {
      layout.v_of_bus[i] = static_cast<Index>(layout.pq.size()) - 1;
    }
  }
  return layout;
}

VectorXd InjectionVector::stacked() const {
  VectorXd x(p.size() + q.size());
  x << p, q;
  return x;
}

InjectionVector InjectionVector::from_stacked(const BusLayout& layout, const VectorXd& x) {
  if (x.size() != layout.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "injection vector has wrong length");
  }
  return {x.head(layout.n_theta()), x.tail(layout.n_v())};
}

VectorXd StateVector::stacked() const {
  VectorXd y(theta.size() + v.size());
  y << theta, v;
  return y;
}

StateVector StateVector::from_stacked(const BusLayout& layout, const VectorXd& y) {
  if (y.size() != layout.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "state vector has wrong length");
  }
  return {y.head(layout.n_theta()), y.tail(layout.n_v())};
}

PowerSystem::PowerSystem(NetworkCase net)
    : net_(std::make_shared<const NetworkCase>(std::move(net))),
      ybus_(std::make_shared<const AdmittanceMatrix>(build_ybus(*net_))),
      layout_(std::make_shared<const BusLayout>(make_layout(*net_))),
      index_(std::make_shared<const std::unordered_map<int, int>>(bus_index_map(*net_))) {
  const auto& buses = net_->buses;
  v_set_ = VectorXd::Ones(static_cast<Index>(buses.size()));
  for (size_t i = 0; i < buses.size(); ++i) {
    if (buses[i].kind == BusKind::kPQ) continue;
    v_set_[i] = buses[i].v_init;
    for (const auto& g : net_->gens) {
      if (g.in_service && g.bus == buses[i].id) {
        v_set_[i] = g.v_set;
        break;
      }
    }
  }
  theta_ref_ = buses[layout_->ref].theta_init;
}

int PowerSystem::bus_position(int bus_id) const {
  auto it = index_->find(bus_id);
  if (it == index_->end()) {
    throw Error(ErrorCode::kUnknownQuantity, "unknown bus " + std::to_string(bus_id));
  }
  return it->second;
}

void PowerSystem::set_voltage_setpoint(int bus_pos, double v) {
  if (net_->buses.at(bus_pos).kind == BusKind::kPQ) {
    throw Error(ErrorCode::kValidation, "voltage set point on a PQ bus");
  }
  v_set_[bus_pos] = v;
}

InjectionVector PowerSystem::nominal_injection() const {
  const auto& lay = layout();
  const auto& buses = net_->buses;
  VectorXd p_bus(lay.n_bus);
  for (int i = 0; i < lay.n_bus; ++i) p_bus[i] = -buses[i].p_load;
  for (const auto& g : net_->gens) {
    if (g.in_service) p_bus[bus_position(g.bus)] += g.p_set;
  }
  InjectionVector x{VectorXd(lay.n_theta()), VectorXd(lay.n_v())};
  for (Index k = 0; k < lay.n_theta(); ++k) x.p[k] = p_bus[lay.pvpq[k]];
  for (Index k = 0; k < lay.n_v(); ++k) x.q[k] = -buses[lay.pq[k]].q_load;
  return x;
}

StateVector PowerSystem::flat_start() const {
  return {VectorXd::Constant(layout().n_theta(), theta_ref_), VectorXd::Ones(layout().n_v())};
}

void expand_state(const PowerSystem& sys, const StateVector& y, VectorXd& vm, VectorXd& va) {
  const auto& lay = sys.layout();
  if (y.theta.size() != lay.n_theta() || y.v.size() != lay.n_v()) {
    throw Error(ErrorCode::kDimensionMismatch, "state does not match the bus layout");
  }
  vm = sys.v_setpoints();
  va = VectorXd::Constant(lay.n_bus, sys.theta_ref());
  for (Index k = 0; k < lay.n_theta(); ++k) va[lay.pvpq[k]] = y.theta[k];
  for (Index k = 0; k < lay.n_v(); ++k) vm[lay.pq[k]] = y.v[k];
}

namespace {

VectorXcd phasors(const VectorXd& vm, const VectorXd& va) {
  VectorXcd v(vm.size());
  for (Index i = 0; i < vm.size(); ++i) v[i] = std::polar(vm[i], va[i]);
  return v;
}

}  // namespace

VectorXcd power_injection(const MatrixXcd& y, const VectorXcd& v) {
  return v.cwiseProduct((y * v).conjugate());
}

VectorXd mismatch(const PowerSystem& sys, const InjectionVector& x_spec, const StateVector& y) {
  const auto& lay = sys.layout();
  if (x_spec.p.size() != lay.n_theta() || x_spec.q.size() != lay.n_v()) {
    throw Error(ErrorCode::kDimensionMismatch, "injection does not match the bus layout");
  }
  VectorXd vm, va;
  expand_state(sys, y, vm, va);
  const VectorXcd s = power_injection(sys.ybus().y, phasors(vm, va));
  VectorXd r(lay.dim());
  for (Index k = 0; k < lay.n_theta(); ++k) r[k] = x_spec.p[k] - s[lay.pvpq[k]].real();
  for (Index k = 0; k < lay.n_v(); ++k) r[lay.n_theta() + k] = x_spec.q[k] - s[lay.pq[k]].imag();
  return r;
}

ComplexJacobianBlocks complex_power_gradients(const VectorXd& vm, const VectorXd& va,
                                              const MatrixXcd& y) {
  if (vm.size() != va.size() || y.rows() != vm.size() || y.cols() != vm.size()) {
    throw Error(ErrorCode::kDimensionMismatch, "state and admittance sizes differ");
  }
  const VectorXcd v = phasors(vm, va);
  const VectorXcd e = phasors(VectorXd::Ones(vm.size()), va);
  const VectorXcd i = y * v;
  const cplx j(0.0, 1.0);

  MatrixXcd ydv = -(y * v.asDiagonal());
  ydv.diagonal() += i;
  ComplexJacobianBlocks blocks;
  blocks.ds_dtheta = j * (v.asDiagonal() * ydv.conjugate());
  blocks.ds_dv = v.asDiagonal() * (y * e.asDiagonal()).conjugate();
  blocks.ds_dv.diagonal() += e.cwiseProduct(i.conjugate());
  return blocks;
}

MatrixXd real_jacobian(const ComplexJacobianBlocks& blocks, const BusLayout& layout) {
  const Index nt = layout.n_theta();
  const Index nv = layout.n_v();
  MatrixXd jac(nt + nv, nt + nv);
  for (Index r = 0; r < nt; ++r) {
    const int br = layout.pvpq[r];
    for (Index c = 0; c < nt; ++c) jac(r, c) = blocks.ds_dtheta(br, layout.pvpq[c]).real();
    for (Index c = 0; c < nv; ++c) jac(r, nt + c) = blocks.ds_dv(br, layout.pq[c]).real();
  }
  for (Index r = 0; r < nv; ++r) {
    const int br = layout.pq[r];
    for (Index c = 0; c < nt; ++c) jac(nt + r, c) = blocks.ds_dtheta(br, layout.pvpq[c]).imag();
    for (Index c = 0; c < nv; ++c) jac(nt + r, nt + c) = blocks.ds_dv(br, layout.pq[c]).imag();
  }
  return jac;
}

MatrixXd jacobian_at(const PowerSystem& sys, const StateVector& y) {
  VectorXd vm, va;
  expand_state(sys, y, vm, va);
  return real_jacobian(complex_power_gradients(vm, va, sys.ybus().y), sys.layout());
}

Eigen::PartialPivLU<MatrixXd> factorize_jacobian(const MatrixXd& j) {
  if (j.rows() == 0) throw Error(ErrorCode::kSingularJacobian, "empty Jacobian");
  Eigen::PartialPivLU<MatrixXd> lu(j);
  const double min_pivot = lu.matrixLU().diagonal().cwiseAbs().minCoeff();
  if (!(min_pivot >= 1e-12)) {
    throw Error(ErrorCode::kSingularJacobian,
                "pivot " + std::to_string(min_pivot) + " below 1e-12");
  }
  return lu;
}

PowerFlowSolution solve_newton(const PowerSystem& sys, const InjectionVector& x_spec,
                               const StateVector& y0, const NewtonOptions& opts) {
  if (!(opts.tol > 0.0)) throw Error(ErrorCode::kValidation, "tolerance must be positive");
  if (y0.v.size() > 0 && y0.v.minCoeff() <= 0.0) {
    throw Error(ErrorCode::kValidation, "initial magnitudes must be positive");
  }
  const auto& lay = sys.layout();
  VectorXd y = StateVector{y0.theta, y0.v}.stacked();
  if (y.size() != lay.dim()) {
    throw Error(ErrorCode::kDimensionMismatch, "initial state does not match the bus layout");
  }

  PowerFlowSolution sol;
  StateVector state = StateVector::from_stacked(lay, y);
  VectorXd r = mismatch(sys, x_spec, state);
  sol.residual_inf = r.size() ? r.cwiseAbs().maxCoeff() : 0.0;
  while (true) {
    if (!std::isfinite(sol.residual_inf)) break;
    if (sol.residual_inf <= opts.tol) {
      sol.converged = true;
      break;
    }
    if (sol.iterations >= opts.max_iter) break;
    const auto lu = factorize_jacobian(jacobian_at(sys, state));
    y += lu.solve(r);
    ++sol.iterations;
    state = StateVector::from_stacked(lay, y);
    r = mismatch(sys, x_spec, state);
    sol.residual_inf = r.cwiseAbs().maxCoeff();
  }

  sol.state = state;
  expand_state(sys, state, sol.v, sol.theta);
  sol.s_inj = power_injection(sys.ybus().y, phasors(sol.v, sol.theta));
  sol.branch_i = branch_currents(sys, sol.v, sol.theta);
  return sol;
}

VectorXd branch_currents(const PowerSystem& sys, const VectorXd& vm, const VectorXd& va) {
  const auto& branches = sys.network().branches;
  VectorXd out = VectorXd::Zero(static_cast<Index>(branches.size()));
  for (size_t k = 0; k < branches.size(); ++k) {
    const auto& br = branches[k];
    if (!br.in_service) continue;
    const int f = sys.bus_position(br.from_bus);
    const int t = sys.bus_position(br.to_bus);
    const auto a = branch_admittance(br);
    out[static_cast<Index>(k)] =
        std::abs(a.ff * std::polar(vm[f], va[f]) + a.ft * std::polar(vm[t], va[t]));
  }
  return out;
}

VectorXd branch_currents(const PowerFlowSolution& sol, const PowerSystem& sys) {
  return branch_currents(sys, sol.v, sol.theta);
}

std::string QuantityOfInterest::label() const {
  switch (kind) {
    case Kind::kBusVoltage: return "V:" + std::to_string(id);
    case Kind::kBranchCurrent: return "I:" + std::to_string(id);
    case Kind::kGenReactive: return "Q:" + std::to_string(id);
    case Kind::kSlackActive: return "P:slack";
  }
  return "?";
}

QuantityOfInterest QuantityOfInterest::parse(const std::string& label) {
  if (label == "P:slack") return slack_active();
  const auto colon = label.find(':');
  if (colon != 1 || label.size() < 3) {
    throw Error(ErrorCode::kUnknownQuantity, "cannot parse quantity '" + label + "'");
  }
  int id = 0;
  try {
    size_t used = 0;
    id = std::stoi(label.substr(2), &used);
    if (used != label.size() - 2) throw std::invalid_argument(label);
  } catch (const std::exception&) {
    throw Error(ErrorCode::kUnknownQuantity, "cannot parse quantity '" + label + "'");
  }
  switch (label[0]) {
    case 'V': return bus_voltage(id);
    case 'I': return branch_current(id);
    case 'Q': return gen_reactive(id);
    default: throw Error(ErrorCode::kUnknownQuantity, "cannot parse quantity '" + label + "'");
  }
}

void validate_quantity(const PowerSystem& sys, const QuantityOfInterest& q) {
  using K = QuantityOfInterest::Kind;
  switch (q.kind) {
    case K::kBusVoltage:
      sys.bus_position(q.id);
      return;
    case K::kBranchCurrent:
      if (q.id < 1 || q.id > static_cast<int>(sys.network().branches.size())) {
        throw Error(ErrorCode::kUnknownQuantity, "unknown branch " + std::to_string(q.id));
      }
      return;
    case K::kGenReactive:
      if (sys.network().buses[sys.bus_position(q.id)].kind == BusKind::kPQ) {
        throw Error(ErrorCode::kUnknownQuantity,
                    "bus " + std::to_string(q.id) + " has no generator");
      }
      return;
    case K::kSlackActive:
      return;
  }
  throw Error(ErrorCode::kUnknownQuantity, "unknown quantity kind");
}

double extract_quantity(const PowerSystem& sys, const PowerFlowSolution& sol,
                        const QuantityOfInterest& q) {
  validate_quantity(sys, q);
  using K = QuantityOfInterest::Kind;
  const auto& buses = sys.network().buses;
  switch (q.kind) {
    case K::kBusVoltage:
      return sol.v[sys.bus_position(q.id)];
    case K::kBranchCurrent:
      return sol.branch_i[q.id - 1];
    case K::kGenReactive: {
      const int pos = sys.bus_position(q.id);
      return sol.s_inj[pos].imag() + buses[pos].q_load;
    }
    case K::kSlackActive: {
      const int ref = sys.layout().ref;
      return sol.s_inj[ref].real() + buses[ref].p_load;
    }
  }
  throw Error(ErrorCode::kUnknownQuantity, q.label());
}

}  // namespace apf
