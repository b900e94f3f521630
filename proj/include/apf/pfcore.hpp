#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "apf/netmodel.hpp"

namespace apf {

// Reduced unknown set: angles at PV and PQ buses, magnitudes at PQ buses.
// Bus positions are indices into NetworkCase::buses, in ascending order.
struct BusLayout {
  int ref = -1;
  std::vector<int> pv;
  std::vector<int> pq;
  std::vector<int> pvpq;
  int n_bus = 0;
  // Per bus position: reduced angle / magnitude coordinate, or -1.
  std::vector<Eigen::Index> theta_of_bus;
  std::vector<Eigen::Index> v_of_bus;

  Eigen::Index n_theta() const { return static_cast<Eigen::Index>(pvpq.size()); }
  Eigen::Index n_v() const { return static_cast<Eigen::Index>(pq.size()); }
  Eigen::Index dim() const { return n_theta() + n_v(); }

  bool is_theta(Eigen::Index coord) const { return coord < n_theta(); }
  // Bus position behind a reduced state (or injection) coordinate.
  int bus_of(Eigen::Index coord) const;
  // Reduced coordinate of the magnitude (or Q injection) at a PQ bus, -1 otherwise.
  Eigen::Index v_coord(int bus_pos) const;
  // Reduced coordinate of the angle (or P injection) at a non-reference bus, -1 otherwise.
  Eigen::Index theta_coord(int bus_pos) const;
};

BusLayout make_layout(const NetworkCase& net);

// x = [P at PV and PQ buses; Q at PQ buses], generation positive.
struct InjectionVector {
  Eigen::VectorXd p;
  Eigen::VectorXd q;

  Eigen::VectorXd stacked() const;
  static InjectionVector from_stacked(const BusLayout& layout, const Eigen::VectorXd& x);
};

// y = [theta at PV and PQ buses; V at PQ buses].
struct StateVector {
  Eigen::VectorXd theta;
  Eigen::VectorXd v;

  Eigen::VectorXd stacked() const;
  static StateVector from_stacked(const BusLayout& layout, const Eigen::VectorXd& y);
};

// A network together with its admittance matrix, reduced layout and the
// voltage set points held at the reference and PV buses. Copies share the
// immutable case and admittance data; set points are per copy.
class PowerSystem {
 public:
  explicit PowerSystem(NetworkCase net);

  const NetworkCase& network() const { return *net_; }
  const AdmittanceMatrix& ybus() const { return *ybus_; }
  const BusLayout& layout() const { return *layout_; }
  int bus_position(int bus_id) const;

  // Full-length magnitudes; only REF and PV entries are used.
  const Eigen::VectorXd& v_setpoints() const { return v_set_; }
  void set_voltage_setpoint(int bus_pos, double v);
  double theta_ref() const { return theta_ref_; }

  // Net injections implied by the case's generator set points and loads.
  InjectionVector nominal_injection() const;
  StateVector flat_start() const;

 private:
  std::shared_ptr<const NetworkCase> net_;
  std::shared_ptr<const AdmittanceMatrix> ybus_;
  std::shared_ptr<const BusLayout> layout_;
  std::shared_ptr<const std::unordered_map<int, int>> index_;
  Eigen::VectorXd v_set_;
  double theta_ref_ = 0.0;
};

// Full-length magnitudes and angles for a reduced state.
void expand_state(const PowerSystem& sys, const StateVector& y, Eigen::VectorXd& vm,
                  Eigen::VectorXd& va);

// S = diag(V) conj(Y V) for the complex phasor vector V.
Eigen::VectorXcd power_injection(const Eigen::MatrixXcd& y, const Eigen::VectorXcd& v);

// Specified minus computed injections, ordered [dP at PV,PQ; dQ at PQ].
Eigen::VectorXd mismatch(const PowerSystem& sys, const InjectionVector& x_spec,
                         const StateVector& y);

struct NewtonOptions {
  double tol = 1e-8;
  int max_iter = 20;
};

struct PowerFlowSolution {
  Eigen::VectorXd v;
  Eigen::VectorXd theta;
  Eigen::VectorXcd s_inj;
  Eigen::VectorXd branch_i;
  StateVector state;
  bool converged = false;
  int iterations = 0;
  double residual_inf = 0.0;
};

// Newton-Raphson on the reduced system. Failure to converge is reported in
// the result; a singular Jacobian raises ErrorCode::kSingularJacobian.
PowerFlowSolution solve_newton(const PowerSystem& sys, const InjectionVector& x_spec,
                               const StateVector& y0, const NewtonOptions& opts = {});

struct ComplexJacobianBlocks {
  Eigen::MatrixXcd ds_dtheta;
  Eigen::MatrixXcd ds_dv;
};

ComplexJacobianBlocks complex_power_gradients(const Eigen::VectorXd& vm,
                                              const Eigen::VectorXd& va,
                                              const Eigen::MatrixXcd& y);

// [[Re dS/dtheta, Re dS/dV]; [Im dS/dtheta, Im dS/dV]] restricted to the
// reduced rows and columns.
Eigen::MatrixXd real_jacobian(const ComplexJacobianBlocks& blocks, const BusLayout& layout);

// Jacobian of the computed injections at a reduced state.
Eigen::MatrixXd jacobian_at(const PowerSystem& sys, const StateVector& y);

// LU factorization that raises kSingularJacobian on a pivot below 1e-12.
Eigen::PartialPivLU<Eigen::MatrixXd> factorize_jacobian(const Eigen::MatrixXd& j);

// From-end current magnitudes per branch; zero for out-of-service branches.
Eigen::VectorXd branch_currents(const PowerSystem& sys, const Eigen::VectorXd& vm,
                                const Eigen::VectorXd& va);
Eigen::VectorXd branch_currents(const PowerFlowSolution& sol, const PowerSystem& sys);

struct QuantityOfInterest {
  enum class Kind { kBusVoltage, kBranchCurrent, kGenReactive, kSlackActive };
  Kind kind = Kind::kBusVoltage;
  // Bus id for voltages and reactive outputs, 1-based branch number for currents.
  int id = 0;

  static QuantityOfInterest bus_voltage(int bus_id) { return {Kind::kBusVoltage, bus_id}; }
  static QuantityOfInterest branch_current(int branch) { return {Kind::kBranchCurrent, branch}; }
  static QuantityOfInterest gen_reactive(int bus_id) { return {Kind::kGenReactive, bus_id}; }
  static QuantityOfInterest slack_active() { return {Kind::kSlackActive, 0}; }

  // "V:<bus>", "I:<branch>", "Q:<bus>" or "P:slack".
  std::string label() const;
  static QuantityOfInterest parse(const std::string& label);

  bool operator==(const QuantityOfInterest&) const = default;
};

double extract_quantity(const PowerSystem& sys, const PowerFlowSolution& sol,
                        const QuantityOfInterest& q);

// Raises kUnknownQuantity when q does not name an element of the case.
void validate_quantity(const PowerSystem& sys, const QuantityOfInterest& q);

}  // namespace apf
