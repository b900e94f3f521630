#pragma once

#include <array>
#include <complex>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace apf {

enum class BusKind { kPQ, kPV, kRef };

std::string_view to_string(BusKind kind);

// All electrical quantities are per unit on NetworkCase::base_mva, angles in
// radians.
struct BusRecord {
  int id = 0;
  BusKind kind = BusKind::kPQ;
  double p_load = 0.0;
  double q_load = 0.0;
  double gs = 0.0;
  double bs = 0.0;
  double v_init = 1.0;
  double theta_init = 0.0;
  double v_min = 0.9;
  double v_max = 1.1;

  bool operator==(const BusRecord&) const = default;
};

struct BranchRecord {
  int from_bus = 0;
  int to_bus = 0;
  double r = 0.0;
  double x = 0.0;
  double b_chg = 0.0;
  double tap = 1.0;
  double shift = 0.0;
  bool in_service = true;

  bool operator==(const BranchRecord&) const = default;
};

struct GenRecord {
  int bus = 0;
  double p_set = 0.0;
  double v_set = 1.0;
  double p_min = 0.0;
  double p_max = 0.0;
  double q_min = 0.0;
  double q_max = 0.0;
  bool in_service = true;
  // cost(p) = cost[0] + cost[1] * p + cost[2] * p^2, p in per unit.
  std::array<double, 3> cost{0.0, 0.0, 0.0};

  double cost_at(double p) const { return cost[0] + p * (cost[1] + p * cost[2]); }

  bool operator==(const GenRecord&) const = default;
};

struct NetworkCase {
  double base_mva = 100.0;
  std::vector<BusRecord> buses;
  std::vector<BranchRecord> branches;
  std::vector<GenRecord> gens;

  bool operator==(const NetworkCase&) const = default;
};

// Maps external bus ids to positions in NetworkCase::buses.
std::unordered_map<int, int> bus_index_map(const NetworkCase& net);

// Position of the unique reference bus.
int reference_bus(const NetworkCase& net);

// True when every bus is reachable from the reference bus over in-service
// branches.
bool is_connected(const NetworkCase& net);

// Parses the numeric-matrix subset of a MATPOWER case file (baseMVA, bus,
// gen, branch and an optional polynomial gencost). Comments and any other
// mpc.* fields are ignored. Quantities are converted to per unit once here.
NetworkCase parse_matpower(std::string_view text);
NetworkCase load_matpower(const std::string& path);

// Writes a case back in MATPOWER syntax (physical units).
std::string to_matpower(const NetworkCase& net);

// Canonical JSON with a fixed key order.
nlohmann::ordered_json to_json(const NetworkCase& net);
NetworkCase network_from_json(const nlohmann::json& j);

struct AdmittanceMatrix {
  Eigen::MatrixXcd y;

  Eigen::Index n() const { return y.rows(); }
  Eigen::MatrixXd g() const { return y.real(); }
  Eigen::MatrixXd b() const { return y.imag(); }
};

// Two-port pi-model admittances of a branch: [I_f; I_t] = [[ff, ft]; [tf, tt]] [V_f; V_t].
struct BranchAdmittance {
  std::complex<double> ff, ft, tf, tt;
};

BranchAdmittance branch_admittance(const BranchRecord& br);

AdmittanceMatrix build_ybus(const NetworkCase& net);

}  // namespace apf
