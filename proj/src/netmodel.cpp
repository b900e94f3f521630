#include "apf/netmodel.hpp"

#include <cmath>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <optional>
#include <queue>
#include <regex>
#include <sstream>

#include "apf/error.hpp"

namespace apf {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

using Matrix = std::vector<std::vector<double>>;

std::string strip_comments(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool in_comment = false;
  for (char c : text) {
    if (c == '%') in_comment = true;
    if (c == '\n') in_comment = false;
    if (!in_comment) out.push_back(c);
  }
  return out;
}

// Parses the body between '[' and ']' into rows. Rows end at ';' or newline.
Matrix parse_matrix_body(std::string_view body, std::string_view name) {
  Matrix rows;
  std::vector<double> row;
  std::string token;
  auto flush_token = [&] {
    if (token.empty()) return;
    char* end = nullptr;
    const double v = std::strtod(token.c_str(), &end);
    if (end == token.c_str() || *end != '\0') {
      throw Error(ErrorCode::kMalformedRow,
                  "non-numeric entry '" + token + "' in mpc." + std::string(name));
    }
    row.push_back(v);
    token.clear();
  };
  auto flush_row = [&] {
    flush_token();
    if (!row.empty()) rows.push_back(std::move(row));
    row.clear();
  };
  for (char c : body) {
    if (c == ';' || c == '\n' || c == '\r') {
      flush_row();
    } else if (c == ' ' || c == '\t' || c == ',') {
      flush_token();
    } else {
      token.push_back(c);
    }
  }
  flush_row();
  return rows;
}

std::optional<Matrix> find_matrix(const std::string& text, const std::string& name) {
  const std::regex head("mpc\\." + name + "\\s*=\\s*\\[");
  std::smatch m;
  if (!std::regex_search(text, m, head)) return std::nullopt;
  const auto start = static_cast<size_t>(m.position(0) + m.length(0));
  const auto stop = text.find(']', start);
  if (stop == std::string::npos) {
    throw Error(ErrorCode::kMalformedRow, "unterminated mpc." + name + " matrix");
  }
  return parse_matrix_body(std::string_view(text).substr(start, stop - start), name);
}

void require_columns(const Matrix& m, size_t min_cols, const std::string& name) {
  for (size_t i = 0; i < m.size(); ++i) {
    if (m[i].size() < min_cols || m[i].size() != m.front().size()) {
      throw Error(ErrorCode::kMalformedRow,
                  "mpc." + name + " row " + std::to_string(i + 1) + " has " +
                      std::to_string(m[i].size()) + " columns, expected " +
                      (m[i].size() < min_cols ? "at least " + std::to_string(min_cols)
                                              : std::to_string(m.front().size())));
    }
  }
}

int as_id(double v, const std::string& what) {
  if (v != std::floor(v)) {
    throw Error(ErrorCode::kMalformedRow, what + " is not an integer");
  }
  return static_cast<int>(v);
}

}  // namespace

std::string_view to_string(BusKind kind) {
  switch (kind) {
    case BusKind::kPQ: return "PQ";
    case BusKind::kPV: return "PV";
    case BusKind::kRef: return "REF";
  }
  return "?";
}

std::unordered_map<int, int> bus_index_map(const NetworkCase& net) {
  std::unordered_map<int, int> index;
  index.reserve(net.buses.size());
  for (size_t i = 0; i < net.buses.size(); ++i) {
    index.emplace(net.buses[i].id, static_cast<int>(i));
  }
  return index;
}

int reference_bus(const NetworkCase& net) {
  int ref = -1;
  for (size_t i = 0; i < net.buses.size(); ++i) {
    if (net.buses[i].kind != BusKind::kRef) continue;
    if (ref >= 0) throw Error(ErrorCode::kNoReference, "multiple reference buses");
    ref = static_cast<int>(i);
  }
  if (ref < 0) throw Error(ErrorCode::kNoReference, "no reference bus");
  return ref;
}

bool is_connected(const NetworkCase& net) {
  if (net.buses.empty()) return true;
  const auto index = bus_index_map(net);
  std::vector<std::vector<int>> adj(net.buses.size());
  for (const auto& br : net.branches) {
    if (!br.in_service) continue;
    const int f = index.at(br.from_bus);
    const int t = index.at(br.to_bus);
    adj[f].push_back(t);
    adj[t].push_back(f);
  }
  std::vector<bool> seen(net.buses.size(), false);
  std::queue<int> todo;
  todo.push(reference_bus(net));
  seen[todo.front()] = true;
  size_t count = 1;
  while (!todo.empty()) {
    const int b = todo.front();
    todo.pop();
    for (int nb : adj[b]) {
      if (!seen[nb]) {
        seen[nb] = true;
        ++count;
        todo.push(nb);
      }
    }
  }
  return count == net.buses.size();
}

NetworkCase parse_matpower(std::string_view raw) {
  const std::string text = strip_comments(raw);
  NetworkCase net;

  const std::regex base_re("mpc\\.baseMVA\\s*=\\s*([-+0-9.eE]+)");
  std::smatch m;
  if (!std::regex_search(text, m, base_re)) {
    throw Error(ErrorCode::kMissingSection, "mpc.baseMVA not found");
  }
  net.base_mva = std::stod(m[1].str());
  if (!(net.base_mva > 0.0)) {
    throw Error(ErrorCode::kMalformedRow, "baseMVA must be positive");
  }
  const double base = net.base_mva;

  auto bus_m = find_matrix(text, "bus");
  auto gen_m = find_matrix(text, "gen");
  auto branch_m = find_matrix(text, "branch");
  if (!bus_m || bus_m->empty()) throw Error(ErrorCode::kMissingSection, "mpc.bus not found");
  if (!gen_m || gen_m->empty()) throw Error(ErrorCode::kMissingSection, "mpc.gen not found");
  if (!branch_m) throw Error(ErrorCode::kMissingSection, "mpc.branch not found");
  require_columns(*bus_m, 13, "bus");
  require_columns(*gen_m, 10, "gen");
  require_columns(*branch_m, 11, "branch");

  for (const auto& r : *bus_m) {
    BusRecord b;
    b.id = as_id(r[0], "bus id");
    switch (as_id(r[1], "bus type")) {
      case 1: b.kind = BusKind::kPQ; break;
      case 2: b.kind = BusKind::kPV; break;
      case 3: b.kind = BusKind::kRef; break;
      default:
        throw Error(ErrorCode::kMalformedRow,
                    "bus " + std::to_string(b.id) + " has unsupported type code");
    }
    b.p_load = r[2] / base;
    b.q_load = r[3] / base;
    b.gs = r[4] / base;
    b.bs = r[5] / base;
    b.v_init = r[7];
    b.theta_init = r[8] * kDeg;
    b.v_max = r[11];
    b.v_min = r[12];
    net.buses.push_back(b);
  }
  auto index = bus_index_map(net);
  if (index.size() != net.buses.size()) {
    throw Error(ErrorCode::kMalformedRow, "duplicate bus ids");
  }
  auto lookup = [&](int id, const std::string& who) {
    auto it = index.find(id);
    if (it == index.end()) {
      throw Error(ErrorCode::kDanglingReference,
                  who + " refers to unknown bus " + std::to_string(id));
    }
    return it->second;
  };

  for (size_t i = 0; i < branch_m->size(); ++i) {
    const auto& r = (*branch_m)[i];
    BranchRecord br;
    br.from_bus = as_id(r[0], "branch from bus");
    br.to_bus = as_id(r[1], "branch to bus");
    const std::string who = "branch " + std::to_string(i + 1);
    lookup(br.from_bus, who);
    lookup(br.to_bus, who);
    if (br.from_bus == br.to_bus) {
      throw Error(ErrorCode::kMalformedRow, who + " connects a bus to itself");
    }
    br.r = r[2];
    br.x = r[3];
    br.b_chg = r[4];
    br.tap = r[8] == 0.0 ? 1.0 : r[8];
    br.shift = r[9] * kDeg;
    br.in_service = r[10] != 0.0;
    net.branches.push_back(br);
  }

  for (size_t i = 0; i < gen_m->size(); ++i) {
    const auto& r = (*gen_m)[i];
    GenRecord g;
    g.bus = as_id(r[0], "gen bus");
    const int bi = lookup(g.bus, "gen " + std::to_string(i + 1));
    g.p_set = r[1] / base;
    g.q_max = r[3] / base;
    g.q_min = r[4] / base;
    g.v_set = r[5];
    g.in_service = r[7] > 0.0;
    g.p_max = r[8] / base;
    g.p_min = r[9] / base;
    if (g.in_service && net.buses[bi].kind == BusKind::kPQ) {
      throw Error(ErrorCode::kMalformedRow,
                  "gen " + std::to_string(i + 1) + " sits on PQ bus " + std::to_string(g.bus));
    }
    if (g.p_min > g.p_max || g.q_min > g.q_max) {
      throw Error(ErrorCode::kMalformedRow,
                  "gen " + std::to_string(i + 1) + " has inverted limits");
    }
    net.gens.push_back(g);
  }

  if (auto cost_m = find_matrix(text, "gencost"); cost_m && !cost_m->empty()) {
    if (cost_m->size() != net.gens.size()) {
      throw Error(ErrorCode::kMalformedRow, "mpc.gencost must have one row per generator");
    }
    for (size_t i = 0; i < cost_m->size(); ++i) {
      const auto& r = (*cost_m)[i];
      if (r.size() < 4 || as_id(r[0], "gencost model") != 2) {
        throw Error(ErrorCode::kMalformedRow, "only polynomial gencost rows are supported");
      }
      const int ncost = as_id(r[3], "gencost ncost");
      if (ncost < 1 || ncost > 3 || r.size() < static_cast<size_t>(4 + ncost)) {
        throw Error(ErrorCode::kMalformedRow,
                    "gencost row " + std::to_string(i + 1) + " needs degree <= 2");
      }
      // Coefficients are listed highest degree first, in $/h per MW^k.
      for (int k = 0; k < ncost; ++k) {
        const int degree = ncost - 1 - k;
        net.gens[i].cost[degree] = r[4 + k] * std::pow(base, degree);
      }
    }
  }

  // A PV bus without an in-service machine cannot hold its voltage.
  for (auto& b : net.buses) {
    if (b.kind != BusKind::kPV) continue;
    bool has_gen = false;
    for (const auto& g : net.gens) has_gen |= (g.in_service && g.bus == b.id);
    if (!has_gen) b.kind = BusKind::kPQ;
  }
  reference_bus(net);
  return net;
}

NetworkCase load_matpower(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kIo, "cannot open case file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_matpower(ss.str());
}

std::string to_matpower(const NetworkCase& net) {
  const double base = net.base_mva;
  std::ostringstream os;
  os << std::setprecision(17);
  os << "function mpc = exported\nmpc.version = '2';\nmpc.baseMVA = " << base << ";\n";
  os << "mpc.bus = [\n";
  for (const auto& b : net.buses) {
    const int type = b.kind == BusKind::kPQ ? 1 : b.kind == BusKind::kPV ? 2 : 3;
    os << "\t" << b.id << "\t" << type << "\t" << b.p_load * base << "\t" << b.q_load * base
       << "\t" << b.gs * base << "\t" << b.bs * base << "\t1\t" << b.v_init << "\t"
       << b.theta_init / kDeg << "\t0\t1\t" << b.v_max << "\t" << b.v_min << ";\n";
  }
  os << "];\nmpc.gen = [\n";
  for (const auto& g : net.gens) {
    os << "\t" << g.bus << "\t" << g.p_set * base << "\t0\t" << g.q_max * base << "\t"
       << g.q_min * base << "\t" << g.v_set << "\t" << base << "\t" << (g.in_service ? 1 : 0)
       << "\t" << g.p_max * base << "\t" << g.p_min * base << ";\n";
  }
  os << "];\nmpc.branch = [\n";
  for (const auto& br : net.branches) {
    os << "\t" << br.from_bus << "\t" << br.to_bus << "\t" << br.r << "\t" << br.x << "\t"
       << br.b_chg << "\t0\t0\t0\t" << (br.tap == 1.0 ? 0.0 : br.tap) << "\t"
       << br.shift / kDeg << "\t" << (br.in_service ? 1 : 0) << ";\n";
  }
  os << "];\nmpc.gencost = [\n";
  for (const auto& g : net.gens) {
    os << "\t2\t0\t0\t3\t" << g.cost[2] / (base * base) << "\t" << g.cost[1] / base << "\t"
       << g.cost[0] << ";\n";
  }
  os << "];\n";
  return os.str();
}

nlohmann::ordered_json to_json(const NetworkCase& net) {
  nlohmann::ordered_json j;
  j["base_mva"] = net.base_mva;
  j["buses"] = nlohmann::ordered_json::array();
  for (const auto& b : net.buses) {
    nlohmann::ordered_json e;
    e["id"] = b.id;
    e["kind"] = to_string(b.kind);
    e["p_load"] = b.p_load;
    e["q_load"] = b.q_load;
    e["gs"] = b.gs;
    e["bs"] = b.bs;
    e["v_init"] = b.v_init;
    e["theta_init"] = b.theta_init;
    e["v_min"] = b.v_min;
    e["v_max"] = b.v_max;
    j["buses"].push_back(std::move(e));
  }
  j["branches"] = nlohmann::ordered_json::array();
  for (const auto& br : net.branches) {
    nlohmann::ordered_json e;
    e["from_bus"] = br.from_bus;
    e["to_bus"] = br.to_bus;
    e["r"] = br.r;
    e["x"] = br.x;
    e["b_chg"] = br.b_chg;
    e["tap"] = br.tap;
    e["shift"] = br.shift;
    e["in_service"] = br.in_service;
    j["branches"].push_back(std::move(e));
  }
  j["gens"] = nlohmann::ordered_json::array();
  for (const auto& g : net.gens) {
    nlohmann::ordered_json e;
    e["bus"] = g.bus;
    e["p_set"] = g.p_set;
    e["v_set"] = g.v_set;
    e["p_min"] = g.p_min;
    e["p_max"] = g.p_max;
    e["q_min"] = g.q_min;
    e["q_max"] = g.q_max;
    e["in_service"] = g.in_service;
    e["cost"] = g.cost;
    j["gens"].push_back(std::move(e));
  }
  return j;
}

NetworkCase network_from_json(const nlohmann::json& j) {
  NetworkCase net;
  net.base_mva = j.at("base_mva").get<double>();
  for (const auto& e : j.at("buses")) {
    BusRecord b;
    b.id = e.at("id").get<int>();
    const auto kind = e.at("kind").get<std::string>();
    if (kind == "PQ") b.kind = BusKind::kPQ;
    else if (kind == "PV") b.kind = BusKind::kPV;
    else if (kind == "REF") b.kind = BusKind::kRef;
    else throw Error(ErrorCode::kMalformedRow, "unknown bus kind " + kind);
    b.p_load = e.at("p_load").get<double>();
    b.q_load = e.at("q_load").get<double>();
    b.gs = e.at("gs").get<double>();
    b.bs = e.at("bs").get<double>();
    b.v_init = e.at("v_init").get<double>();
    b.theta_init = e.at("theta_init").get<double>();
    b.v_min = e.at("v_min").get<double>();
    b.v_max = e.at("v_max").get<double>();
    net.buses.push_back(b);
  }
  for (const auto& e : j.at("branches")) {
    BranchRecord br;
    br.from_bus = e.at("from_bus").get<int>();
    br.to_bus = e.at("to_bus").get<int>();
    br.r = e.at("r").get<double>();
    br.x = e.at("x").get<double>();
    br.b_chg = e.at("b_chg").get<double>();
    br.tap = e.at("tap").get<double>();
    br.shift = e.at("shift").get<double>();
    br.in_service = e.at("in_service").get<bool>();
    net.branches.push_back(br);
  }
  for (const auto& e : j.at("gens")) {
    GenRecord g;
    g.bus = e.at("bus").get<int>();
    g.p_set = e.at("p_set").get<double>();
    g.v_set = e.at("v_set").get<double>();
    g.p_min = e.at("p_min").get<double>();
    g.p_max = e.at("p_max").get<double>();
    g.q_min = e.at("q_min").get<double>();
    g.q_max = e.at("q_max").get<double>();
    g.in_service = e.at("in_service").get<bool>();
    g.cost = e.at("cost").get<std::array<double, 3>>();
    net.gens.push_back(g);
  }
  return net;
}

BranchAdmittance branch_admittance(const BranchRecord& br) {
  using C = std::complex<double>;
  const C ys = 1.0 / C(br.r, br.x);
  const C t = std::polar(br.tap, br.shift);
  const C ytt = ys + C(0.0, br.b_chg / 2.0);
  return {ytt / std::norm(t), -ys / std::conj(t), -ys / t, ytt};
}

AdmittanceMatrix build_ybus(const NetworkCase& net) {
  const auto index = bus_index_map(net);
  const auto n = static_cast<Eigen::Index>(net.buses.size());
  AdmittanceMatrix ybus{Eigen::MatrixXcd::Zero(n, n)};
  for (size_t k = 0; k < net.branches.size(); ++k) {
    const auto& br = net.branches[k];
    if (!br.in_service) continue;
    if (br.r == 0.0 && br.x == 0.0) {
      throw Error(ErrorCode::kZeroImpedanceBranch,
                  "branch " + std::to_string(k + 1) + " has r = x = 0");
    }
    const int f = index.at(br.from_bus);
    const int t = index.at(br.to_bus);
    const auto a = branch_admittance(br);
    ybus.y(f, f) += a.ff;
    ybus.y(f, t) += a.ft;
    ybus.y(t, f) += a.tf;
    ybus.y(t, t) += a.tt;
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    ybus.y(i, i) += std::complex<double>(net.buses[i].gs, net.buses[i].bs);
  }
  return ybus;
}

}  // namespace apf
