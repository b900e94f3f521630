#include "apf/io.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "apf/error.hpp"

namespace apf {

using Eigen::Index;
using Eigen::VectorXd;
using nlohmann::json;
using nlohmann::ordered_json;

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write " + path);
  out << text;
  if (!out) throw Error(ErrorCode::kIo, "write failed for " + path);
}

std::string format_double(double v) {
  char buf[32];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  return buf;
}

namespace {

ordered_json vec_json(const VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

VectorXd vec_from(const json& a) {
  if (!a.is_array()) throw Error(ErrorCode::kValidation, "expected a numeric array");
  VectorXd v(static_cast<Index>(a.size()));
  for (size_t i = 0; i < a.size(); ++i) v[static_cast<Index>(i)] = a[i].get<double>();
  return v;
}

}  // namespace

ordered_json to_json(const ApproximationModel& m) {
  ordered_json j;
  j["kind"] = std::string(to_string(m.kind));
  j["label"] = m.label();
  j["quantity"] = m.quantity.label();
  j["direction"] = std::string(to_string(m.direction));
  j["a0"] = m.a0;
  j["a1"] = vec_json(m.a1);
  j["b1"] = vec_json(m.b1);
  j["x0"] = vec_json(m.x0);
  j["epsilon"] = m.epsilon;
  if (m.range.lower.size() > 0) j["range"] = to_json(m.range);
  ordered_json r;
  r["mean_abs_err"] = m.report.mean_abs_err;
  r["max_abs_err"] = m.report.max_abs_err;
  r["iterations"] = m.report.iterations;
  r["w_delta_history"] = m.report.w_delta_history;
  r["converged"] = m.report.converged;
  r["degenerate"] = m.report.degenerate;
  r["rank"] = m.report.rank;
  j["report"] = r;
  return j;
}

ApproximationModel model_from_json(const json& j) {
  try {
    ApproximationModel m;
    m.kind = parse_model_kind(j.at("kind").get<std::string>());
    m.quantity = QuantityOfInterest::parse(j.at("quantity").get<std::string>());
    m.direction = parse_direction(j.at("direction").get<std::string>());
    m.a0 = j.at("a0").get<double>();
    m.a1 = vec_from(j.at("a1"));
    m.b1 = vec_from(j.at("b1"));
    m.x0 = vec_from(j.at("x0"));
    m.epsilon = j.value("epsilon", 0.1);
    if (m.a1.size() != m.x0.size() || (m.b1.size() != 0 && m.b1.size() != m.x0.size())) {
      throw Error(ErrorCode::kDimensionMismatch, "model coefficient sizes differ");
    }
    if (j.contains("range")) {
      m.range.lower = vec_from(j["range"].at("lower"));
      m.range.upper = vec_from(j["range"].at("upper"));
    }
    if (j.contains("report")) {
      const auto& r = j["report"];
      m.report.mean_abs_err = r.value("mean_abs_err", 0.0);
      m.report.max_abs_err = r.value("max_abs_err", 0.0);
      m.report.iterations = r.value("iterations", 0);
      m.report.w_delta_history = r.value("w_delta_history", std::vector<double>{});
      m.report.converged = r.value("converged", true);
      m.report.degenerate = r.value("degenerate", false);
      m.report.rank = r.value("rank", 0);
    }
    return m;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kValidation, std::string("bad model JSON: ") + e.what());
  }
}

ordered_json to_json(const PowerFlowSolution& sol, const PowerSystem& sys) {
  const auto& net = sys.network();
  ordered_json j;
  j["converged"] = sol.converged;
  j["iterations"] = sol.iterations;
  j["residual_inf"] = sol.residual_inf;
  ordered_json buses = ordered_json::array();
  for (size_t i = 0; i < net.buses.size(); ++i) {
    const auto k = static_cast<Index>(i);
    ordered_json b;
    b["id"] = net.buses[i].id;
    b["kind"] = std::string(to_string(net.buses[i].kind));
    b["v"] = sol.v.size() > k ? sol.v[k] : 0.0;
    b["theta"] = sol.theta.size() > k ? sol.theta[k] : 0.0;
    b["p_inj"] = sol.s_inj.size() > k ? sol.s_inj[k].real() : 0.0;
    b["q_inj"] = sol.s_inj.size() > k ? sol.s_inj[k].imag() : 0.0;
    buses.push_back(b);
  }
  j["buses"] = buses;
  ordered_json branches = ordered_json::array();
  for (size_t l = 0; l < net.branches.size(); ++l) {
    ordered_json b;
    b["index"] = l + 1;
    b["from"] = net.branches[l].from_bus;
    b["to"] = net.branches[l].to_bus;
    b["i_from"] = sol.branch_i.size() > static_cast<Index>(l) ? sol.branch_i[static_cast<Index>(l)] : 0.0;
    branches.push_back(b);
  }
  j["branches"] = branches;
  return j;
}

ordered_json to_json(const OperatingRange& r) {
  ordered_json j;
  j["lower"] = vec_json(r.lower);
  j["upper"] = vec_json(r.upper);
  return j;
}

ordered_json to_json(const SpectralSummary& s, const QuantityOfInterest& target) {
  ordered_json j;
  j["target"] = target.label();
  j["eigen_min"] = s.eigen_min;
  j["eigen_max"] = s.eigen_max;
  j["curvature"] = std::string(to_string(s.curvature));
  j["singular_values"] = vec_json(s.singular_values);
  ordered_json vecs = ordered_json::array();
  for (Index c = 0; c < s.dominant_vectors.cols(); ++c) vecs.push_back(vec_json(s.dominant_vectors.col(c)));
  j["dominant_vectors"] = vecs;
  return j;
}

namespace {

std::string csv_body(const SampleSet& s, const std::vector<std::string>& input_names) {
  std::string out;
  for (size_t i = 0; i < input_names.size(); ++i) {
    if (i) out += ',';
    out += input_names[i];
  }
  for (const auto& q : s.quantities) {
    if (!out.empty()) out += ',';
    out += q.label();
  }
  out += '\n';
  for (Index m = 0; m < s.xs.rows(); ++m) {
    std::string line;
    for (Index i = 0; i < s.xs.cols(); ++i) {
      if (i) line += ',';
      line += format_double(s.xs(m, i));
    }
    for (Index q = 0; q < s.betas.cols(); ++q) {
      if (!line.empty()) line += ',';
      line += format_double(s.betas(m, q));
    }
    out += line;
    out += '\n';
  }
  return out;
}

}  // namespace

std::string to_csv(const SampleSet& s, const PowerSystem& sys) {
  const auto& lay = sys.layout();
  const auto& net = sys.network();
  if (s.xs.cols() != lay.dim()) throw Error(ErrorCode::kDimensionMismatch, "sample width");
  std::vector<std::string> names;
  for (int pos : lay.pvpq) names.push_back("P" + std::to_string(net.buses[static_cast<size_t>(pos)].id));
  for (int pos : lay.pq) names.push_back("Q" + std::to_string(net.buses[static_cast<size_t>(pos)].id));
  return csv_body(s, names);
}

std::string to_csv(const SampleSet& s) {
  std::vector<std::string> names;
  for (Index i = 0; i < s.xs.cols(); ++i) names.push_back("x" + std::to_string(i));
  return csv_body(s, names);
}

SampleSet sample_set_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw Error(ErrorCode::kValidation, "empty sample file");
  auto split = [](const std::string& l) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(l);
    while (std::getline(ls, cell, ',')) {
      while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
      cells.push_back(cell);
    }
    return cells;
  };
  const auto header = split(line);
  Index n_inputs = 0;
  SampleSet s;
  for (const auto& h : header) {
    if (h.find(':') == std::string::npos) {
      if (!s.quantities.empty()) throw Error(ErrorCode::kValidation, "input column after quantities");
      ++n_inputs;
    } else {
      s.quantities.push_back(QuantityOfInterest::parse(h));
    }
  }
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw Error(ErrorCode::kValidation, "sample row " + std::to_string(rows.size() + 1) +
                                              " has " + std::to_string(cells.size()) + " cells");
    }
    std::vector<double> row;
    for (const auto& c : cells) {
      char* end = nullptr;
      const double v = std::strtod(c.c_str(), &end);
      if (end == c.c_str() || *end != '\0') throw Error(ErrorCode::kValidation, "bad number '" + c + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  const auto m = static_cast<Index>(rows.size());
  const auto nq = static_cast<Index>(s.quantities.size());
  s.xs.resize(m, n_inputs);
  s.betas.resize(m, nq);
  for (Index r = 0; r < m; ++r) {
    for (Index i = 0; i < n_inputs; ++i) s.xs(r, i) = rows[static_cast<size_t>(r)][static_cast<size_t>(i)];
    for (Index q = 0; q < nq; ++q) s.betas(r, q) = rows[static_cast<size_t>(r)][static_cast<size_t>(n_inputs + q)];
  }
  return s;
}

}  // namespace apf
