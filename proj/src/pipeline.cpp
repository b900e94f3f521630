#include "apf/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>

#include "apf/error.hpp"
#include "apf/io.hpp"
#include "apf/netmodel.hpp"
#include "apf/pade.hpp"
#include "apf/sensitivity.hpp"

namespace apf {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;
using nlohmann::json;
using nlohmann::ordered_json;

std::string fnv1a_hex(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorCode::kValidation, what);
}

}  // namespace

void RunConfig::validate() const {
  require(!case_path.empty(), "case path is required");
  require(seed.has_value(), "a seed is required");
  require(std::isfinite(range_lower) && std::isfinite(range_upper) && range_lower <= range_upper,
          "range needs finite lower <= upper");
  require(samples >= 1, "sample count must be at least 1");
  require(test_samples >= 1, "test sample count must be at least 1");
  for (const auto& f : fits) {
    require(f == "la" || f == "cla" || f == "ra" || f == "cra", "unknown fit kind '" + f + "'");
  }
  for (const auto& d : directions) {
    require(d == "over" || d == "under", "unknown direction '" + d + "'");
  }
  for (const auto& q : quantities) QuantityOfInterest::parse(q);
  importance_cfg.validate();
  require(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
  require(tol >= 0.0, "tol must be non-negative");
  require(max_iter >= 1, "max_iter must be at least 1");
  require(pf_tol > 0.0, "pf_tol must be positive");
  require(pf_max_iter >= 1, "pf_max_iter must be at least 1");
}

std::uint64_t RunConfig::effective_test_seed() const {
  if (test_seed) return *test_seed;
  return splitmix64(seed.value_or(0) ^ 0x7e57ULL);
}

ordered_json RunConfig::to_json() const {
  ordered_json j;
  j["case_path"] = case_path;
  j["range"] = {range_lower, range_upper};
  j["samples"] = samples;
  j["test_samples"] = test_samples;
  j["seed"] = seed ? json(*seed) : json(nullptr);
  j["test_seed"] = effective_test_seed();
  j["quantities"] = quantities;
  j["fits"] = fits;
  j["directions"] = directions;
  j["epsilon"] = epsilon;
  j["tol"] = tol;
  j["max_iter"] = max_iter;
  j["pf_tol"] = pf_tol;
  j["pf_max_iter"] = pf_max_iter;
  ordered_json s;
  s["importance"] = importance;
  s["subspace_fraction"] = importance_cfg.subspace_fraction;
  s["placement"] = std::string(to_string(importance_cfg.placement));
  s["k"] = importance_cfg.k;
  s["step_scale"] = importance_cfg.step_scale;
  s["bus"] = importance_bus;
  j["sampler"] = s;
  return j;
}

RunConfig RunConfig::from_json(const json& j) {
  try {
    RunConfig c;
    c.case_path = j.value("case_path", std::string{});
    if (j.contains("range")) {
      const auto& r = j.at("range");
      require(r.is_array() && r.size() == 2, "range must be [lower, upper]");
      c.range_lower = r[0].get<double>();
      c.range_upper = r[1].get<double>();
    }
    c.samples = j.value("samples", c.samples);
    c.test_samples = j.value("test_samples", c.test_samples);
    if (j.contains("seed") && !j["seed"].is_null()) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("test_seed") && !j["test_seed"].is_null()) {
      c.test_seed = j["test_seed"].get<std::uint64_t>();
    }
    c.quantities = j.value("quantities", c.quantities);
    c.fits = j.value("fits", c.fits);
    c.directions = j.value("directions", c.directions);
    c.epsilon = j.value("epsilon", c.epsilon);
    c.tol = j.value("tol", c.tol);
    c.max_iter = j.value("max_iter", c.max_iter);
    c.pf_tol = j.value("pf_tol", c.pf_tol);
    c.pf_max_iter = j.value("pf_max_iter", c.pf_max_iter);
    c.output_dir = j.value("output_dir", std::string{});
    if (j.contains("sampler")) {
      const auto& s = j["sampler"];
      c.importance = s.value("importance", c.importance);
      c.importance_cfg.subspace_fraction = s.value("subspace_fraction", c.importance_cfg.subspace_fraction);
      c.importance_cfg.placement =
          parse_placement(s.value("placement", std::string(to_string(c.importance_cfg.placement))));
      c.importance_cfg.k = s.value("k", c.importance_cfg.k);
      c.importance_cfg.step_scale = s.value("step_scale", c.importance_cfg.step_scale);
      c.importance_bus = s.value("bus", c.importance_bus);
    }
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kValidation, std::string("bad run config: ") + e.what());
  }
}

std::string RunConfig::hash() const { return fnv1a_hex(to_json().dump()); }

namespace {

std::string row_name(const ApproximationModel& m) {
  std::string name = m.label();
  if (m.direction != Direction::kNone) name += ":" + std::string(to_string(m.direction));
  return name;
}

}  // namespace

std::vector<ReportRow> report(const std::vector<ApproximationModel>& models, const SampleSet& test) {
  std::vector<ReportRow> rows;
  for (const auto& m : models) {
    ReportRow r;
    r.quantity = m.quantity.label();
    r.model = row_name(m);
    const ErrorStats st = prediction_errors(m, test.xs, test.beta(m.quantity));
    r.mean = st.mean;
    r.max = st.max;
    if (m.direction != Direction::kNone) r.violation_rate = violation_rate(m, test);
    rows.push_back(r);
  }
  for (auto& r : rows) {
    std::string base;
    if (r.model == "ra") base = "la";
    else if (r.model.rfind("cra:", 0) == 0) base = "cla:" + r.model.substr(4);
    if (base.empty()) continue;
    for (const auto& b : rows) {
      if (b.quantity == r.quantity && b.model == base && b.mean > 0.0) {
        r.pct_reduction = 100.0 * (b.mean - r.mean) / b.mean;
      }
    }
  }
  return rows;
}

std::string report_csv(const std::vector<ReportRow>& rows) {
  std::string out = "quantity,model,mean,max,pct_reduction,violation_rate\n";
  for (const auto& r : rows) {
    out += r.quantity + "," + r.model + "," + format_double(r.mean) + "," + format_double(r.max) + ",";
    if (r.pct_reduction) out += format_double(*r.pct_reduction);
    out += ",";
    if (r.violation_rate) out += format_double(*r.violation_rate);
    out += "\n";
  }
  return out;
}

RunResult run_pipeline(const RunConfig& config) {
  config.validate();
  RunResult res;
  namespace fs = std::filesystem;
  const bool write = !config.output_dir.empty();
  if (write) {
    std::error_code ec;
    fs::create_directories(config.output_dir, ec);
    if (ec) throw Error(ErrorCode::kIo, "cannot create " + config.output_dir);
  }
  auto out_path = [&](const std::string& name) { return (fs::path(config.output_dir) / name).string(); };
  auto stage = [&](const std::string& name, const std::function<void()>& body) {
    const auto t0 = std::chrono::steady_clock::now();
    try {
      body();
    } catch (const Error& e) {
      throw Error(e.code(), "stage " + name + ": " + e.detail());
    }
    const std::chrono::duration<double> dt = std::chrono::steady_clock::now() - t0;
    res.timings.emplace_back(name, dt.count());
  };

  const std::uint64_t train_seed = *config.seed;
  const std::uint64_t test_seed = config.effective_test_seed();
  NewtonOptions newton;
  newton.tol = config.pf_tol;
  newton.max_iter = config.pf_max_iter;

  std::optional<PowerSystem> sys;
  std::vector<QuantityOfInterest> quantities;
  stage("parse", [&] {
    sys.emplace(load_matpower(config.case_path));
    for (const auto& label : config.quantities) {
      const auto q = QuantityOfInterest::parse(label);
      validate_quantity(*sys, q);
      quantities.push_back(q);
    }
    if (quantities.empty()) {
      for (int pos : sys->layout().pq) {
        quantities.push_back(QuantityOfInterest::bus_voltage(sys->network().buses[static_cast<size_t>(pos)].id));
      }
    }
    if (quantities.empty()) throw Error(ErrorCode::kValidation, "case has no load buses to approximate");
  });

  const InjectionVector nominal = sys->nominal_injection();
  const VectorXd x0 = nominal.stacked();
  const OperatingRange range = OperatingRange::scalar(x0.size(), config.range_lower, config.range_upper);
  PowerFlowSolution base;
  stage("power_flow", [&] {
    base = solve_newton(*sys, nominal, sys->flat_start(), newton);
    if (!base.converged) throw Error(ErrorCode::kNumericalFailure, "nominal power flow did not converge");
  });

  MatrixXd vectors;
  int target_bus = config.importance_bus;
  std::vector<std::pair<QuantityOfInterest, PadeModel>> pades;
  if (config.importance) {
    std::optional<SensitivityBundle> bundle;
    stage("sensitivity", [&] {
      const auto& lay = sys->layout();
      if (target_bus == 0) {
        int worst = -1;
        for (int pos : lay.pq) {
          if (worst < 0 || base.v[pos] < base.v[worst]) worst = pos;
        }
        if (worst < 0) throw Error(ErrorCode::kValidation, "importance sampling needs a load bus");
        target_bus = sys->network().buses[static_cast<size_t>(worst)].id;
      }
      bundle = build_bundle(*sys, base.state);
      for (const auto& q : quantities) {
        if (q.kind != QuantityOfInterest::Kind::kBusVoltage) continue;
        const int pos = sys->bus_position(q.id);
        if (lay.v_coord(pos) < 0) continue;
        const auto so = second_order(*bundle, *sys, q.id);
        const VectorXd grad = bundle->first_order.row(so.coord).transpose();
        PadeModel p = pade11(base.v[pos], grad, so.lambda, x0);
        p.epsilon = config.epsilon;
        pades.emplace_back(q, p);
      }
    });
    stage("svd", [&] {
      vectors = top_singular_vectors(second_order(*bundle, *sys, target_bus).lambda,
                                     config.importance_cfg.k);
    });
  }

  stage("sampling", [&] {
    const MatrixXd xs = config.importance
                            ? draw_importance(x0, vectors, range, config.samples, config.importance_cfg, train_seed)
                            : draw_uniform(x0, range, config.samples, train_seed);
    res.training = evaluate_samples(*sys, xs, quantities, train_seed, newton);
    if (write) write_text_file(out_path("train.csv"), to_csv(res.training, *sys));
  });

  auto wants = [&](const std::string& f) {
    return std::find(config.fits.begin(), config.fits.end(), f) != config.fits.end();
  };
  stage("fit", [&] {
    for (const auto& q : quantities) {
      std::optional<VectorXd> w0;
      for (const auto& [pq, p] : pades) {
        if (pq == q) {
          res.models.push_back(to_approximation(p, q));
          w0 = pade_weights(p, res.training.xs);
        }
      }
      if (wants("la")) res.models.push_back(fit_la(res.training, q));
      if (wants("cla")) {
        for (const auto& d : config.directions) res.models.push_back(fit_cla(res.training, q, parse_direction(d)));
      }
      RationalFitOptions ro;
      ro.epsilon = config.epsilon;
      ro.tol = config.tol;
      ro.max_iter = config.max_iter;
      ro.w0 = w0;
      if (wants("ra")) res.models.push_back(fit_rational(res.training, q, ro));
      if (wants("cra")) {
        for (const auto& d : config.directions) {
          ro.direction = parse_direction(d);
          res.models.push_back(fit_rational(res.training, q, ro));
        }
      }
    }
    for (auto& m : res.models) {
      if (m.kind != ModelKind::kPade) m.range = range;
    }
    if (write) {
      ordered_json j;
      j["config_hash"] = config.hash();
      ordered_json arr = ordered_json::array();
      for (const auto& m : res.models) arr.push_back(to_json(m));
      j["models"] = arr;
      write_text_file(out_path("models.json"), j.dump(2) + "\n");
    }
  });

  stage("evaluate", [&] {
    const MatrixXd xs = draw_uniform(x0, range, config.test_samples, test_seed);
    res.test = evaluate_samples(*sys, xs, quantities, test_seed, newton);
    res.rows = report(res.models, res.test);
    if (write) {
      write_text_file(out_path("test.csv"), to_csv(res.test, *sys));
      write_text_file(out_path("errors.csv"), report_csv(res.rows));
    }
  });

  ordered_json core = config.to_json();
  ordered_json sampler = core["sampler"];
  core.erase("sampler");
  sampler["kind"] = config.importance ? "importance" : "uniform";
  if (config.importance) sampler["target_bus"] = target_bus;
  ordered_json& m = res.manifest;
  m["config"] = core;
  m["sampler"] = sampler;
  m["config_hash"] = config.hash();
  m["seeds"] = {{"train", train_seed}, {"test", test_seed}};
  m["training"] = {{"rows", res.training.size()}, {"skipped", res.training.skipped}};
  m["test"] = {{"rows", res.test.size()}, {"skipped", res.test.skipped}};
  m["outputs"] = {"train.csv", "test.csv", "models.json", "errors.csv"};
  if (write) {
    write_text_file(out_path("manifest.json"), m.dump(2) + "\n");
    std::string log;
    for (const auto& [name, secs] : res.timings) {
      char buf[96];
      std::snprintf(buf, sizeof buf, "%-12s %.6f s\n", name.c_str(), secs);
      log += buf;
    }
    write_text_file(out_path("timings.log"), log);
  }
  return res;
}

}  // namespace apf
