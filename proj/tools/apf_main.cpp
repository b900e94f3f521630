// apf: command-line front end for the approximation toolkit.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "apf/error.hpp"
#include "apf/io.hpp"
#include "apf/netmodel.hpp"
#include "apf/opf.hpp"
#include "apf/pfcore.hpp"
#include "apf/pipeline.hpp"
#include "apf/regress.hpp"
#include "apf/sampling.hpp"
#include "apf/sensitivity.hpp"

namespace {

using apf::Error;
using apf::ErrorCode;
using nlohmann::ordered_json;

constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
  } else {
    apf::write_text_file(out_path, text);
  }
}

std::vector<apf::QuantityOfInterest> parse_quantities(const apf::PowerSystem& sys,
                                                      const std::vector<std::string>& labels) {
  std::vector<apf::QuantityOfInterest> qs;
  for (const auto& l : labels) {
    qs.push_back(apf::QuantityOfInterest::parse(l));
    apf::validate_quantity(sys, qs.back());
  }
  if (qs.empty()) {
    for (int pos : sys.layout().pq) {
      qs.push_back(apf::QuantityOfInterest::bus_voltage(sys.network().buses[static_cast<size_t>(pos)].id));
    }
  }
  return qs;
}

struct SamplerFlags {
  double lower = 0.7;
  double upper = 1.3;
  bool importance = false;
  int bus = 0;
  std::string placement = "extreme";
  double fraction = 0.5;
  int k = 3;
  double step_scale = 1.0;

  void add(CLI::App* cmd) {
    cmd->add_option("--lower", lower, "Lower range factor on nominal injections")->capture_default_str();
    cmd->add_option("--upper", upper, "Upper range factor on nominal injections")->capture_default_str();
    cmd->add_flag("--importance", importance, "Bias samples along dominant curvature directions");
    cmd->add_option("--bus", bus, "Load bus whose voltage curvature guides sampling (0: lowest voltage)");
    cmd->add_option("--placement", placement, "extreme, central or mixed")->capture_default_str();
    cmd->add_option("--fraction", fraction, "Share of subspace samples")->capture_default_str();
    cmd->add_option("-k", k, "Number of dominant directions")->capture_default_str();
    cmd->add_option("--step-scale", step_scale, "Subspace step relative to the box")->capture_default_str();
  }

  apf::ImportanceConfig config() const {
    apf::ImportanceConfig c;
    c.subspace_fraction = fraction;
    c.placement = apf::parse_placement(placement);
    c.k = k;
    c.step_scale = step_scale;
    return c;
  }
};

int lowest_voltage_bus(const apf::PowerSystem& sys, const apf::PowerFlowSolution& sol) {
  int worst = -1;
  for (int pos : sys.layout().pq) {
    if (worst < 0 || sol.v[pos] < sol.v[worst]) worst = pos;
  }
  if (worst < 0) throw Error(ErrorCode::kValidation, "case has no load bus");
  return sys.network().buses[static_cast<size_t>(worst)].id;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive power flow approximations: linear, conservative and rational fits"};
  app.require_subcommand(1);

  // parse
  std::string case_path;
  std::string out_path;
  auto* parse = app.add_subcommand("parse", "Parse a MATPOWER case and print canonical JSON");
  parse->add_option("case", case_path, "Case file")->required();
  parse->add_option("-o,--out", out_path, "Output file (default stdout)");

  // pf
  double pf_tol = 1e-8;
  int pf_iter = 20;
  auto* pf = app.add_subcommand("pf", "Solve the AC power flow at nominal injections");
  pf->add_option("case", case_path, "Case file")->required();
  pf->add_option("--tol", pf_tol, "Mismatch tolerance, per unit")->capture_default_str();
  pf->add_option("--max-iter", pf_iter, "Newton iteration limit")->capture_default_str();
  pf->add_option("-o,--out", out_path, "Output file (default stdout)");

  // sens
  int sens_bus = 0;
  double threshold = 0.1;
  auto* sens = app.add_subcommand("sens", "Voltage curvature summary at the nominal point");
  sens->add_option("case", case_path, "Case file")->required();
  sens->add_option("--bus", sens_bus, "Load bus id")->required();
  sens->add_option("--threshold", threshold, "Dominance cut as a fraction of the largest singular value")
      ->capture_default_str();
  sens->add_option("-o,--out", out_path, "Output file (default stdout)");

  // sample
  std::optional<std::uint64_t> seed;
  long long count = 500;
  std::vector<std::string> quantity_labels;
  std::string manifest_path;
  SamplerFlags sflags;
  auto* sample = app.add_subcommand("sample", "Draw injection samples and solve them");
  sample->add_option("case", case_path, "Case file")->required();
  sample->add_option("--seed", seed, "RNG seed")->required();
  sample->add_option("-n,--count", count, "Number of samples")->capture_default_str();
  sample->add_option("-q,--quantity", quantity_labels, "Quantity label such as V:3, I:2, Q:1, P:slack");
  sflags.add(sample);
  sample->add_option("-o,--out", out_path, "CSV output (default stdout)");
  sample->add_option("--manifest", manifest_path, "JSON manifest output");

  // fit
  std::string samples_path;
  std::string quantity_label;
  std::string kind = "la";
  std::string direction = "under";
  double epsilon = 0.1;
  double tol = 1e-6;
  int max_iter = 15;
  auto* fit = app.add_subcommand("fit", "Fit an approximation to a sample CSV");
  fit->add_option("--samples", samples_path, "Sample CSV")->required();
  fit->add_option("-q,--quantity", quantity_label, "Quantity label")->required();
  fit->add_option("--kind", kind, "la, cla, ra or cra")->capture_default_str();
  fit->add_option("--direction", direction, "over or under, for cla and cra")->capture_default_str();
  fit->add_option("--epsilon", epsilon, "Denominator floor")->capture_default_str();
  fit->add_option("--tol", tol, "Reweighting tolerance")->capture_default_str();
  fit->add_option("--max-iter", max_iter, "Reweighting iteration limit")->capture_default_str();
  fit->add_option("-o,--out", out_path, "Model JSON output (default stdout)");

  // eval
  std::string model_path;
  auto* eval = app.add_subcommand("eval", "Evaluate a model on a sample CSV");
  eval->add_option("--model", model_path, "Model JSON")->required();
  eval->add_option("--samples", samples_path, "Sample CSV")->required();
  eval->add_option("-o,--out", out_path, "Output file (default stdout)");

  // opf
  std::vector<std::string> variants;
  int segments = 8;
  long long opf_samples = 300;
  std::uint64_t opf_seed = 1;
  bool grid = false;
  double grid_step = 0.001;
  std::string format = "json";
  auto* opf = app.add_subcommand("opf", "Solve the simplified OPF and re-evaluate in AC");
  opf->add_option("case", case_path, "Case file")->required();
  opf->add_option("--variant", variants, "dc, la, cla, ra or cra (repeatable; default all)");
  opf->add_option("--segments", segments, "Piecewise-linear cost segments")->capture_default_str();
  opf->add_option("--samples", opf_samples, "Training samples for the approximations")->capture_default_str();
  opf->add_option("--seed", opf_seed, "Training seed")->capture_default_str();
  opf->add_flag("--grid", grid, "Compare against a brute-force grid search");
  opf->add_option("--grid-step", grid_step, "Grid resolution, per unit")->capture_default_str();
  opf->add_option("--format", format, "json or csv")->capture_default_str();
  opf->add_option("-o,--out", out_path, "Output file (default stdout)");

  // run
  std::string config_path;
  std::string out_dir;
  long long run_samples = 500;
  long long test_samples = 500;
  std::vector<std::string> fits;
  auto* run = app.add_subcommand("run", "Run the full pipeline and write reports");
  run->add_option("case", case_path, "Case file (overrides the config)");
  run->add_option("--config", config_path, "RunConfig JSON");
  run->add_option("--seed", seed, "RNG seed")->required();
  run->add_option("-n,--samples", run_samples, "Training samples")->capture_default_str();
  run->add_option("--test-samples", test_samples, "Held-out samples")->capture_default_str();
  run->add_option("-q,--quantity", quantity_labels, "Quantity label (repeatable)");
  run->add_option("--fit", fits, "la, cla, ra, cra (repeatable; default all)");
  run->add_option("--epsilon", epsilon, "Denominator floor")->capture_default_str();
  sflags.add(run);
  run->add_option("-o,--out-dir", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (parse->parsed()) {
      emit(apf::to_json(apf::load_matpower(case_path)).dump(2) + "\n", out_path);
    } else if (pf->parsed()) {
      apf::PowerSystem sys(apf::load_matpower(case_path));
      apf::NewtonOptions opts;
      opts.tol = pf_tol;
      opts.max_iter = pf_iter;
      auto sol = apf::solve_newton(sys, sys.nominal_injection(), sys.flat_start(), opts);
      emit(apf::to_json(sol, sys).dump(2) + "\n", out_path);
      if (!sol.converged) return kExitNumerical;
    } else if (sens->parsed()) {
      apf::PowerSystem sys(apf::load_matpower(case_path));
      auto sol = apf::solve_newton(sys, sys.nominal_injection(), sys.flat_start());
      if (!sol.converged) throw Error(ErrorCode::kNumericalFailure, "power flow did not converge");
      const auto bundle = apf::build_bundle(sys, sol.state);
      const auto so = apf::second_order(bundle, sys, sens_bus);
      const auto summary = apf::dominant_subspace(so.lambda, threshold);
      emit(apf::to_json(summary, so.target).dump(2) + "\n", out_path);
    } else if (sample->parsed()) {
      apf::PowerSystem sys(apf::load_matpower(case_path));
      if (count < 1) throw Error(ErrorCode::kValidation, "count must be at least 1");
      const auto qs = parse_quantities(sys, quantity_labels);
      const auto x0 = sys.nominal_injection().stacked();
      const auto range = apf::OperatingRange::scalar(x0.size(), sflags.lower, sflags.upper);
      range.validate(x0.size());
      Eigen::MatrixXd xs;
      int target = sflags.bus;
      if (sflags.importance) {
        if (target == 0) {
          target = lowest_voltage_bus(sys, apf::solve_newton(sys, sys.nominal_injection(), sys.flat_start()));
        }
        const auto cfg = sflags.config();
        xs = apf::draw_importance(x0, apf::dominant_directions(sys, target, cfg.k), range, count, cfg, *seed);
      } else {
        xs = apf::draw_uniform(x0, range, count, *seed);
      }
      const auto set = apf::evaluate_samples(sys, xs, qs, *seed);
      emit(apf::to_csv(set, sys), out_path);
      if (!manifest_path.empty()) {
        ordered_json m;
        m["case_path"] = case_path;
        m["seed"] = *seed;
        m["count"] = count;
        m["range"] = {sflags.lower, sflags.upper};
        m["sampler"] = sflags.importance ? "importance" : "uniform";
        if (sflags.importance) {
          m["placement"] = sflags.placement;
          m["fraction"] = sflags.fraction;
          m["k"] = sflags.k;
          m["step_scale"] = sflags.step_scale;
          m["target_bus"] = target;
        }
        m["rows"] = set.size();
        m["skipped"] = set.skipped;
        apf::write_text_file(manifest_path, m.dump(2) + "\n");
      }
    } else if (fit->parsed()) {
      const auto set = apf::sample_set_from_csv(apf::read_text_file(samples_path));
      const auto q = apf::QuantityOfInterest::parse(quantity_label);
      apf::ApproximationModel model;
      if (kind == "la") {
        model = apf::fit_la(set, q);
      } else if (kind == "cla") {
        model = apf::fit_cla(set, q, apf::parse_direction(direction));
      } else if (kind == "ra" || kind == "cra") {
        apf::RationalFitOptions ro;
        ro.direction = kind == "ra" ? apf::Direction::kNone : apf::parse_direction(direction);
        ro.epsilon = epsilon;
        ro.tol = tol;
        ro.max_iter = max_iter;
        model = apf::fit_rational(set, q, ro);
      } else {
        throw Error(ErrorCode::kValidation, "unknown kind '" + kind + "'");
      }
      emit(apf::to_json(model).dump(2) + "\n", out_path);
    } else if (eval->parsed()) {
      const auto model = apf::model_from_json(nlohmann::json::parse(apf::read_text_file(model_path)));
      const auto set = apf::sample_set_from_csv(apf::read_text_file(samples_path));
      const auto st = apf::prediction_errors(model, set.xs, set.beta(model.quantity));
      ordered_json j;
      j["quantity"] = model.quantity.label();
      j["model"] = model.label();
      j["rows"] = set.size();
      j["mean_abs_err"] = st.mean;
      j["max_abs_err"] = st.max;
      if (model.direction != apf::Direction::kNone) j["violation_rate"] = apf::violation_rate(model, set);
      emit(j.dump(2) + "\n", out_path);
    } else if (opf->parsed()) {
      if (format != "json" && format != "csv") throw Error(ErrorCode::kValidation, "format must be json or csv");
      apf::PowerSystem sys(apf::load_matpower(case_path));
      if (variants.empty()) variants = {"dc", "la", "cla", "ra", "cra"};
      const auto inputs = apf::opf_inputs(sys);
      apf::OpfTrainingOptions topts;
      topts.samples = opf_samples;
      topts.seed = opf_seed;
      std::optional<apf::SampleSet> training;
      apf::OpfOptions oopts;
      oopts.cost_segments = segments;
      std::vector<apf::OpfSolution> sols;
      for (const auto& name : variants) {
        const auto v = apf::parse_opf_variant(name);
        std::optional<apf::ApproximationSet> set;
        if (v != apf::OpfVariant::kDC) {
          if (!training) training = apf::opf_training_set(sys, inputs, topts);
          set = apf::train_approximations(sys, v, *training, topts);
        }
        auto sol = apf::solve_opf(apf::build_opf(sys, v, set ? &*set : nullptr, oopts));
        if (sol.status == apf::LpStatus::kOptimal) sol.ac = apf::ac_evaluate(sys, inputs, sol.setpoints);
        sols.push_back(sol);
      }
      std::optional<double> best;
      if (grid) {
        const auto g = apf::grid_search(sys, inputs, grid_step);
        if (g.found) best = g.best_cost;
      } else {
        for (const auto& s : sols) {
          if (s.ac.converged && (!best || s.ac.ac_cost < *best)) best = s.ac.ac_cost;
        }
      }
      ordered_json rows = ordered_json::array();
      std::string csv = "variant,status,ac_cost,pct_vs_best,max_v_violation,q_violation,model_cost\n";
      for (const auto& s : sols) {
        ordered_json r;
        r["variant"] = std::string(apf::to_string(s.variant));
        r["status"] = apf::to_string(s.status);
        const bool ok = s.status == apf::LpStatus::kOptimal && s.ac.converged;
        r["ac_cost"] = ok ? ordered_json(s.ac.ac_cost) : ordered_json(nullptr);
        const bool pct = ok && best && *best != 0.0;
        r["pct_vs_best"] = pct ? ordered_json(100.0 * (s.ac.ac_cost - *best) / *best) : ordered_json(nullptr);
        r["max_v_violation"] = ok ? ordered_json(s.ac.max_v_violation) : ordered_json(nullptr);
        r["q_violation"] = ok ? ordered_json(s.ac.q_violation) : ordered_json(nullptr);
        r["model_cost"] = s.status == apf::LpStatus::kOptimal ? ordered_json(s.model_cost) : ordered_json(nullptr);
        rows.push_back(r);
        auto cell = [](const ordered_json& v) { return v.is_null() ? std::string() : apf::format_double(v.get<double>()); };
        csv += r["variant"].get<std::string>() + "," + r["status"].get<std::string>() + "," + cell(r["ac_cost"]) +
               "," + cell(r["pct_vs_best"]) + "," + cell(r["max_v_violation"]) + "," + cell(r["q_violation"]) +
               "," + cell(r["model_cost"]) + "\n";
      }
      if (format == "csv") {
        emit(csv, out_path);
      } else {
        ordered_json j;
        j["reference"] = grid ? "grid" : "best_variant";
        j["reference_cost"] = best ? ordered_json(*best) : ordered_json(nullptr);
        j["rows"] = rows;
        emit(j.dump(2) + "\n", out_path);
      }
    } else if (run->parsed()) {
      apf::RunConfig cfg;
      if (!config_path.empty()) {
        cfg = apf::RunConfig::from_json(nlohmann::json::parse(apf::read_text_file(config_path)));
      } else {
        cfg.samples = run_samples;
        cfg.test_samples = test_samples;
        cfg.range_lower = sflags.lower;
        cfg.range_upper = sflags.upper;
        cfg.quantities = quantity_labels;
        if (!fits.empty()) cfg.fits = fits;
        cfg.epsilon = epsilon;
        cfg.importance = sflags.importance;
        cfg.importance_cfg = sflags.config();
        cfg.importance_bus = sflags.bus;
      }
      if (!case_path.empty()) cfg.case_path = case_path;
      cfg.seed = seed;
      cfg.output_dir = out_dir;
      const auto res = apf::run_pipeline(cfg);
      std::cout << apf::report_csv(res.rows);
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return apf::is_validation_error(e.code()) ? kExitValidation : kExitNumerical;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: invalid JSON: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
  return 0;
}
