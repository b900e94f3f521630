#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "apf/regress.hpp"
#include "apf/sample_set.hpp"
#include "apf/sampling.hpp"

namespace apf {

struct RunConfig {
  std::string case_path;
  double range_lower = 0.7;
  double range_upper = 1.3;
  Eigen::Index samples = 500;
  Eigen::Index test_samples = 500;
  std::optional<std::uint64_t> seed;       // required
  std::optional<std::uint64_t> test_seed;  // derived from seed when absent
  std::vector<std::string> quantities;     // labels; empty selects every load-bus voltage
  std::vector<std::string> fits{"la", "cla", "ra", "cra"};
  std::vector<std::string> directions{"over", "under"};
  bool importance = false;
  ImportanceConfig importance_cfg;
  int importance_bus = 0;  // 0: the load bus with the lowest nominal voltage
  double epsilon = 0.1;
  double tol = 1e-6;
  int max_iter = 15;
  double pf_tol = 1e-8;
  int pf_max_iter = 20;
  std::string output_dir;

  // Raises kValidation on the first bad field.
  void validate() const;
  std::uint64_t effective_test_seed() const;

  nlohmann::ordered_json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  // FNV-1a of the canonical JSON, as 16 hex digits.
  std::string hash() const;
};

struct ReportRow {
  std::string quantity;
  std::string model;  // la, cla:over, ra, cra:under, pade, ...
  double mean = 0.0;
  double max = 0.0;
  std::optional<double> pct_reduction;  // against LA, or CLA in the same direction
  std::optional<double> violation_rate;
};

// Error table on a held-out set. RA rows are compared with LA, CRA rows with
// the CLA of the same direction.
std::vector<ReportRow> report(const std::vector<ApproximationModel>& models, const SampleSet& test);
std::string report_csv(const std::vector<ReportRow>& rows);

struct RunResult {
  std::vector<ApproximationModel> models;
  std::vector<ReportRow> rows;
  SampleSet training;
  SampleSet test;
  nlohmann::ordered_json manifest;
  std::vector<std::pair<std::string, double>> timings;  // seconds per stage
};

// parse -> nominal power flow -> sensitivity and SVD (only when importance
// sampling is on) -> sampling -> fits -> held-out evaluation. Writes
// train.csv, test.csv, models.json, errors.csv and manifest.json into
// output_dir when it is set, plus a timings.log that is not part of the
// reproducible output.
RunResult run_pipeline(const RunConfig& config);

std::string fnv1a_hex(const std::string& text);

}  // namespace apf
