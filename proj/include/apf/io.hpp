#pragma once

#include <string>

#include <json.hpp>

#include "apf/pfcore.hpp"
#include "apf/regress.hpp"
#include "apf/sample_set.hpp"
#include "apf/sensitivity.hpp"

namespace apf {

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

// {kind, quantity, direction, a0, a1, b1, x0, epsilon, report}
nlohmann::ordered_json to_json(const ApproximationModel& m);
ApproximationModel model_from_json(const nlohmann::json& j);

nlohmann::ordered_json to_json(const PowerFlowSolution& sol, const PowerSystem& sys);

nlohmann::ordered_json to_json(const OperatingRange& r);

// Spectral summary of a voltage Hessian, as printed by the `sens` command.
nlohmann::ordered_json to_json(const SpectralSummary& s, const QuantityOfInterest& target);

// Header: one column per injection ("P<bus>", "Q<bus>"), then one per
// quantity label ("V:3", "P:slack", ...). Values use round-trip precision.
std::string to_csv(const SampleSet& s, const PowerSystem& sys);
// Generic column names "x0", "x1", ... for inputs that are not injections.
std::string to_csv(const SampleSet& s);
SampleSet sample_set_from_csv(const std::string& text);

// Shortest text that reads back to the same double.
std::string format_double(double v);

}  // namespace apf
