#pragma once

#include <string>

#include "coupling/verify.hpp"
#include "json.hpp"

namespace coupling {

// Strict measure spec: {"atoms":[{"x":..,"mass":..}],
// "pieces":[{"left":..,"right":..,"mass":..}]}.  Both keys optional, unknown
// fields rejected; validation errors name the offending entry.
Measure measure_from_json(const nlohmann::json& j);
nlohmann::json measure_to_json(const Measure& m);

Measure load_measure(const std::string& path);
void save_json(const nlohmann::json& j, const std::string& path);

nlohmann::json report_to_json(const VerificationReport& r);
nlohmann::json order_report_to_json(const ConvexOrderReport& r);

// Lossless decimal for CSV output (17 significant digits).
std::string fmt17(double x);

}  // namespace coupling
