#pragma once

#include <string>

#include "relayopt/sim.hpp"

namespace relayopt {

/// Matrices serialize as nested arrays of [re, im] pairs.
std::string matrix_to_json(const CMat& m);
CMat matrix_from_json(const std::string& text);

/// Parse a SimConfig from JSON text. Unknown fields are rejected; "objective"
/// accepts a string or an array of design names.
SimConfig sim_config_from_json(const std::string& text);
SimConfig sim_config_from_file(const std::string& path);

/// Canonical serialization used for the config hash and the run sidecar.
std::string sim_config_to_json(const SimConfig& config);
std::string config_hash(const SimConfig& config);

std::string design_to_json(const TransceiverDesign& d);
std::string p1_solution_to_json(const P1Solution& sol);
std::string p2_solution_to_json(const P2Solution& sol);
std::string allocation_to_json(const PowerAllocation& a);

/// CSV emitters (fixed headers; byte-deterministic for fixed inputs).
std::string ber_curves_to_csv(const std::vector<BerCurve>& curves);
std::string power_rows_to_csv(const std::vector<PowerRow>& rows);

/// Writes the CSV plus a JSON sidecar (config, seed, git describe) next to
/// it at path + ".json".
void write_run_outputs(const std::string& csv, const SimConfig& config,
                       const std::string& path);

std::string git_describe_string();

}  // namespace relayopt
