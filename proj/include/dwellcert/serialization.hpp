#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "dwellcert/certify.hpp"
#include "dwellcert/simulate.hpp"
#include "dwellcert/synthesis.hpp"
#include "dwellcert/systems.hpp"

namespace dwellcert {

// insertion-ordered documents keep serialization byte-stable across round trips
using Json = nlohmann::ordered_json;

/// Config or document parse failure with a field-addressed message.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const Json& j, const std::string& where);

Json grid_fn_to_json(const GridFn& f);
GridFn grid_fn_from_json(const Json& j, const std::string& where);

Json dwell_to_json(const DwellTimeSpec& spec);
DwellTimeSpec dwell_from_json(const Json& j, const std::string& where);

Json certificate_to_json(const Certificate& cert);
Certificate certificate_from_json(const Json& j);

Json design_to_json(const ObserverDesign& d);
ObserverDesign design_from_json(const Json& j);

Json switched_design_to_json(const SwitchedObserverDesign& d);
SwitchedObserverDesign switched_design_from_json(const Json& j);

/// Canonical rendering used for every document this toolkit writes:
/// two-space indentation plus a trailing newline.
std::string canonical(const Json& j);

/// Continuous/discrete input description for simulation runs.
struct InputConfig {
  std::string type = "sin";  // sin | zero | uniform (discrete)
  double lo = -1.0;
  double hi = 1.0;
};

struct SimConfig {
  double horizon = 10.0;
  double dt = 1e-3;
  std::uint64_t seed = 1;
  InputConfig w_c;  // sin | zero
  InputConfig w_d;  // uniform | zero
  Vector x0, x0_lo, x0_hi;  // empty: zeros / plant-dependent defaults
};

/// Parsed problem description: the system block, dwell spec, weights, grid
/// controls, optional fixed observer gains, and the simulation block.
struct ProblemConfig {
  std::string mode;                  // impulsive | switched
  std::string task;                  // optional: check|analyze|synthesize|simulate
  std::optional<ImpulsiveSystemd> impulsive;
  std::optional<SwitchedSystemd> switched;
  DwellTimeSpec dwell = DwellTimeSpec::minimum(1.0);
  Matrix M_c, M_d, M;                // identity when omitted
  Index grid_n = 100;
  int dense_factor = 8;
  std::optional<GridFn> gain_L_c;    // fixed continuous gain (impulsive mode)
  std::optional<Matrix> gain_L_d;
  SimConfig sim;
};

/// Parses and validates a config document; unknown keys are rejected and all
/// messages carry the offending field path.
ProblemConfig parse_config(const std::string& text);
Json config_to_json(const ProblemConfig& cfg);

/// Delimiter-separated trajectory export: header row naming the columns, one
/// row per sample, impulse instants flagged with paired left/right rows
/// (impulse column: 0 plain, 1 left limit, 2 right limit).
std::string interval_run_csv(const IntervalRun& run);
std::string switched_run_csv(const SwitchedIntervalRun& run);

}  // namespace dwellcert
