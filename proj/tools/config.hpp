#pragma once

#include "fedmuon/federation.hpp"
#include "fedmuon/problems.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fedmuon::cli {

// Flat `key = value` configuration. Later sources override earlier ones.
using KeyValues = std::map<std::string, std::string>;

// Parses a config/manifest file body. Blank lines and lines starting with '#'
// are skipped. Throws Error(ConfigInvalid) naming the line on malformed input.
KeyValues parse_key_values(std::string_view text);

KeyValues load_key_values(const std::string& path);

// Every key `run` understands.
const std::vector<std::string>& run_keys();

// Keys written to manifests for information only; accepted and ignored on input.
const std::vector<std::string>& informational_keys();

enum class ScheduleMode { None, Corollary };

struct RunSettings {
  FederationConfig federation;
  ScheduleMode schedule = ScheduleMode::None;

  ProblemFamily family = ProblemFamily::QuadraticAlign;
  int m = 8;
  int n = 4;
  double delta = 0.0;
  std::uint64_t problem_seed = 0;
  double center_scale = 1.0;

  NoiseKind noise = NoiseKind::None;
  double sigma = 0.0;
  double p = 2.0;
  std::optional<double> dof;
  std::uint64_t calibration_seed = 0;

  std::string out_dir = ".";
};

// Resolves and validates. Throws Error(ConfigInvalid) whose message starts
// with the offending key.
RunSettings resolve_run_settings(const KeyValues& values);

ProblemInstance build_problem(const RunSettings& settings);
NoiseModel build_noise(const RunSettings& settings);

// Manifest body: every resolved key, plus version/runtime/noise scale.
std::string manifest_text(const RunSettings& settings, const NoiseModel& noise,
                          double runtime_seconds);

}  // namespace fedmuon::cli
