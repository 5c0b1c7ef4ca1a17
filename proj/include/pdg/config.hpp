#pragma once

#include "pdg/ocp.hpp"
#include "pdg/scp.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace pdg {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct ProblemConfig {
  VehicleParams vehicle;
  BoundarySet boundary;
  ScpConfig scp;
  std::string output_dir = "out";
  int report_samples_per_segment = 50;
  int cert_samples_per_segment = 1000;
  std::vector<std::string> warnings;

  ProblemParams Problem() const { return ProblemParams::Make(vehicle, boundary, scp.delta_licq); }
};

// Every accepted key. Angles and angular rates are in degrees.
const std::vector<std::string>& config_keys();

ProblemConfig parse_config(const std::string& text, const std::string& origin = "<string>");
ProblemConfig load_config(const std::string& path);
ProblemConfig config_from_json(const nlohmann::json& j);

// Inverse of config_from_json; the echo stored in reports.
nlohmann::json config_to_json(const ProblemConfig& c);

size_t edit_distance(const std::string& a, const std::string& b);

}  // namespace pdg
