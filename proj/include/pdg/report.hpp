#pragma once

#include "pdg/certify.hpp"
#include "pdg/config.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>

namespace pdg {

struct RunTiming {
  double solve_s = 0.0;
  double certify_s = 0.0;
};

nlohmann::json cert_to_json(const CertReport& r);
CertReport cert_from_json(const nlohmann::json& j);

// Channel-by-channel comparison of two certification blocks. Empty when they agree.
std::string cert_mismatch(const nlohmann::json& a, const nlohmann::json& b, double rel_tol = 1e-9,
                          double abs_tol = 1e-12);

// Dense rows: t, m, r, v, q, omega[deg/s], T, delta_e, phi_e, delta_b, phi_b [deg], s, y.
const std::vector<std::string>& dense_columns();
std::vector<std::vector<double>> dense_rows(const DenseTrajectory& traj, const ProblemParams& p,
                                            int per_segment);

nlohmann::json make_report(const ProblemConfig& cfg, const ScpResult& res, const CertReport* cert,
                           const DenseTrajectory* traj, const RunTiming& timing,
                           const std::string& failure_reason);

// report.json, trajectory.csv and series/*.csv under dir.
void write_outputs(const std::string& dir, const nlohmann::json& report,
                   const std::vector<std::vector<double>>& rows, const ProblemParams& p);

struct StoredSolution {
  ProblemConfig config;
  Trajectory z;
  GridSpec grid;
  ScalingMap scaling;
  std::optional<nlohmann::json> certification;
};

nlohmann::json read_json_file(const std::string& path);
StoredSolution stored_solution(const nlohmann::json& report);

// Column-keyed numeric CSV with a header row.
std::vector<std::vector<double>> read_csv(const std::string& path, std::vector<std::string>* header = nullptr);

}  // namespace pdg
