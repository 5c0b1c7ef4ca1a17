#pragma once

#include "pdg/subproblem.hpp"

#include <functional>
#include <string>
#include <vector>

namespace pdg {

struct ScpConfig {
  int K = 15;
  double w_eq_dyn = 500.0;
  double w_prox_init = 10.0;
  double beta1 = 0.1, beta2 = 0.7;
  double sigma1 = 3.0, sigma2 = 1.3, sigma3 = 0.5;
  double eps_licq = 1e-4;
  double s_min = 0.5;
  double delta_licq = 1e-3;
  double eps_opt = 1e-6, eps_feas = 1e-6;
  int max_iter = 100;
  int substeps = 16;
  double tf_guess = 21.0;
  double y_range = 0.01;  // accumulator channel scale
  double w_prox_max = 1e12;

  void Validate() const;
};

struct IterationRecord {
  int index = 0;
  double J_nl_before = 0.0, J_nl_after = 0.0, J_lin = 0.0;
  double ratio = 0.0;
  bool accepted = false;
  double w_prox = 0.0;
  double max_defect = 0.0;
  double max_y_growth = 0.0;
  double final_time = 0.0;
  int qp_iterations = 0;
  std::string qp_status;
};

enum class ScpStatus { Converged, MaxIter, SubproblemFailure };
const char* to_string(ScpStatus s);

struct ScpResult {
  ScpStatus status = ScpStatus::MaxIter;
  std::string message;
  Trajectory z;
  std::vector<LinearizedSegment> segments;
  std::vector<IterationRecord> history;
  ScalingMap scaling;
  GridSpec grid;
  int accepted = 0;
  double final_time() const { return z.x.back()[ix::t]; }
};

double time_cost(const Trajectory& z, const GridSpec& grid);
// Largest scaled shooting defect.
double max_defect(const Trajectory& z, const std::vector<LinearizedSegment>& segs, const ScalingMap& sc);
// Largest nonlinear accumulator growth over a segment.
double max_y_growth(const Trajectory& z, const std::vector<LinearizedSegment>& segs);

double nonlinear_cost(const Trajectory& z, const std::vector<LinearizedSegment>& segs,
                      const ScalingMap& sc, const GridSpec& grid, double w_eq);
double linearized_cost(const Trajectory& z, const Trajectory& z_ref,
                       const std::vector<LinearizedSegment>& segs_ref, double w_prox,
                       const ScalingMap& sc, const GridSpec& grid, double w_eq);

struct WeightUpdate {
  double w_prox = 0.0;
  bool accepted = false;
  double ratio = 0.0;
  bool degenerate = false;
  bool internal_error = false;  // predicted decrease negative beyond roundoff
};
WeightUpdate adaptive_weight(double w_prox, double J_nl_j, double J_nl_next, double J_lin_next,
                             const ScpConfig& cfg);

using IterationCallback = std::function<void(const IterationRecord&)>;

ScpResult solve(const ProblemParams& p, const ScpConfig& cfg, const IterationCallback& on_iter = {});
// Same loop from a caller-supplied starting trajectory.
ScpResult solve_from(const ProblemParams& p, const ScpConfig& cfg, const Trajectory& start,
                     const IterationCallback& on_iter = {});

}  // namespace pdg
