#pragma once

#include "pdg/discretization.hpp"

#include <array>
#include <functional>
#include <string>
#include <vector>

namespace pdg {

// Physical-time trajectory from adaptive integration with cubic Hermite
// interpolation between accepted steps.
class DenseTrajectory {
 public:
  double t0() const { return knot_t_.front(); }
  double tf() const { return knot_t_.back(); }
  int segments() const { return int(node_t_.size()) - 1; }
  double node_time(int k) const { return node_t_[k]; }

  VecX State(double t) const;
  VecU Control(double t) const;
  double Dilation(double t) const;  // s at physical time t
  double Tau(double t) const;
  size_t knot_count() const { return knot_t_.size(); }

 private:
  friend DenseTrajectory dense_propagate(const Trajectory&, const GridSpec&, const ProblemParams&, double, double);
  int SegmentOf(double t) const;

  std::vector<double> knot_t_;
  std::vector<VecX> knot_x_, knot_f_;
  std::vector<double> node_t_;
  Trajectory nodes_;
  GridSpec grid_;
};

DenseTrajectory dense_propagate(const Trajectory& z, const GridSpec& grid, const ProblemParams& p,
                                double rel_tol = 1e-10, double abs_tol = 1e-12);

struct TriggerCrossings {
  std::array<std::vector<double>, 4> trig;  // sign changes of each raw trigger
  std::vector<double> speed_tilt;           // sign changes of max(trig3, trig4)
};

// Scans a scalar function of time at n points per segment and bisects sign
// changes (negative vs nonnegative) down to tol_t.
std::vector<double> locate_sign_changes(const std::function<double(double)>& g,
                                        const std::vector<double>& breaks, int per_segment,
                                        double tol_t);

TriggerCrossings locate_trigger_crossings(const DenseTrajectory& traj, const ProblemParams& p,
                                          double tol_t = 1e-4, int per_segment = 1000);

struct ChannelReport {
  std::string name;
  double max_scaled = 0.0;  // accumulator-rate units
  double max_raw = 0.0;     // physical constraint excess
  double first_violation = -1.0;
};

struct ConsequentReport {
  std::string name;
  int group = 0;  // 0..3
  double max_scaled = 0.0;  // normalized consequent excess while triggered
  double max_raw = 0.0;
  int active_samples = 0;  // trigger active beyond delta
  int vacuous_samples = 0;
  double first_violation = -1.0;
};

struct CertReport {
  std::array<ChannelReport, 4> gx, gu, stc;
  std::array<ConsequentReport, 10> consequents;
  TriggerCrossings crossings;
  int samples = 0;
  double tol = 1e-4;
  double delta = 1e-3;
  double endpoint_error = 0.0;  // scaled, dense vs terminal node
  double quat_norm_drift = 0.0;
  double final_time = 0.0;

  bool ChannelsPass() const;
  bool ConsequentsPass() const;
  bool Passed() const { return ChannelsPass() && ConsequentsPass(); }
};

CertReport check_constraints(const DenseTrajectory& traj, const ProblemParams& p, int per_segment = 1000,
                             double tol = 1e-4);

// dense_propagate + check_constraints + crossings + endpoint comparison.
CertReport certify_solution(const Trajectory& z, const GridSpec& grid, const ProblemParams& p,
                            const ScalingMap& sc, int per_segment = 1000, double tol = 1e-4);

}  // namespace pdg
