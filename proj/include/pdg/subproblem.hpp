#pragma once

#include "pdg/discretization.hpp"
#include "pdg/qp.hpp"

namespace pdg {

// Decision vector: x_1..K (16 each), u_1..K (6 each), nu+ and nu- per segment.
struct SubproblemLayout {
  int K = 0;
  int x(int k) const { return k * kNxa; }
  int u(int k) const { return K * kNxa + k * kNua; }
  int nu_plus(int k) const { return K * (kNxa + kNua) + k * kNxa; }
  int nu_minus(int k) const { return K * (kNxa + kNua) + (K - 1 + k) * kNxa; }
  int n() const { return K * (kNxa + kNua) + 2 * (K - 1) * kNxa; }
};

struct SubproblemWeights {
  double w_eq = 500.0;
  double w_prox = 10.0;
  double eps_licq = 1e-4;
  double s_min = 0.5;
};

// Trapezoid weights on the grid; sum equals tau_K - tau_1.
std::vector<double> trapezoid_weights(const GridSpec& grid);

SparseQP assemble_subproblem(const Trajectory& z_ref, const std::vector<LinearizedSegment>& segs,
                             const SubproblemWeights& weights, const ProblemParams& p,
                             const ScalingMap& scaling, const GridSpec& grid);

Trajectory extract_trajectory(const VectorXd& sol, int K, const ScalingMap& scaling);
VectorXd pack_trajectory(const Trajectory& z, const ScalingMap& scaling);  // nu set to zero

}  // namespace pdg
