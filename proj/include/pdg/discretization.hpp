#pragma once

#include "pdg/ocp.hpp"

#include <vector>

namespace pdg {

struct LinearizedSegment {
  MatXaXa A;
  MatXaUa B_minus, B_plus;
  VecXa w;
  VecXa x_end;
};

struct GridSpec {
  std::vector<double> tau;
  int substeps = 16;

  static GridSpec Uniform(int K, int substeps = 16);
  int K() const { return int(tau.size()); }
};

VecUa foh(double tau, double tau_k, double tau_k1, const VecUa& u_k, const VecUa& u_k1);

// Integrates the augmented dynamics and its variational equations over one
// segment with fixed-step RK4.
LinearizedSegment propagate_segment(const VecXa& x_k, const VecUa& u_k, const VecUa& u_k1,
                                    double tau_k, double tau_k1, int substeps,
                                    const ProblemParams& p);

// Nonlinear endpoint only.
VecXa propagate_state(const VecXa& x_k, const VecUa& u_k, const VecUa& u_k1, double tau_k,
                      double tau_k1, int substeps, const ProblemParams& p);

std::vector<LinearizedSegment> discretize_all(const Trajectory& z, const GridSpec& grid,
                                              const ProblemParams& p);

}  // namespace pdg
