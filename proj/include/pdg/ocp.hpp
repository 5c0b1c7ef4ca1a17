#pragma once

#include "pdg/vehicle.hpp"

#include <vector>

namespace pdg {

struct BoundarySet {
  double m_i = 100000.0;
  double m_dry = 85000.0;  // final-mass floor
  Vec3 r_i = Vec3(200.0, 200.0, 500.0), r_f = Vec3::Zero();
  Vec3 v_i = Vec3(0.0, 0.0, -50.0), v_f = Vec3(0.0, 0.0, -5.0);
  Vec4 q_i = Vec4(1.0, 1.0, 0.0, 0.0).normalized(), q_f = Vec4(1.0, 0.0, 0.0, 0.0);
  Vec3 w_i = Vec3::Zero(), w_f = Vec3::Zero();

  VecX Initial() const;
  VecX Final() const;  // mass entry is the floor
  void Validate() const;
};

// Reference magnitudes that turn raw constraint values into dimensionless ones.
struct ConstraintRefs {
  Vec4 gx, gu, trig;
  Vec10 stc;
};

ConstraintRefs make_constraint_refs(const VehicleParams& v, const BoundarySet& b);

struct ProblemParams {
  VehicleParams vehicle;
  BoundarySet boundary;
  ConstraintRefs refs;
  double delta_licq = 1e-3;  // trigger shift in normalized units

  static ProblemParams Make(const VehicleParams& v, const BoundarySet& b, double delta_licq);
};

// Dimensionless constraint values (triggers unshifted).
ConstraintValues normalized_constraints(const VecX& x, const VecU& u, const ProblemParams& p);

// Per-channel contributions to the accumulator rate: q(gx), q(gu), h_stc.
struct PenaltyTerms {
  Vec4 gx, gu, stc;
  double Total() const { return gx.sum() + gu.sum() + stc.sum(); }
};
PenaltyTerms penalty_terms(const VecX& x, const VecU& u, const ProblemParams& p);

VecXa augmented_rhs(const VecXa& xa, const VecUa& ua, const ProblemParams& p);
void augmented_jacobians(const VecXa& xa, const VecUa& ua, const ProblemParams& p, MatXaXa& A,
                         MatXaUa& B);

struct Trajectory {
  std::vector<VecXa> x;
  std::vector<VecUa> u;
  int K() const { return int(x.size()); }
};

Trajectory initial_guess(const ProblemParams& p, int K, double tf_guess = 21.0);

struct ScalingMap {
  VecXa x_scale, x_offset;
  VecUa u_scale, u_offset;

  VecXa ScaleX(const VecXa& x) const { return (x - x_offset).cwiseQuotient(x_scale); }
  VecXa UnscaleX(const VecXa& xs) const { return x_scale.cwiseProduct(xs) + x_offset; }
  VecUa ScaleU(const VecUa& u) const { return (u - u_offset).cwiseQuotient(u_scale); }
  VecUa UnscaleU(const VecUa& us) const { return u_scale.cwiseProduct(us) + u_offset; }
};

// Per-channel [min, max] -> [0, 1] from boundary values, limits and the
// guess. y_range sets the accumulator channel.
ScalingMap make_scaling(const ProblemParams& p, const Trajectory& guess, double y_range);

}  // namespace pdg
