#pragma once

#include "pdg/types.hpp"

namespace pdg {

struct PhysState {
  double m = 0.0;
  Vec3 r = Vec3::Zero();
  Vec3 v = Vec3::Zero();
  Vec4 q = Vec4(1, 0, 0, 0);  // scalar first, inertial -> body
  Vec3 w = Vec3::Zero();

  VecX Pack() const;
  static PhysState Unpack(const VecX& x);
};

struct ControlPhys {
  double T = 0.0;
  double de = 0.0, pe = 0.0;  // engine gimbal deflection / azimuth
  double db = 0.0, pb = 0.0;  // boresight deflection / azimuth

  VecU Pack() const;
  static ControlPhys Unpack(const VecU& u);
};

// SI units, angles in radians. Defaults are the landing scenario.
struct VehicleParams {
  double isp = 330.0;
  double g0 = 9.806;
  double rho = 1.225;
  double s_a = 545.0;
  Vec3 c_a = Vec3(0.4068, 0.4068, 0.0522);
  Vec3 j_b = Vec3(60.0, 60.0, 1.5);  // inertia per unit mass
  Vec3 r_cm = Vec3(0.0, 0.0, -14.0);
  Vec3 r_cp = Vec3(0.0, 0.0, 3.0);
  double m_dry = 85000.0;
  double m_i = 100000.0;

  double omega_max = 90.0 * kDeg;
  double theta_max = 90.0 * kDeg;
  double gamma_max = 35.0 * kDeg;
  double delta_e_max = 10.0 * kDeg;
  double phi_e_max = 180.0 * kDeg;
  double delta_b_max = 20.0 * kDeg;
  double phi_b_max = 180.0 * kDeg;

  double h1_trig = 100.0;
  double h2_trig = 200.0;
  double v_trig = 35.0;
  double theta_trig = 60.0 * kDeg;
  double v_stc = 20.0;
  double omega_stc = 2.5 * kDeg;
  double theta_stc = 5.0 * kDeg;
  double gamma_stc = 5.0 * kDeg;
  double psi_stc = 5.0 * kDeg;
  double delta_stc = 1.0 * kDeg;
  double t1_min = 0.88e6, t1_max = 2.2e6;
  double t2_min = 2.64e6, t2_max = 6.6e6;

  Vec3 r_f = Vec3::Zero();  // line-of-sight target

  double alpha_mdot() const { return 1.0 / (isp * g0); }
  Vec3 gravity() const { return Vec3(0.0, 0.0, -g0); }
  void Validate() const;
};

// Smoothed norm used by glideslope and line-of-sight.
constexpr double kNormEps = 1e-6;
double smooth_norm(const Eigen::VectorXd& z, double eps = kNormEps);

Mat3 dcm_body_from_inertial(const Vec4& q);
// Derivative of the (unnormalized-input) DCM formula w.r.t. q_j.
Mat3 dcm_partial(const Vec4& q, int j);
Eigen::Matrix4d omega_matrix(const Vec3& xi);

Vec3 thrust_body(double T, double de, double pe);
Vec3 boresight_body(double db, double pb);
Vec3 aero_body(const Vec3& v, const Vec4& q, const VehicleParams& p);

VecX dynamics(const VecX& x, const VecU& u, const VehicleParams& p);
void dynamics_jacobians(const VecX& x, const VecU& u, const VehicleParams& p,
                        MatXX& A, MatXU& B);

namespace debug {
// Adds delta to A(row, col) in every dynamics_jacobians call until cleared.
void set_jacobian_fault(int row, int col, double delta);
void clear_jacobian_fault();
}  // namespace debug

// Raw constraint values; entries <= 0 are satisfied, triggers active when < 0.
struct ConstraintValues {
  Vec4 gx, gu, trig;
  Vec10 stc;
};

struct ConstraintJacobians {
  Eigen::Matrix<double, 4, kNx> gx_x;
  Eigen::Matrix<double, 4, kNu> gu_u;
  Eigen::Matrix<double, 4, kNx> trig_x;
  Eigen::Matrix<double, 10, kNx> stc_x;
  Eigen::Matrix<double, 10, kNu> stc_u;
};

ConstraintValues constraint_values(const VecX& x, const VecU& u, const VehicleParams& p);
ConstraintValues constraint_values(const VecX& x, const VecU& u, const VehicleParams& p,
                                   ConstraintJacobians& jac);

}  // namespace pdg
