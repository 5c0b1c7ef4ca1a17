#include "pdg/vehicle.hpp"

#include <cmath>

namespace pdg {

namespace {

Mat3 skew(const Vec3& a) {
  Mat3 s;
  s << 0, -a.z(), a.y(), a.z(), 0, -a.x(), -a.y(), a.x(), 0;
  return s;
}

double sgn(double a) { return a > 0.0 ? 1.0 : (a < 0.0 ? -1.0 : 0.0); }

// d(q / |q|) / dq
Eigen::Matrix4d normalization_jacobian(const Vec4& q) {
  const double n = q.norm();
  const Vec4 qh = q / n;
  return (Eigen::Matrix4d::Identity() - qh * qh.transpose()) / n;
}

Vec4 unit_quat(const Vec4& q) {
  const double n = q.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw std::domain_error("quaternion has zero or non-finite norm");
  return q / n;
}

// Derivative of Omega(w) q with respect to w.
Eigen::Matrix<double, 4, 3> omega_q_partial(const Vec4& q) {
  Eigen::Matrix<double, 4, 3> m;
  m << -q[1], -q[2], -q[3],
        q[0], -q[3],  q[2],
        q[3],  q[0], -q[1],
       -q[2],  q[1],  q[0];
  return m;
}

}  // namespace

VecX PhysState::Pack() const {
  VecX x;
  x << m, r, v, q, w;
  return x;
}

PhysState PhysState::Unpack(const VecX& x) {
  PhysState s;
  s.m = x[0];
  s.r = x.segment<3>(1);
  s.v = x.segment<3>(4);
  s.q = x.segment<4>(7);
  s.w = x.segment<3>(11);
  return s;
}

VecU ControlPhys::Pack() const {
  VecU u;
  u << T, de, pe, db, pb;
  return u;
}

ControlPhys ControlPhys::Unpack(const VecU& u) { return {u[0], u[1], u[2], u[3], u[4]}; }

void VehicleParams::Validate() const {
  auto need = [](bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
  };
  need(isp > 0 && g0 > 0 && rho >= 0 && s_a > 0, "vehicle: isp, g0, s_a must be positive");
  need((c_a.array() >= 0).all() && (j_b.array() > 0).all(), "vehicle: c_a >= 0 and j_b > 0 required");
  need(m_dry > 0 && m_i > m_dry, "vehicle: need 0 < m_dry < m_i");
  need(t1_min < t1_max && t2_min < t2_max, "vehicle: thrust band min must be below max");
  need(omega_max > 0 && delta_e_max > 0 && delta_b_max > 0 && phi_e_max > 0 && phi_b_max > 0,
       "vehicle: angle limits must be positive");
}

double smooth_norm(const Eigen::VectorXd& z, double eps) {
  return std::sqrt(z.squaredNorm() + eps * eps) - eps;
}

Mat3 dcm_body_from_inertial(const Vec4& qin) {
  const Vec4 q = unit_quat(qin);
  const double q1 = q[0], q2 = q[1], q3 = q[2], q4 = q[3];
  Mat3 C;
  C << 1 - 2 * (q3 * q3 + q4 * q4), 2 * (q2 * q3 + q1 * q4), 2 * (q2 * q4 - q1 * q3),
       2 * (q2 * q3 - q1 * q4), 1 - 2 * (q2 * q2 + q4 * q4), 2 * (q3 * q4 + q1 * q2),
       2 * (q2 * q4 + q1 * q3), 2 * (q3 * q4 - q1 * q2), 1 - 2 * (q2 * q2 + q3 * q3);
  return C;
}

Mat3 dcm_partial(const Vec4& q, int j) {
  const double q1 = q[0], q2 = q[1], q3 = q[2], q4 = q[3];
  Mat3 d;
  switch (j) {
    case 0: d << 0, q4, -q3, -q4, 0, q2, q3, -q2, 0; break;
    case 1: d << 0, q3, q4, q3, -2 * q2, q1, q4, -q1, -2 * q2; break;
    case 2: d << -2 * q3, q2, -q1, q2, 0, q4, q1, q4, -2 * q3; break;
    default: d << -2 * q4, q1, q2, -q1, -2 * q4, q3, q2, q3, 0; break;
  }
  return 2.0 * d;
}

Eigen::Matrix4d omega_matrix(const Vec3& xi) {
  Eigen::Matrix4d m;
  m << 0, -xi[0], -xi[1], -xi[2],
       xi[0], 0, xi[2], -xi[1],
       xi[1], -xi[2], 0, xi[0],
       xi[2], xi[1], -xi[0], 0;
  return m;
}

Vec3 thrust_body(double T, double de, double pe) {
  return T * Vec3(std::sin(de) * std::cos(pe), std::sin(de) * std::sin(pe), std::cos(de));
}

Vec3 boresight_body(double db, double pb) {
  return Vec3(std::sin(db) * std::cos(pb), std::sin(db) * std::sin(pb), std::cos(db));
}

Vec3 aero_body(const Vec3& v, const Vec4& q, const VehicleParams& p) {
  const Mat3 C = dcm_body_from_inertial(q);
  return -0.5 * p.rho * v.norm() * p.s_a * p.c_a.cwiseProduct(C * v);
}

VecX dynamics(const VecX& x, const VecU& u, const VehicleParams& p) {
  if (!x.allFinite() || !u.allFinite()) throw PropagationError("dynamics: non-finite state or control");
  const double m = x[0];
  const Vec3 v = x.segment<3>(4);
  const Vec4 q = x.segment<4>(7);
  const Vec3 w = x.segment<3>(11);
  const Mat3 C = dcm_body_from_inertial(q);
  const Vec3 TB = thrust_body(u[0], u[1], u[2]);
  const Vec3 AB = -0.5 * p.rho * v.norm() * p.s_a * p.c_a.cwiseProduct(C * v);

  VecX f;
  f[0] = -p.alpha_mdot() * u[0];
  f.segment<3>(1) = v;
  f.segment<3>(4) = C.transpose() * (TB + AB) / m + p.gravity();
  f.segment<4>(7) = 0.5 * omega_matrix(w) * q;
  const Vec3 moment = p.r_cm.cross(TB) + p.r_cp.cross(AB);
  f.segment<3>(11) = (moment / m - w.cross(p.j_b.cwiseProduct(w))).cwiseQuotient(p.j_b);
  return f;
}

namespace {
// Fault injection for the self-test; never set in normal runs.
struct JacobianFault {
  bool active = false;
  int row = 0, col = 0;
  double delta = 0.0;
} g_fault;
}  // namespace

void dynamics_jacobians(const VecX& x, const VecU& u, const VehicleParams& p, MatXX& A,
                        MatXU& B) {
  const double m = x[0];
  const Vec3 v = x.segment<3>(4);
  const Vec4 q = x.segment<4>(7);
  const Vec3 w = x.segment<3>(11);
  const Vec4 qh = unit_quat(q);
  const Mat3 C = dcm_body_from_inertial(q);
  const Eigen::Matrix4d N = normalization_jacobian(q);

  const double T = u[0], de = u[1], pe = u[2];
  const Vec3 TB = thrust_body(T, de, pe);
  Mat3 dTB;  // columns: T, de, pe
  dTB.col(0) = Vec3(std::sin(de) * std::cos(pe), std::sin(de) * std::sin(pe), std::cos(de));
  dTB.col(1) = T * Vec3(std::cos(de) * std::cos(pe), std::cos(de) * std::sin(pe), -std::sin(de));
  dTB.col(2) = T * Vec3(-std::sin(de) * std::sin(pe), std::sin(de) * std::cos(pe), 0.0);

  const double sp = v.norm();
  const double k = -0.5 * p.rho * p.s_a;
  const Vec3 Cv = C * v;
  const Vec3 AB = k * sp * p.c_a.cwiseProduct(Cv);
  const Vec3 F = TB + AB;

  Mat3 dAB_dv = sp * C;
  if (sp > 0.0) dAB_dv += Cv * (v / sp).transpose();
  dAB_dv = k * p.c_a.asDiagonal() * dAB_dv;

  Eigen::Matrix<double, 3, 4> dAB_dqh, dvdot_dqh;
  for (int j = 0; j < 4; ++j) {
    const Mat3 dC = dcm_partial(qh, j);
    dAB_dqh.col(j) = k * sp * p.c_a.cwiseProduct(dC * v);
    dvdot_dqh.col(j) = (dC.transpose() * F + C.transpose() * dAB_dqh.col(j)) / m;
  }
  const Eigen::Matrix<double, 3, 4> dAB_dq = dAB_dqh * N;

  A.setZero();
  B.setZero();
  B(0, 0) = -p.alpha_mdot();

  A.block<3, 3>(1, 4).setIdentity();

  A.block<3, 1>(4, 0) = -C.transpose() * F / (m * m);
  A.block<3, 3>(4, 4) = C.transpose() * dAB_dv / m;
  A.block<3, 4>(4, 7) = dvdot_dqh * N;
  B.block<3, 3>(4, 0) = C.transpose() * dTB / m;

  A.block<4, 4>(7, 7) = 0.5 * omega_matrix(w);
  A.block<4, 3>(7, 11) = 0.5 * omega_q_partial(q);

  const Vec3 jinv = p.j_b.cwiseInverse();
  const Vec3 moment = p.r_cm.cross(TB) + p.r_cp.cross(AB);
  const Mat3 Rcp = skew(p.r_cp);
  A.block<3, 1>(11, 0) = -moment.cwiseProduct(jinv) / (m * m);
  A.block<3, 3>(11, 4) = jinv.asDiagonal() * (Rcp * dAB_dv) / m;
  A.block<3, 4>(11, 7) = jinv.asDiagonal() * (Rcp * dAB_dq) / m;
  const Mat3 dgyro = skew(w) * p.j_b.asDiagonal().toDenseMatrix() - skew(p.j_b.cwiseProduct(w));
  A.block<3, 3>(11, 11) = -(jinv.asDiagonal() * dgyro);
  B.block<3, 3>(11, 0) = jinv.asDiagonal() * (skew(p.r_cm) * dTB) / m;
  if (g_fault.active) A(g_fault.row, g_fault.col) += g_fault.delta;
}

namespace debug {

void set_jacobian_fault(int row, int col, double delta) {
  if (row < 0 || row >= kNx || col < 0 || col >= kNx) throw std::out_of_range("jacobian fault index");
  g_fault = {true, row, col, delta};
}

void clear_jacobian_fault() { g_fault = {}; }

}  // namespace debug

namespace {

ConstraintValues eval_constraints(const VecX& x, const VecU& u, const VehicleParams& p,
                                  ConstraintJacobians* jac) {
  const double m = x[0];
  const Vec3 r = x.segment<3>(1);
  const Vec3 v = x.segment<3>(4);
  const Vec4 q = x.segment<4>(7);
  const Vec3 w = x.segment<3>(11);
  const double de = u[1], pe = u[2], db = u[3], pb = u[4];
  const double T = u[0];

  const double tilt = 1.0 - 2.0 * (q[1] * q[1] + q[2] * q[2]);
  const double sp = v.norm();
  const double wn = w.norm();
  const Eigen::Vector2d rxy = r.head<2>();
  const double rxy_n = smooth_norm(rxy);
  const Vec3 dr = r - p.r_f;
  const double dr_n = smooth_norm(dr);
  const Mat3 C = dcm_body_from_inertial(q);
  const Vec3 lB = boresight_body(db, pb);

  ConstraintValues c;
  c.gx << p.m_dry - m, std::cos(p.theta_max) - tilt, w.squaredNorm() - p.omega_max * p.omega_max,
      std::tan(p.gamma_max) * rxy_n - r.z();
  c.gu << std::abs(de) - p.delta_e_max, std::abs(pe) - p.phi_e_max, std::abs(db) - p.delta_b_max,
      std::abs(pb) - p.phi_b_max;
  c.trig << r.z() - p.h1_trig, r.z() - p.h2_trig, sp - p.v_trig, std::cos(p.theta_trig) - tilt;
  c.stc << std::abs(de) - p.delta_stc, sp - p.v_stc, wn - p.omega_stc, std::cos(p.theta_stc) - tilt,
      std::tan(p.gamma_stc) * rxy_n - r.z(), std::cos(p.psi_stc) * dr_n - dr.dot(C.transpose() * lB),
      p.t1_min - T, T - p.t1_max, p.t2_min - T, T - p.t2_max;

  if (!jac) return c;
  ConstraintJacobians& J = *jac;
  J.gx_x.setZero();
  J.gu_u.setZero();
  J.trig_x.setZero();
  J.stc_x.setZero();
  J.stc_u.setZero();

  // d(-tilt)/dq
  Eigen::Matrix<double, 1, 4> dneg_tilt = Eigen::Matrix<double, 1, 4>::Zero();
  dneg_tilt(1) = 4.0 * q[1];
  dneg_tilt(2) = 4.0 * q[2];
  const double rxy_den = std::sqrt(rxy.squaredNorm() + kNormEps * kNormEps);
  Eigen::Matrix<double, 1, 3> dglide = Eigen::Matrix<double, 1, 3>::Zero();

  J.gx_x(0, 0) = -1.0;
  J.gx_x.block<1, 4>(1, 7) = dneg_tilt;
  J.gx_x.block<1, 3>(2, 11) = 2.0 * w.transpose();
  dglide(0) = std::tan(p.gamma_max) * rxy.x() / rxy_den;
  dglide(1) = std::tan(p.gamma_max) * rxy.y() / rxy_den;
  dglide(2) = -1.0;
  J.gx_x.block<1, 3>(3, 1) = dglide;

  J.gu_u(0, 1) = sgn(de);
  J.gu_u(1, 2) = sgn(pe);
  J.gu_u(2, 3) = sgn(db);
  J.gu_u(3, 4) = sgn(pb);

  J.trig_x(0, 3) = 1.0;
  J.trig_x(1, 3) = 1.0;
  if (sp > 0.0) J.trig_x.block<1, 3>(2, 4) = (v / sp).transpose();
  J.trig_x.block<1, 4>(3, 7) = dneg_tilt;

  J.stc_u(0, 1) = sgn(de);
  if (sp > 0.0) J.stc_x.block<1, 3>(1, 4) = (v / sp).transpose();
  if (wn > 0.0) J.stc_x.block<1, 3>(2, 11) = (w / wn).transpose();
  J.stc_x.block<1, 4>(3, 7) = dneg_tilt;
  dglide(0) = std::tan(p.gamma_stc) * rxy.x() / rxy_den;
  dglide(1) = std::tan(p.gamma_stc) * rxy.y() / rxy_den;
  J.stc_x.block<1, 3>(4, 1) = dglide;

  const double dr_den = std::sqrt(dr.squaredNorm() + kNormEps * kNormEps);
  const Vec3 CtL = C.transpose() * lB;
  J.stc_x.block<1, 3>(5, 1) = (std::cos(p.psi_stc) * dr / dr_den - CtL).transpose();
  const Vec4 qh = q / q.norm();
  Eigen::Matrix<double, 1, 4> dlos_dqh;
  for (int j = 0; j < 4; ++j) dlos_dqh(j) = -lB.dot(dcm_partial(qh, j) * dr);
  J.stc_x.block<1, 4>(5, 7) = dlos_dqh * normalization_jacobian(q);
  const Vec3 dl_ddb(std::cos(db) * std::cos(pb), std::cos(db) * std::sin(pb), -std::sin(db));
  const Vec3 dl_dpb(-std::sin(db) * std::sin(pb), std::sin(db) * std::cos(pb), 0.0);
  const Vec3 Cdr = C * dr;
  J.stc_u(5, 3) = -Cdr.dot(dl_ddb);
  J.stc_u(5, 4) = -Cdr.dot(dl_dpb);

  J.stc_u(6, 0) = -1.0;
  J.stc_u(7, 0) = 1.0;
  J.stc_u(8, 0) = -1.0;
  J.stc_u(9, 0) = 1.0;
  return c;
}

}  // namespace

ConstraintValues constraint_values(const VecX& x, const VecU& u, const VehicleParams& p) {
  return eval_constraints(x, u, p, nullptr);
}

ConstraintValues constraint_values(const VecX& x, const VecU& u, const VehicleParams& p,
                                   ConstraintJacobians& jac) {
  return eval_constraints(x, u, p, &jac);
}

}  // namespace pdg
