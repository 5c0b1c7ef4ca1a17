#include "pdg/ocp.hpp"

#include "pdg/dgmsr.hpp"

#include <algorithm>
#include <cmath>

namespace pdg {

namespace {
double pos2(double z) { return z > 0.0 ? z * z : 0.0; }
}  // namespace

VecX BoundarySet::Initial() const {
  VecX x;
  x << m_i, r_i, v_i, q_i, w_i;
  return x;
}

VecX BoundarySet::Final() const {
  VecX x;
  x << m_dry, r_f, v_f, q_f, w_f;
  return x;
}

void BoundarySet::Validate() const {
  if (!(m_dry > 0.0) || !(m_i > m_dry)) throw std::invalid_argument("boundary: need 0 < m_dry < m_i");
  if (!Initial().allFinite() || !Final().allFinite()) throw std::invalid_argument("boundary: non-finite target");
}

ConstraintRefs make_constraint_refs(const VehicleParams& v, const BoundarySet& b) {
  const double L = std::max((b.r_i - b.r_f).cwiseAbs().maxCoeff(), 1.0);
  const double V = std::max({b.v_i.norm(), b.v_f.norm(), 1.0});
  const double T = v.t2_max;
  ConstraintRefs r;
  r.gx << b.m_i - b.m_dry, 1.0, v.omega_max * v.omega_max, L;
  r.gu << v.delta_e_max, v.phi_e_max, v.delta_b_max, v.phi_b_max;
  r.trig << L, L, V, 1.0;
  r.stc << v.delta_e_max, V, v.omega_max, 1.0, L, L, T, T, T, T;
  return r;
}

ProblemParams ProblemParams::Make(const VehicleParams& v, const BoundarySet& b, double delta_licq) {
  ProblemParams p;
  p.vehicle = v;
  p.boundary = b;
  p.vehicle.m_dry = b.m_dry;
  p.vehicle.m_i = b.m_i;
  p.vehicle.r_f = b.r_f;
  p.refs = make_constraint_refs(p.vehicle, b);
  p.delta_licq = delta_licq;
  return p;
}

ConstraintValues normalized_constraints(const VecX& x, const VecU& u, const ProblemParams& p) {
  ConstraintValues c = constraint_values(x, u, p.vehicle);
  c.gx = c.gx.cwiseQuotient(p.refs.gx);
  c.gu = c.gu.cwiseQuotient(p.refs.gu);
  c.trig = c.trig.cwiseQuotient(p.refs.trig);
  c.stc = c.stc.cwiseQuotient(p.refs.stc);
  return c;
}

PenaltyTerms penalty_terms(const VecX& x, const VecU& u, const ProblemParams& p) {
  const ConstraintValues c = normalized_constraints(x, u, p);
  PenaltyTerms t;
  for (int i = 0; i < 4; ++i) {
    t.gx[i] = pos2(c.gx[i]);
    t.gu[i] = pos2(c.gu[i]);
  }
  t.stc = stc_residual(c.trig - Vec4::Constant(p.delta_licq), c.stc);
  return t;
}

VecXa augmented_rhs(const VecXa& xa, const VecUa& ua, const ProblemParams& p) {
  const VecX x = xa.head<kNx>();
  const VecU u = ua.head<kNu>();
  const double s = ua[iu::s];
  VecXa f;
  f.head<kNx>() = s * dynamics(x, u, p.vehicle);
  f[ix::y] = std::max(s, 0.0) * penalty_terms(x, u, p).Total();
  f[ix::t] = s;
  return f;
}

void augmented_jacobians(const VecXa& xa, const VecUa& ua, const ProblemParams& p, MatXaXa& A,
                         MatXaUa& B) {
  const VecX x = xa.head<kNx>();
  const VecU u = ua.head<kNu>();
  const double s = ua[iu::s];
  const double sp = std::max(s, 0.0);

  MatXX Af;
  MatXU Bf;
  dynamics_jacobians(x, u, p.vehicle, Af, Bf);
  A.setZero();
  B.setZero();
  A.topLeftCorner<kNx, kNx>() = s * Af;
  B.topLeftCorner<kNx, kNu>() = s * Bf;
  B.block<kNx, 1>(0, iu::s) = dynamics(x, u, p.vehicle);

  ConstraintJacobians J;
  ConstraintValues c = constraint_values(x, u, p.vehicle, J);
  const ConstraintRefs& rf = p.refs;
  const Vec4 gx = c.gx.cwiseQuotient(rf.gx);
  const Vec4 gu = c.gu.cwiseQuotient(rf.gu);
  const Vec4 trig = c.trig.cwiseQuotient(rf.trig) - Vec4::Constant(p.delta_licq);
  const Vec10 stc = c.stc.cwiseQuotient(rf.stc);

  Eigen::Matrix<double, 1, kNx> dy_dx = Eigen::Matrix<double, 1, kNx>::Zero();
  Eigen::Matrix<double, 1, kNu> dy_du = Eigen::Matrix<double, 1, kNu>::Zero();
  double ydot = 0.0;
  for (int i = 0; i < 4; ++i) {
    if (gx[i] > 0.0) {
      ydot += gx[i] * gx[i];
      dy_dx += 2.0 * gx[i] / rf.gx[i] * J.gx_x.row(i);
    }
    if (gu[i] > 0.0) {
      ydot += gu[i] * gu[i];
      dy_du += 2.0 * gu[i] / rf.gu[i] * J.gu_u.row(i);
    }
  }
  ydot += stc_residual(trig, stc).sum();
  Eigen::Matrix4d dh_dt;
  Eigen::Matrix<double, 4, 10> dh_ds;
  stc_residual_partials(trig, stc, dh_dt, dh_ds);
  const Eigen::Matrix<double, 1, 4> sum_t = dh_dt.colwise().sum();
  const Eigen::Matrix<double, 1, 10> sum_s = dh_ds.colwise().sum();
  dy_dx += sum_t.cwiseQuotient(rf.trig.transpose()) * J.trig_x;
  dy_dx += sum_s.cwiseQuotient(rf.stc.transpose()) * J.stc_x;
  dy_du += sum_s.cwiseQuotient(rf.stc.transpose()) * J.stc_u;

  A.block<1, kNx>(ix::y, 0) = sp * dy_dx;
  B.block<1, kNu>(ix::y, 0) = sp * dy_du;
  B(ix::y, iu::s) = s > 0.0 ? ydot : 0.0;
  B(ix::t, iu::s) = 1.0;
}

Trajectory initial_guess(const ProblemParams& p, int K, double tf_guess) {
  if (K < 2) throw std::invalid_argument("initial_guess: K must be >= 2");
  const BoundarySet& b = p.boundary;
  Trajectory z;
  z.x.resize(K);
  z.u.resize(K);
  for (int k = 0; k < K; ++k) {
    const double a = double(k) / (K - 1);
    VecXa& x = z.x[k];
    x[ix::m] = (1 - a) * b.m_i + a * b.m_dry;
    x.segment<3>(ix::r) = (1 - a) * b.r_i + a * b.r_f;
    x.segment<3>(ix::v) = (1 - a) * b.v_i + a * b.v_f;
    x.segment<4>(ix::q) = ((1 - a) * b.q_i + a * b.q_f).normalized();
    x.segment<3>(ix::w) = (1 - a) * b.w_i + a * b.w_f;
    x[ix::y] = 0.0;
    x[ix::t] = tf_guess * a;
    VecUa& u = z.u[k];
    u.setZero();
    u[iu::T] = 0.5 * (p.vehicle.t1_max + p.vehicle.t1_min);
    u[iu::s] = tf_guess;
  }
  return z;
}

ScalingMap make_scaling(const ProblemParams& p, const Trajectory& guess, double y_range) {
  const VehicleParams& v = p.vehicle;
  const BoundarySet& b = p.boundary;
  VecXa lo, hi;
  const double V = std::max(b.v_i.norm(), b.v_f.norm());
  lo[ix::m] = b.m_dry;
  hi[ix::m] = b.m_i;
  for (int j = 0; j < 3; ++j) {
    lo[ix::r + j] = std::min(b.r_i[j], b.r_f[j]);
    hi[ix::r + j] = std::max(b.r_i[j], b.r_f[j]);
    lo[ix::v + j] = -V;
    hi[ix::v + j] = V;
    lo[ix::w + j] = -v.omega_max;
    hi[ix::w + j] = v.omega_max;
  }
  lo.segment<4>(ix::q).setConstant(-1.0);
  hi.segment<4>(ix::q).setConstant(1.0);
  lo[ix::y] = 0.0;
  hi[ix::y] = y_range;
  lo[ix::t] = hi[ix::t] = 0.0;

  VecUa ulo, uhi;
  ulo << 0.0, -v.delta_e_max, -v.phi_e_max, -v.delta_b_max, -v.phi_b_max, 0.0;
  uhi << v.t2_max, v.delta_e_max, v.phi_e_max, v.delta_b_max, v.phi_b_max, 0.0;

  for (const VecXa& x : guess.x) {
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  for (const VecUa& u : guess.u) {
    ulo = ulo.cwiseMin(u);
    uhi = uhi.cwiseMax(u);
  }

  ScalingMap s;
  for (int i = 0; i < kNxa; ++i) {
    const double range = hi[i] - lo[i];
    s.x_scale[i] = range > 1e-12 ? range : 1.0;
    s.x_offset[i] = lo[i];
  }
  for (int i = 0; i < kNua; ++i) {
    const double range = uhi[i] - ulo[i];
    s.u_scale[i] = range > 1e-12 ? range : 1.0;
    s.u_offset[i] = ulo[i];
  }
  return s;
}

}  // namespace pdg
