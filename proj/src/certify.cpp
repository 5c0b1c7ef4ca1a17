#include "pdg/certify.hpp"

#include "pdg/dgmsr.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>

namespace pdg {

namespace {

double pos2(double z) { return z > 0.0 ? z * z : 0.0; }

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561, a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

const char* kGxNames[4] = {"mass_floor", "tilt", "angular_rate", "glideslope"};
const char* kGuNames[4] = {"engine_deflection", "engine_azimuth", "boresight_deflection", "boresight_azimuth"};
const char* kStcNames[4] = {"altitude_h1_group", "line_of_sight", "thrust_low_band", "thrust_high_band"};
const char* kConsNames[10] = {"deflection", "speed", "angular_rate", "tilt", "glideslope",
                              "line_of_sight", "thrust_min_band1", "thrust_max_band1",
                              "thrust_min_band2", "thrust_max_band2"};
const int kConsGroup[10] = {0, 0, 0, 0, 0, 1, 2, 2, 3, 3};

}  // namespace

int DenseTrajectory::SegmentOf(double t) const {
  auto it = std::upper_bound(node_t_.begin(), node_t_.end(), t);
  int k = int(it - node_t_.begin()) - 1;
  return std::clamp(k, 0, segments() - 1);
}

double DenseTrajectory::Tau(double t) const {
  const int k = SegmentOf(t);
  const double dtau = grid_.tau[k + 1] - grid_.tau[k];
  const double s0 = nodes_.u[k][iu::s], s1 = nodes_.u[k + 1][iu::s];
  const double e = std::max(0.0, t - node_t_[k]);
  const double a = (s1 - s0) / (2.0 * dtau);
  const double disc = std::max(0.0, s0 * s0 + 4.0 * a * e);
  const double den = s0 + std::sqrt(disc);
  const double sig = den > 0.0 ? 2.0 * e / den : 0.0;
  return std::clamp(grid_.tau[k] + sig, grid_.tau[k], grid_.tau[k + 1]);
}

VecU DenseTrajectory::Control(double t) const {
  const int k = SegmentOf(t);
  const VecUa u = foh(Tau(t), grid_.tau[k], grid_.tau[k + 1], nodes_.u[k], nodes_.u[k + 1]);
  return u.head<kNu>();
}

double DenseTrajectory::Dilation(double t) const {
  const int k = SegmentOf(t);
  return foh(Tau(t), grid_.tau[k], grid_.tau[k + 1], nodes_.u[k], nodes_.u[k + 1])[iu::s];
}

VecX DenseTrajectory::State(double t) const {
  t = std::clamp(t, t0(), tf());
  auto it = std::upper_bound(knot_t_.begin(), knot_t_.end(), t);
  size_t i = std::min<size_t>(std::max<ptrdiff_t>(it - knot_t_.begin(), 1), knot_t_.size() - 1) - 1;
  const double ta = knot_t_[i], tb = knot_t_[i + 1];
  const double h = tb - ta;
  if (h <= 0.0) return knot_x_[i];
  const double s = (t - ta) / h;
  const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
  const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
  return h00 * knot_x_[i] + h10 * h * knot_f_[i] + h01 * knot_x_[i + 1] + h11 * h * knot_f_[i + 1];
}

DenseTrajectory dense_propagate(const Trajectory& z, const GridSpec& grid, const ProblemParams& p,
                                double rtol, double atol) {
  DenseTrajectory d;
  d.nodes_ = z;
  d.grid_ = grid;
  const int K = z.K();
  d.node_t_.assign(K, 0.0);
  for (int k = 0; k + 1 < K; ++k) {
    const double dt = 0.5 * (grid.tau[k + 1] - grid.tau[k]) * (z.u[k][iu::s] + z.u[k + 1][iu::s]);
    if (!(dt > 0.0)) throw PropagationError(fmt::format("segment {}: nonpositive duration", k));
    d.node_t_[k + 1] = d.node_t_[k] + dt;
  }

  auto f = [&](double t, const VecX& x) { return dynamics(x, d.Control(t), p.vehicle); };

  VecX x = z.x[0].head<kNx>();
  double t = 0.0;
  VecX fx = f(t, x);
  d.knot_t_.push_back(t);
  d.knot_x_.push_back(x);
  d.knot_f_.push_back(fx);

  for (int k = 0; k + 1 < K; ++k) {
    const double tend = d.node_t_[k + 1];
    double h = (tend - t) / 20.0;
    // Control derivative jumps at nodes, so restart the FSAL derivative.
    fx = f(t, x);
    int guard = 0;
    while (t < tend) {
      if (++guard > 2000000) throw PropagationError(fmt::format("dense integration stalled in segment {}", k));
      const bool last = t + h >= tend;
      if (last) h = tend - t;
      const VecX k1 = fx;
      const VecX k2 = f(t + c2 * h, x + h * a21 * k1);
      const VecX k3 = f(t + c3 * h, x + h * (a31 * k1 + a32 * k2));
      const VecX k4 = f(t + c4 * h, x + h * (a41 * k1 + a42 * k2 + a43 * k3));
      const VecX k5 = f(t + c5 * h, x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
      const VecX k6 = f(t + h, x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
      const VecX xn = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
      const double tn = last ? tend : t + h;
      const VecX k7 = f(tn, xn);
      const VecX err = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
      double en = 0.0;
      for (int i = 0; i < kNx; ++i)
        en = std::max(en, std::abs(err[i]) / (atol + rtol * std::max(std::abs(x[i]), std::abs(xn[i]))));
      if (!std::isfinite(en)) throw PropagationError(fmt::format("dense integration failed in segment {}", k));
      if (en <= 1.0) {
        t = tn;
        x = xn;
        fx = k7;
        d.knot_t_.push_back(t);
        d.knot_x_.push_back(x);
        d.knot_f_.push_back(fx);
      }
      const double fac = en > 0.0 ? 0.9 * std::pow(en, -0.2) : 5.0;
      h *= std::clamp(fac, 0.2, 5.0);
      if (h < 1e-12 * std::max(1.0, std::abs(tend)))
        throw PropagationError(fmt::format("dense integration step underflow in segment {} at t={}", k, t));
    }
  }
  return d;
}

std::vector<double> locate_sign_changes(const std::function<double(double)>& g,
                                        const std::vector<double>& breaks, int per_segment,
                                        double tol_t) {
  std::vector<double> ts;
  for (size_t k = 0; k + 1 < breaks.size(); ++k)
    for (int j = 0; j < per_segment; ++j) ts.push_back(breaks[k] + (breaks[k + 1] - breaks[k]) * j / per_segment);
  ts.push_back(breaks.back());

  std::vector<double> out;
  double ga = g(ts[0]);
  for (size_t i = 0; i + 1 < ts.size(); ++i) {
    const double gb = g(ts[i + 1]);
    if ((ga < 0.0) != (gb < 0.0)) {
      double a = ts[i], b = ts[i + 1];
      const bool neg_a = ga < 0.0;
      while (b - a > tol_t) {
        const double m = 0.5 * (a + b);
        if ((g(m) < 0.0) == neg_a) a = m;
        else b = m;
      }
      out.push_back(0.5 * (a + b));
    }
    ga = gb;
  }
  return out;
}

TriggerCrossings locate_trigger_crossings(const DenseTrajectory& traj, const ProblemParams& p,
                                          double tol_t, int per_segment) {
  std::vector<double> breaks;
  for (int k = 0; k <= traj.segments(); ++k) breaks.push_back(traj.node_time(k));
  auto trig = [&](double t) { return constraint_values(traj.State(t), traj.Control(t), p.vehicle).trig; };
  TriggerCrossings c;
  for (int j = 0; j < 4; ++j)
    c.trig[j] = locate_sign_changes([&](double t) { return trig(t)[j]; }, breaks, per_segment, tol_t);
  c.speed_tilt = locate_sign_changes(
      [&](double t) {
        const Vec4 g = trig(t);
        return std::max(g[2], g[3]);
      },
      breaks, per_segment, tol_t);
  return c;
}

bool CertReport::ChannelsPass() const {
  for (int i = 0; i < 4; ++i)
    if (gx[i].max_scaled > tol || gu[i].max_scaled > tol || stc[i].max_scaled > tol) return false;
  return true;
}

bool CertReport::ConsequentsPass() const {
  for (const auto& c : consequents)
    if (c.max_scaled > tol) return false;
  return true;
}

CertReport check_constraints(const DenseTrajectory& traj, const ProblemParams& p, int per_segment, double tol) {
  CertReport rep;
  rep.tol = tol;
  rep.delta = p.delta_licq;
  for (int i = 0; i < 4; ++i) {
    rep.gx[i].name = kGxNames[i];
    rep.gu[i].name = kGuNames[i];
    rep.stc[i].name = kStcNames[i];
  }
  for (int i = 0; i < 10; ++i) {
    rep.consequents[i].name = kConsNames[i];
    rep.consequents[i].group = kConsGroup[i];
  }

  std::vector<double> ts;
  for (int k = 0; k < traj.segments(); ++k) {
    const double a = traj.node_time(k), b = traj.node_time(k + 1);
    for (int j = 0; j < per_segment; ++j) ts.push_back(a + (b - a) * j / per_segment);
  }
  ts.push_back(traj.tf());
  rep.samples = int(ts.size());
  rep.final_time = traj.tf();

  auto note = [&](auto& ch, double scaled, double raw, double t) {
    if (scaled > ch.max_scaled) ch.max_scaled = scaled;
    if (raw > ch.max_raw) ch.max_raw = raw;
    if (scaled > tol && ch.first_violation < 0.0) ch.first_violation = t;
  };

  const double d = p.delta_licq;
  for (double t : ts) {
    const VecX x = traj.State(t);
    const VecU u = traj.Control(t);
    const ConstraintValues raw = constraint_values(x, u, p.vehicle);
    const ConstraintValues c = normalized_constraints(x, u, p);
    for (int i = 0; i < 4; ++i) {
      note(rep.gx[i], pos2(c.gx[i]), std::max(0.0, raw.gx[i]), t);
      note(rep.gu[i], pos2(c.gu[i]), std::max(0.0, raw.gu[i]), t);
    }
    const Vec4 h = stc_residual(c.trig, c.stc);
    const bool active[4] = {c.trig[0] < -d, c.trig[1] < -d, c.trig[2] < -d && c.trig[3] < -d,
                            c.trig[2] > d || c.trig[3] > d};
    double group_raw[4] = {0, 0, 0, 0};
    for (int i = 0; i < 10; ++i) {
      ConsequentReport& cr = rep.consequents[i];
      if (!active[cr.group]) {
        ++cr.vacuous_samples;
        continue;
      }
      ++cr.active_samples;
      note(cr, std::max(0.0, c.stc[i]), std::max(0.0, raw.stc[i]), t);
      group_raw[cr.group] = std::max(group_raw[cr.group], std::max(0.0, raw.stc[i]));
    }
    for (int j = 0; j < 4; ++j) note(rep.stc[j], h[j], group_raw[j], t);
  }

  double q0 = traj.State(traj.t0()).segment<4>(7).norm();
  for (double t : ts) rep.quat_norm_drift = std::max(rep.quat_norm_drift, std::abs(traj.State(t).segment<4>(7).norm() - q0));
  return rep;
}

CertReport certify_solution(const Trajectory& z, const GridSpec& grid, const ProblemParams& p,
                            const ScalingMap& sc, int per_segment, double tol) {
  const DenseTrajectory traj = dense_propagate(z, grid, p);
  CertReport rep = check_constraints(traj, p, per_segment, tol);
  rep.crossings = locate_trigger_crossings(traj, p, 1e-4, per_segment);
  const VecX end = traj.State(traj.tf());
  rep.endpoint_error = (end - z.x.back().head<kNx>()).cwiseQuotient(sc.x_scale.head<kNx>()).lpNorm<Eigen::Infinity>();
  return rep;
}

}  // namespace pdg
