#include "pdg/certify.hpp"

#include <doctest.h>

#include <cmath>

using namespace pdg;

namespace {

// Unpowered, drag-free arc: closed-form kinematics.
struct Ballistic {
  ProblemParams p;
  Trajectory z;
  GridSpec grid;
};

Ballistic ballistic(const Vec3& r0, const Vec3& v0, const Vec4& q0, double tf, int K = 3) {
  Ballistic b;
  VehicleParams v;
  v.rho = 0.0;
  b.p = ProblemParams::Make(v, BoundarySet{}, 1e-3);
  b.grid = GridSpec::Uniform(K, 16);
  b.z.x.assign(K, VecXa::Zero());
  b.z.u.assign(K, VecUa::Zero());
  VecXa& x0 = b.z.x[0];
  x0[ix::m] = 95000;
  x0.segment<3>(ix::r) = r0;
  x0.segment<3>(ix::v) = v0;
  x0.segment<4>(ix::q) = q0;
  for (VecUa& u : b.z.u) u[iu::s] = tf;
  return b;
}

Vec3 ballistic_position(const Vec3& r0, const Vec3& v0, double g, double t) {
  return r0 + v0 * t + Vec3(0, 0, -0.5 * g * t * t);
}

}  // namespace

TEST_SUITE("certify") {

TEST_CASE("dense propagation matches the ballistic closed form") {
  const Vec3 r0(10, -20, 400), v0(3, 1, -20);
  const Ballistic b = ballistic(r0, v0, Vec4(1, 0, 0, 0), 4.0);
  const DenseTrajectory d = dense_propagate(b.z, b.grid, b.p);
  CHECK(d.tf() == doctest::Approx(4.0));
  CHECK(d.segments() == 2);
  CHECK(d.node_time(1) == doctest::Approx(2.0));
  const double g = b.p.vehicle.g0;
  for (int i = 0; i <= 40; ++i) {
    const double t = 0.1 * i;
    const VecX x = d.State(t);
    CHECK((x.segment<3>(1) - ballistic_position(r0, v0, g, t)).norm() < 1e-8);
    CHECK((x.segment<3>(4) - (v0 + Vec3(0, 0, -g * t))).norm() < 1e-8);
    CHECK(x[0] == doctest::Approx(95000));
    CHECK(d.Dilation(t) == doctest::Approx(4.0));
    CHECK(d.Tau(t) == doctest::Approx(t / 4.0));
  }
}

TEST_CASE("sign change location") {
  const std::vector<double> roots = locate_sign_changes([](double t) { return t - 10.0; }, {0.0, 7.0, 20.0}, 13, 1e-9);
  REQUIRE(roots.size() == 1);
  CHECK(std::abs(roots[0] - 10.0) < 1e-9);

  const std::vector<double> cos_roots = locate_sign_changes([](double t) { return std::cos(t); }, {0.0, 10.0}, 50, 1e-8);
  REQUIRE(cos_roots.size() == 3);
  for (int k = 0; k < 3; ++k) CHECK(std::abs(cos_roots[k] - (kPi / 2 + k * kPi)) < 1e-8);

  CHECK(locate_sign_changes([](double) { return 1.0; }, {0.0, 1.0}, 10, 1e-6).empty());
  // Touching zero from above counts as nonnegative, so no crossing.
  CHECK(locate_sign_changes([](double t) { return (t - 0.5) * (t - 0.5); }, {0.0, 1.0}, 10, 1e-6).empty());
}

TEST_CASE("altitude trigger crossing of a falling body") {
  const Vec3 r0(0, 0, 150), v0(0, 0, -5);
  const Ballistic b = ballistic(r0, v0, Vec4(1, 0, 0, 0), 5.0);
  const DenseTrajectory d = dense_propagate(b.z, b.grid, b.p);
  const double g = b.p.vehicle.g0;
  // 150 - 5 t - g t^2 / 2 = 100
  const double t_cross = (-5.0 + std::sqrt(25.0 + 2.0 * g * 50.0)) / g;
  const TriggerCrossings c = locate_trigger_crossings(d, b.p, 1e-6, 200);
  REQUIRE(c.trig[0].size() == 1);
  CHECK(std::abs(c.trig[0][0] - t_cross) < 2e-6);
  CHECK(c.trig[1].empty());
}

TEST_CASE("inactive triggers make consequents vacuous") {
  const Ballistic b = ballistic(Vec3(0, 0, 500), Vec3(0, 0, -10), Vec4(1, 0, 0, 0), 2.0);
  const DenseTrajectory d = dense_propagate(b.z, b.grid, b.p);
  const CertReport r = check_constraints(d, b.p, 100);
  CHECK(r.samples == 201);
  for (int i : {0, 1, 2, 3, 4, 5, 8, 9}) {
    CAPTURE(i);
    CHECK(r.consequents[i].active_samples == 0);
    CHECK(r.consequents[i].vacuous_samples == r.samples);
    CHECK(r.consequents[i].max_scaled == 0.0);
  }
  // Slow and upright selects the low band, which zero thrust violates.
  CHECK(r.consequents[6].active_samples == r.samples);
  CHECK(r.consequents[6].max_raw == doctest::Approx(0.88e6));
  CHECK(r.consequents[6].first_violation == 0.0);
  CHECK(r.stc[2].max_scaled > r.tol);
  CHECK_FALSE(r.Passed());
  CHECK(r.quat_norm_drift < 1e-12);
}

TEST_CASE("tilt beyond the low-altitude limit is reported") {
  const Vec4 q(std::cos(5 * kDeg), std::sin(5 * kDeg), 0, 0);  // 10 degrees off vertical
  const Ballistic b = ballistic(Vec3(0, 0, 80), Vec3(0, 0, 0), q, 1.0);
  const DenseTrajectory d = dense_propagate(b.z, b.grid, b.p);
  const CertReport r = check_constraints(d, b.p, 50);
  const ConsequentReport& tilt = r.consequents[3];
  CHECK(tilt.name == "tilt");
  CHECK(tilt.active_samples == r.samples);
  CHECK(tilt.max_raw == doctest::Approx(std::cos(5 * kDeg) - std::cos(10 * kDeg)).epsilon(1e-9));
  CHECK(tilt.max_scaled > r.tol);
  CHECK(r.consequents[1].max_scaled == 0.0);  // speed stays under the limit
  CHECK(r.gx[1].max_scaled == 0.0);
}

TEST_CASE("certify_solution compares the dense endpoint with the last node") {
  Ballistic b = ballistic(Vec3(0, 0, 400), Vec3(0, 0, -20), Vec4(1, 0, 0, 0), 2.0);
  const DenseTrajectory d = dense_propagate(b.z, b.grid, b.p);
  b.z.x.back().head<kNx>() = d.State(d.tf());
  ScalingMap sc;
  sc.x_scale.setOnes();
  sc.x_offset.setZero();
  sc.u_scale.setOnes();
  sc.u_offset.setZero();
  CHECK(certify_solution(b.z, b.grid, b.p, sc, 20).endpoint_error < 1e-10);
  b.z.x.back()[ix::r + 2] += 0.5;
  CHECK(certify_solution(b.z, b.grid, b.p, sc, 20).endpoint_error == doctest::Approx(0.5).epsilon(1e-8));
}

TEST_CASE("nonpositive segment duration is rejected") {
  Ballistic b = ballistic(Vec3(0, 0, 400), Vec3::Zero(), Vec4(1, 0, 0, 0), 1.0);
  for (VecUa& u : b.z.u) u[iu::s] = 0.0;
  CHECK_THROWS_AS(dense_propagate(b.z, b.grid, b.p), PropagationError);
}

}  // TEST_SUITE
