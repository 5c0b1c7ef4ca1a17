#include "envelope.hpp"
#include "oracles.hpp"
#include "pdg/vehicle.hpp"

#include <doctest.h>

#include <random>

using namespace pdg;
using Eigen::VectorXd;

namespace {

Vec4 random_quat(std::mt19937_64& rng) {
  std::normal_distribution<double> N;
  return Vec4(N(rng), N(rng), N(rng), N(rng)).normalized();
}

}  // namespace

TEST_SUITE("vehicle") {

TEST_CASE("direction cosine matrix") {
  CHECK(dcm_body_from_inertial(Vec4(1, 0, 0, 0)).isApprox(Mat3::Identity()));
  Mat3 expect;
  expect << 1, 0, 0, 0, 0, 1, 0, -1, 0;
  const double h = std::sqrt(2.0) / 2.0;
  CHECK((dcm_body_from_inertial(Vec4(h, h, 0, 0)) - expect).cwiseAbs().maxCoeff() < 1e-15);
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const Mat3 C = dcm_body_from_inertial(random_quat(rng));
    CHECK((C.transpose() * C - Mat3::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(C.determinant() == doctest::Approx(1.0));
  }
  CHECK_THROWS(dcm_body_from_inertial(Vec4::Zero()));
}

TEST_CASE("thrust and boresight vectors") {
  CHECK(thrust_body(5.0, 0.0, 1.0).isApprox(Vec3(0, 0, 5)));
  CHECK((thrust_body(1.0, kPi / 2, 0.0) - Vec3(1, 0, 0)).norm() < 1e-15);
  const Vec3 t = thrust_body(2.2e6, 10 * kDeg, 45 * kDeg);
  CHECK(t[0] == doctest::Approx(270133.17).epsilon(1e-6));
  CHECK(t[1] == doctest::Approx(270133.17).epsilon(1e-6));
  CHECK(t[2] == doctest::Approx(2166577.5).epsilon(1e-6));
  CHECK(t.norm() == doctest::Approx(2.2e6).epsilon(1e-12));

  CHECK(boresight_body(0.0, 0.3).isApprox(Vec3(0, 0, 1)));
  CHECK((boresight_body(kPi / 2, kPi / 2) - Vec3(0, 1, 0)).norm() < 1e-15);
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> U(-kPi, kPi);
  for (int i = 0; i < 100; ++i) CHECK(std::abs(boresight_body(U(rng), U(rng)).norm() - 1.0) < 1e-12);
}

TEST_CASE("aerodynamic force") {
  const VehicleParams p;
  CHECK(aero_body(Vec3::Zero(), Vec4(1, 0, 0, 0), p).norm() == 0.0);
  const Vec3 a = aero_body(Vec3(0, 0, -50), Vec4(1, 0, 0, 0), p);
  CHECK(a[0] == 0.0);
  CHECK(a[1] == 0.0);
  CHECK(a[2] == doctest::Approx(0.5 * 1.225 * 50 * 545 * 0.0522 * 50).epsilon(1e-9));
  CHECK(std::abs(a[2] - 43562.6) < 1.0);

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-40, 40);
  for (int i = 0; i < 50; ++i) {
    const Vec3 v(U(rng), U(rng), U(rng));
    const Vec4 q = random_quat(rng);
    CHECK(aero_body(2 * v, q, p).norm() == doctest::Approx(4 * aero_body(v, q, p).norm()).epsilon(1e-9));
    // Same physical situation seen from a rotated inertial frame.
    const Vec4 qz = Vec4(std::cos(0.35), 0, 0, std::sin(0.35));
    const Mat3 Rz = dcm_body_from_inertial(qz);
    const Mat3 Cq = dcm_body_from_inertial(q) * Rz.transpose();
    const Eigen::Quaterniond e(Cq.transpose());
    const Vec4 q2(e.w(), e.x(), e.y(), e.z());
    CHECK((aero_body(Rz * v, q2, p) - aero_body(v, q, p)).norm() <= 1e-10 * aero_body(v, q, p).norm() + 1e-12);
  }
}

TEST_CASE("dynamics examples") {
  VehicleParams p;
  PhysState s;
  s.m = 90000;
  s.r = Vec3(0, 0, 300);
  ControlPhys c;
  c.T = s.m * p.g0;
  const VecX f = dynamics(s.Pack(), c.Pack(), p);
  CHECK(f.segment<3>(4).norm() < 1e-12);
  CHECK(std::abs(f[13]) < 1e-15);

  c.T = 1.54e6;
  CHECK(dynamics(s.Pack(), c.Pack(), p)[0] == doctest::Approx(-475.90).epsilon(0.01 / 475.90));

  const Eigen::Matrix4d W = omega_matrix(Vec3(1, 0, 0));
  CHECK(W.row(0).isApprox(Eigen::RowVector4d(0, -1, 0, 0)));
  CHECK((W + W.transpose()).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("quaternion norm is conserved by the kinematics") {
  envelope::Sampler env(4);
  const VehicleParams p;
  for (int i = 0; i < 100; ++i) {
    const VecX x = env.RawState().head<kNx>();
    const VecX f = dynamics(x, env.RawControl().head<kNu>(), p);
    CHECK(std::abs(x.segment<4>(7).dot(f.segment<4>(7))) < 1e-15);
  }
}

TEST_CASE("dynamics jacobians against finite differences") {
  envelope::Sampler env(5);
  const VehicleParams p;
  for (int i = 0; i < 100; ++i) {
    const VecX x = env.RawState().head<kNx>();
    const VecU u = env.RawControl().head<kNu>();
    MatXX A;
    MatXU B;
    dynamics_jacobians(x, u, p, A, B);
    VectorXd z(kNx + kNu);
    z << x, u;
    const Eigen::MatrixXd fd = oracle::fd_jacobian(
        [&](const VectorXd& w) -> VectorXd { return dynamics(w.head<kNx>(), w.tail<kNu>(), p); }, z);
    Eigen::MatrixXd AB(kNx, kNx + kNu);
    AB << A, B;
    CHECK(oracle::rel_error(AB, fd) < 1e-5);
    CHECK(A.block<3, 3>(1, 4).isApprox(Mat3::Identity()));
  }
  PhysState s;
  s.m = 1e5;
  MatXX A;
  MatXU B;
  dynamics_jacobians(s.Pack(), ControlPhys{1e6, 0, 0, 0, 0}.Pack(), p, A, B);
  CHECK(B(0, 0) == doctest::Approx(-p.alpha_mdot()));
}

TEST_CASE("constraint values") {
  const VehicleParams p;
  PhysState s;
  s.m = 95000;
  s.r = Vec3(0, 0, 500);
  ControlPhys c{1.5e6, 0, 0, 0, 0};
  const ConstraintValues g = constraint_values(s.Pack(), c.Pack(), p);
  CHECK((g.gx.array() < 0).all());

  s.r = Vec3(0, 0, 99);
  CHECK(constraint_values(s.Pack(), c.Pack(), p).trig[0] == doctest::Approx(-1.0));

  c.T = 2.2e6;
  CHECK(constraint_values(s.Pack(), c.Pack(), p).stc[7] == 0.0);

  // Tilt of 10 degrees at 50 m violates the 5 degree triggered bound.
  s.r = Vec3(0, 0, 50);
  s.q = Vec4(std::cos(5 * kDeg), std::sin(5 * kDeg), 0, 0);
  const ConstraintValues t = constraint_values(s.Pack(), c.Pack(), p);
  CHECK(t.trig[0] < 0);
  CHECK(t.stc[3] > 0);
}

TEST_CASE("constraint jacobians against finite differences") {
  envelope::Sampler env(6);
  const ProblemParams pp = ProblemParams::Make(VehicleParams{}, BoundarySet{}, 1e-3);
  const VehicleParams& p = pp.vehicle;
  for (int i = 0; i < 100; ++i) {
    VecXa xa;
    VecUa ua;
    env.Draw(pp, xa, ua);
    const VecX x = xa.head<kNx>();
    const VecU u = ua.head<kNu>();
    ConstraintJacobians J;
    constraint_values(x, u, p, J);
    VectorXd z(kNx + kNu);
    z << x, u;
    auto all = [&](const VectorXd& w) -> VectorXd {
      const ConstraintValues c = constraint_values(w.head<kNx>(), w.tail<kNu>(), p);
      VectorXd out(22);
      out << c.gx, c.gu, c.trig, c.stc;
      return out;
    };
    const Eigen::MatrixXd fd = oracle::fd_jacobian(all, z);
    Eigen::MatrixXd an = Eigen::MatrixXd::Zero(22, kNx + kNu);
    an.block(0, 0, 4, kNx) = J.gx_x;
    an.block(4, kNx, 4, kNu) = J.gu_u;
    an.block(8, 0, 4, kNx) = J.trig_x;
    an.block(12, 0, 10, kNx) = J.stc_x;
    an.block(12, kNx, 10, kNu) = J.stc_u;
    for (int r = 0; r < 22; ++r) {
      const double e = oracle::rel_error(an.row(r), fd.row(r));
      CHECK_MESSAGE(e < 1e-5, "row " << r << " err " << e);
    }
  }
}

TEST_CASE("parameter validation") {
  VehicleParams p;
  CHECK_NOTHROW(p.Validate());
  p.t1_min = 3e6;
  CHECK_THROWS(p.Validate());
}

TEST_CASE("jacobian fault injection is visible and removable") {
  const VehicleParams p;
  PhysState s;
  s.m = 9e4;
  MatXX A0, A1;
  MatXU B;
  dynamics_jacobians(s.Pack(), ControlPhys{1e6, 0, 0, 0, 0}.Pack(), p, A0, B);
  debug::set_jacobian_fault(4, 7, 0.5);
  dynamics_jacobians(s.Pack(), ControlPhys{1e6, 0, 0, 0, 0}.Pack(), p, A1, B);
  debug::clear_jacobian_fault();
  CHECK(A1(4, 7) - A0(4, 7) == doctest::Approx(0.5));
  CHECK_THROWS(debug::set_jacobian_fault(20, 0, 1.0));
}

}  // TEST_SUITE
