#include "oracles.hpp"
#include "pdg/scp.hpp"

#include <doctest.h>

#include <fstream>
#include <random>
#include <sstream>
#include <string>

using namespace pdg;
using Eigen::MatrixXd;

namespace {

SparseQP dense_qp(const MatrixXd& P, const VectorXd& q, const MatrixXd& A, const VectorXd& l, const VectorXd& u) {
  SparseQP qp;
  qp.P = P.sparseView();
  qp.q = q;
  qp.A = A.sparseView();
  qp.l = l;
  qp.u = u;
  return qp;
}

struct RandomQp {
  MatrixXd P, A;
  VectorXd q, l, u;
};

RandomQp random_qp(std::mt19937_64& rng, int n, int m) {
  std::normal_distribution<double> N;
  RandomQp r;
  MatrixXd M(n, n);
  for (int i = 0; i < M.size(); ++i) M(i) = N(rng);
  r.P = M * M.transpose() + 0.5 * MatrixXd::Identity(n, n);
  r.q.resize(n);
  for (int i = 0; i < n; ++i) r.q[i] = N(rng);
  r.A.resize(m, n);
  for (int i = 0; i < r.A.size(); ++i) r.A(i) = N(rng);
  // Bounds around a known interior point keep the problem feasible.
  VectorXd x0(n);
  for (int i = 0; i < n; ++i) x0[i] = 0.3 * N(rng);
  const VectorXd a = r.A * x0;
  r.l.resize(m);
  r.u.resize(m);
  for (int i = 0; i < m; ++i) {
    const int kind = std::uniform_int_distribution<int>(0, 3)(rng);
    const double w1 = std::abs(N(rng)) * 0.5, w2 = std::abs(N(rng)) * 0.5;
    r.l[i] = kind == 1 ? -kInf : a[i] - w1;
    r.u[i] = kind == 2 ? kInf : a[i] + w2;
    if (kind == 3 && i == 0) r.l[i] = r.u[i] = a[i];
  }
  return r;
}

// Reads the write_triplets format back.
SparseQP read_triplets(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string tok;
  int n = 0, m = 0;
  in >> tok >> tok >> n >> tok >> m;
  auto read_section = [&](const char* name, int rows, int cols) {
    std::string got;
    int count = 0;
    in >> got >> count;
    REQUIRE(got == name);
    std::vector<Eigen::Triplet<double>> t;
    for (int i = 0; i < count; ++i) {
      std::string r, c, v;
      in >> r >> c >> v;
      t.emplace_back(std::stoi(r), std::stoi(c), std::stod(v));
    }
    SpMat M(rows, cols);
    M.setFromTriplets(t.begin(), t.end());
    return M;
  };
  SparseQP qp;
  qp.P = read_section("P", n, n);
  qp.q = VectorXd(read_section("q", n, 1));
  qp.A = read_section("A", m, n);
  qp.l = VectorXd(read_section("l", m, 1));
  qp.u = VectorXd(read_section("u", m, 1));
  return qp;
}

}  // namespace

TEST_SUITE("qp") {

TEST_CASE("small examples") {
  MatrixXd P = MatrixXd::Identity(2, 2);
  VectorXd q(2);
  q << -1, -1;
  MatrixXd A(1, 2);
  A << 1, 1;
  VectorXd l(1), u(1);
  l << -kInf;
  u << 1;
  QpSolution s = solve_qp(dense_qp(P, q, A, l, u));
  REQUIRE(s.status == QpStatus::Solved);
  CHECK(std::abs(s.x[0] - 0.5) < 1e-7);
  CHECK(std::abs(s.x[1] - 0.5) < 1e-7);
  CHECK(s.objective == doctest::Approx(-0.75).epsilon(1e-7));

  // Box-only: projection of the unconstrained minimizer.
  MatrixXd I = MatrixXd::Identity(2, 2);
  VectorXd lb(2), ub(2);
  lb << 0, 0;
  ub << 0.2, 5;
  s = solve_qp(dense_qp(P, q, I, lb, ub));
  REQUIRE(s.status == QpStatus::Solved);
  CHECK(std::abs(s.x[0] - 0.2) < 1e-7);
  CHECK(std::abs(s.x[1] - 1.0) < 1e-7);
}

TEST_CASE("primal infeasibility is detected") {
  MatrixXd P = MatrixXd::Identity(1, 1);
  VectorXd q = VectorXd::Zero(1);
  MatrixXd A(2, 1);
  A << 1, 1;
  VectorXd l(2), u(2);
  l << 1, -kInf;
  u << kInf, 0;
  CHECK(solve_qp(dense_qp(P, q, A, l, u)).status == QpStatus::PrimalInfeasible);
}

TEST_CASE("invalid problems throw") {
  MatrixXd P = MatrixXd::Identity(2, 2);
  VectorXd q = VectorXd::Zero(2);
  MatrixXd A = MatrixXd::Identity(2, 2);
  VectorXd l(2), u(2);
  l << 1, 0;
  u << 0, 1;
  CHECK_THROWS(solve_qp(dense_qp(P, q, A, l, u)));
  CHECK_THROWS(solve_qp(dense_qp(P, VectorXd::Zero(3), A, u, u)));
}

TEST_CASE("agrees with the active-set oracle") {
  std::mt19937_64 rng(21);
  int checked = 0;
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + trial % 4, m = 2 + trial % 5;
    const RandomQp r = random_qp(rng, n, m);
    VectorXd xo;
    REQUIRE(oracle::active_set_oracle(r.P, r.q, r.A, r.l, r.u, xo));
    const QpSolution s = solve_qp(dense_qp(r.P, r.q, r.A, r.l, r.u));
    REQUIRE(s.status == QpStatus::Solved);
    const double err = (s.x - xo).cwiseAbs().maxCoeff() / std::max(1.0, xo.cwiseAbs().maxCoeff());
    CAPTURE(trial);
    CHECK(err < 1e-6);
    ++checked;
  }
  CHECK(checked == 60);
}

TEST_CASE("deterministic and invariant to objective scaling") {
  std::mt19937_64 rng(5);
  const RandomQp r = random_qp(rng, 5, 6);
  const QpSolution a = solve_qp(dense_qp(r.P, r.q, r.A, r.l, r.u));
  const QpSolution b = solve_qp(dense_qp(r.P, r.q, r.A, r.l, r.u));
  CHECK((a.x - b.x).cwiseAbs().maxCoeff() == 0.0);
  CHECK(a.iterations == b.iterations);
  const QpSolution c = solve_qp(dense_qp(100.0 * r.P, 100.0 * r.q, r.A, r.l, r.u));
  CHECK((a.x - c.x).cwiseAbs().maxCoeff() < 1e-6);
  // Warm start from the answer needs no more work than a cold start.
  const QpSolution w = solve_qp(dense_qp(r.P, r.q, r.A, r.l, r.u), {}, &a);
  CHECK(w.iterations <= a.iterations);
  CHECK((w.x - a.x).cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("triplet dump lists every section") {
  MatrixXd P = MatrixXd::Identity(2, 2);
  VectorXd q(2);
  q << 1, 2;
  VectorXd l(2), u(2);
  l << 0, 0;
  u << 1, 1;
  std::ostringstream os;
  write_triplets(dense_qp(P, q, P, l, u), os);
  const std::string s = os.str();
  for (const char* sec : {"P", "q", "A", "l", "u"}) CHECK(s.find(sec) != std::string::npos);
}

TEST_CASE("subproblem layout and slack behaviour") {
  const ProblemParams p = ProblemParams::Make(VehicleParams{}, BoundarySet{}, 1e-3);
  SubproblemLayout L{15};
  CHECK(L.n() == 778);
  CHECK(L.nu_minus(13) + kNxa == 778);
  CHECK(L.u(0) == 15 * kNxa);

  const GridSpec g = GridSpec::Uniform(15, 16);
  const std::vector<double> tw = trapezoid_weights(g);
  double sum = 0;
  for (double w : tw) sum += w;
  CHECK(sum == doctest::Approx(1.0));
  CHECK(tw.front() == doctest::Approx(0.5 / 14));

  const Trajectory z = initial_guess(p, 15, 21.0);
  const ScalingMap sc = make_scaling(p, z, 0.01);
  const std::vector<LinearizedSegment> segs = discretize_all(z, g, p);
  const SparseQP qp = assemble_subproblem(z, segs, {}, p, sc, g);
  CHECK(qp.n() == 778);
  const VectorXd ref = pack_trajectory(z, sc);
  CHECK(time_cost(z, g) == doctest::Approx(21.0));
  const Trajectory back = extract_trajectory(ref, 15, sc);
  for (int k = 0; k < 15; ++k) CHECK((back.x[k] - z.x[k]).cwiseAbs().maxCoeff() < 1e-8);

  // Rows for the reference's own dynamics plus exact slacks are satisfied.
  VectorXd v = ref;
  for (int k = 0; k < 14; ++k) {
    const VecXa d = (segs[k].x_end - z.x[k + 1]).cwiseQuotient(sc.x_scale);
    v.segment<kNxa>(L.nu_plus(k)) = d.cwiseMax(0.0);
    v.segment<kNxa>(L.nu_minus(k)) = (-d).cwiseMax(0.0);
  }
  const VectorXd Av = qp.A * v;
  for (int r = 0; r < 14 * kNxa; ++r) CHECK(std::abs(Av[r] - qp.l[r]) < 1e-9);

  CHECK_THROWS(assemble_subproblem(z, std::vector<LinearizedSegment>(3), {}, p, sc, g));
}

TEST_CASE("degenerate L1 slack subproblem is solved and polished") {
  // A paper-scenario subproblem where one slack sits near 3e-7 with its
  // multiplier just below the penalty weight; plain ADMM stalls on it.
  // Reference objective from an interior-point solver run offline.
  const SparseQP qp = read_triplets(PDG_SOURCE_DIR "/tests/data/degenerate_slack_qp.txt");
  REQUIRE(qp.n() == 778);
  const QpSolution s = solve_qp(qp);
  CHECK(s.status == QpStatus::Solved);
  CHECK(s.polished);
  CHECK(s.prim_res < 1e-8);
  CHECK(s.dual_res < 1e-8);
  CHECK(s.objective == doctest::Approx(-14647.054706876375).epsilon(1e-9));
}

TEST_CASE("slacks vanish at the optimum of a dynamically consistent subproblem") {
  // Reference already satisfying the linearized dynamics with a floating final
  // state: the L1 price makes any nonzero slack strictly suboptimal.
  MatrixXd P = MatrixXd::Identity(3, 3);
  VectorXd q(3);
  q << 0, 50, 50;  // x, nu+, nu-
  MatrixXd A(3, 3);
  A << 1, -1, 1,  //
      0, 1, 0,    //
      0, 0, 1;
  VectorXd l(3), u(3);
  l << 0.3, 0, 0;
  u << 0.3, kInf, kInf;
  const QpSolution s = solve_qp(dense_qp(P, q, A, l, u));
  REQUIRE(s.status == QpStatus::Solved);
  CHECK(std::abs(s.x[0] - 0.3) < 1e-8);
  CHECK(std::abs(s.x[1]) < 1e-8);
  CHECK(std::abs(s.x[2]) < 1e-8);
}

}  // TEST_SUITE
