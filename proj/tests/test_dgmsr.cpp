#include "oracles.hpp"
#include "pdg/dgmsr.hpp"

#include <doctest.h>

#include <random>

using namespace pdg;
using Eigen::VectorXd;

namespace {

GmsrParams params(double c, int p, std::vector<int> w = {}) {
  GmsrParams g;
  g.c = c;
  g.p = p;
  g.w = std::move(w);
  return g;
}

VectorXd vec(std::initializer_list<double> v) {
  VectorXd out(v.size());
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace

TEST_SUITE("dgmsr") {

TEST_CASE("gmean_zero examples") {
  CHECK(gmean_zero(vec({0, 5}), params(0.01, 1, {1, 1})) == doctest::Approx(0.01).epsilon(1e-12));
  CHECK(gmean_zero(vec({4, 9}), params(1e-8, 1, {1, 1})) == doctest::Approx(6.0).epsilon(1e-7));
  CHECK(std::abs(gmean_zero(vec({2, 2, 2}), params(1e-6, 1, {1, 1, 1})) - 2.0) < 1e-6);
  CHECK_THROWS(gmean_zero(vec({1, std::nan("")}), params(0.1, 1)));
  CHECK_THROWS(gmean_zero(vec({-1, 1}), params(0.1, 1)));
}

TEST_CASE("gmean_p examples") {
  CHECK(gmean_p(vec({0, 0, 0}), params(0.3, 2)) == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(std::abs(gmean_p(vec({1, 1}), params(1e-8, 1, {1, 1})) - 1.0) < 1e-6);
  CHECK(std::abs(gmean_p(vec({4, 0}), params(1e-8, 2, {3, 1})) - std::sqrt(12.0)) < 1e-4);
}

TEST_CASE("param validation") {
  CHECK_THROWS(params(0.0, 1).Validate(2));
  CHECK_THROWS(params(0.1, 0).Validate(2));
  CHECK_THROWS(params(0.1, 1, {1, 0}).Validate(2));
  CHECK_THROWS(params(0.1, 1, {1, 1, 1}).Validate(2));
  CHECK_NOTHROW(params(0.1, 1, {2, 3}).Validate(2));
}

TEST_CASE("conjunction and disjunction examples") {
  const GmsrParams g = params(1e-4, 1, {1, 1});
  const double pos = conj_robustness(vec({1, 1}), g);
  CHECK(pos == doctest::Approx(std::pow(1e-8 + 1, 0.25) - 1e-2).epsilon(1e-9));
  const double neg = conj_robustness(vec({1, -1}), g);
  CHECK(neg == doctest::Approx(1e-2 - std::sqrt(1e-4 + 0.5)).epsilon(1e-9));
  CHECK(std::abs(conj_robustness(vec({0, 0}), g)) < 1e-12);

  CHECK(disj_robustness(vec({-1, -1}), g) == doctest::Approx(-conj_robustness(vec({1, 1}), g)));
  CHECK(disj_robustness(vec({1, -5}), g) > 0.0);
  CHECK(std::abs(disj_robustness(vec({0, -3}), g)) < 1e-12);
}

TEST_CASE("conjunction gradient matches finite differences away from zero") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> U(-3, 3);
  const GmsrParams g = params(1e-2, 2);
  for (int trial = 0; trial < 200; ++trial) {
    VectorXd y(4);
    for (int i = 0; i < 4; ++i) y[i] = U(rng);
    VectorXd grad;
    conj_robustness(y, g, &grad);
    // Near a sign change the curvature length scale is far below any fixed step, so take the best of several.
    double best = 1e300;
    for (double step : {1e-5, 1e-6, 1e-7}) {
      const Eigen::MatrixXd fd = oracle::fd_jacobian(
          [&](const VectorXd& z) { return VectorXd::Constant(1, conj_robustness(z, g)); }, y, step);
      best = std::min(best, oracle::rel_error(grad.transpose(), fd, 1e-3));
    }
    CAPTURE(trial);
    CHECK(best < 1e-5);
  }
}

TEST_CASE("conjunction gradient at a zero entry is the limit of one-sided quotients") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> U(-3, 3);
  const GmsrParams g = params(1e-2, 2);
  for (int trial = 0; trial < 60; ++trial) {
    VectorXd y(4);
    for (int i = 0; i < 4; ++i) y[i] = U(rng);
    const int j = trial % 4;
    y[j] = 0.0;
    VectorXd grad;
    const double f0 = conj_robustness(y, g, &grad);
    for (double side : {1.0, -1.0}) {
      auto err = [&](double h) {
        VectorXd z = y;
        z[j] = side * h;
        return (conj_robustness(z, g) - f0) / (side * h) - grad[j];
      };
      // The quotient error must shrink at least linearly with the step.
      const double e1 = err(1e-8), e2 = err(5e-9);
      CAPTURE(trial);
      CAPTURE(side);
      CHECK(std::abs(e2) <= 0.55 * std::abs(e1) + 1e-9);
    }
  }
}

TEST_CASE("formula evaluation") {
  const GmsrParams g;
  CHECK(eval_formula(FormulaNode::Pred(0), vec({3.7}), g) == doctest::Approx(3.7));
  const FormulaNode tree = FormulaNode::Or({FormulaNode::And({FormulaNode::Pred(0), FormulaNode::Pred(1)}),
                                            FormulaNode::And({FormulaNode::Pred(2), FormulaNode::Pred(3)})});
  CHECK(eval_formula(tree, vec({1, 1, -1, -1}), g) > 0.0);
  CHECK(eval_formula(tree, vec({1, -1, -1, 1}), g) < 0.0);

  FormulaNode bad;
  bad.kind = FormulaNode::Kind::Negation;
  CHECK_THROWS_AS(eval_formula(bad, vec({1}), g), FormulaError);
  CHECK_THROWS_AS(eval_formula(FormulaNode::Pred(4), vec({1}), g), FormulaError);
  CHECK_THROWS_AS(eval_formula(FormulaNode::And({FormulaNode::Pred(0)}), vec({1}), g), FormulaError);
}

TEST_CASE("implication follows not-a or b") {
  const GmsrParams g;
  const FormulaNode imp = FormulaNode::Implies(FormulaNode::Pred(0), FormulaNode::Pred(1));
  CHECK(eval_formula(imp, vec({-1, -1}), g) > 0.0);
  CHECK(eval_formula(imp, vec({1, -1}), g) < 0.0);
  CHECK(eval_formula(imp, vec({1, 1}), g) > 0.0);
}

TEST_CASE("stc residual examples") {
  Vec10 stc = Vec10::Constant(-0.5);
  Vec4 trig(1, 1, 1, 1);
  stc[0] = 3.0;
  CHECK(stc_residual(trig, stc)[0] == 0.0);

  trig << -1, 1, 1, 1;
  stc = Vec10::Constant(-0.5);
  CHECK(stc_residual(trig, stc)[0] == 0.0);

  trig << -2, 1, 1, 1;
  stc = Vec10::Zero();
  stc[0] = 1.0;
  CHECK(stc_residual(trig, stc)[0] == doctest::Approx(4.0));

  trig << 1, 1, -1, 1;
  stc = Vec10::Zero();
  stc[6] = 1.0;
  CHECK(stc_residual(trig, stc)[2] == 0.0);
}

TEST_CASE("stc residual gradient") {
  Vec4 trig(-2, 1, 1, 1);
  Vec10 stc = Vec10::Zero();
  stc[0] = 1.0;
  Eigen::Matrix4d dt;
  Eigen::Matrix<double, 4, 10> ds;
  stc_residual_partials(trig, stc, dt, ds);
  CHECK(ds(0, 0) == doctest::Approx(8.0));

  trig << 1, 1, 1, -1;
  const auto zero = stc_residual_gradient(Vec4(1, 1, -1, -1), Vec10::Constant(-1), Eigen::MatrixXd::Ones(4, 3),
                                          Eigen::MatrixXd::Ones(10, 3));
  CHECK(zero.cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS(stc_residual_gradient(trig, stc, Eigen::MatrixXd::Ones(3, 2), Eigen::MatrixXd::Ones(10, 2)));
  CHECK_THROWS(stc_residual_gradient(trig, stc, Eigen::MatrixXd::Ones(4, 2), Eigen::MatrixXd::Ones(10, 3)));

  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> U(-2, 2);
  for (int trial = 0; trial < 100; ++trial) {
    Vec4 t;
    Vec10 s;
    for (int i = 0; i < 4; ++i) t[i] = U(rng);
    for (int i = 0; i < 10; ++i) s[i] = U(rng);
    Eigen::MatrixXd Dt(4, 5), Ds(10, 5);
    for (int i = 0; i < Dt.size(); ++i) Dt(i) = U(rng);
    for (int i = 0; i < Ds.size(); ++i) Ds(i) = U(rng);
    const Eigen::MatrixXd G = stc_residual_gradient(t, s, Dt, Ds);
    const Eigen::MatrixXd fd = oracle::fd_jacobian(
        [&](const VectorXd& z) -> VectorXd { return stc_residual(t + Dt * z, s + Ds * z); }, VectorXd::Zero(5));
    CHECK(oracle::rel_error(G, fd) < 1e-6);
  }
}

TEST_CASE("stc residual is nonnegative and vanishes exactly on satisfaction") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> U(-1, 1);
  for (int trial = 0; trial < 2000; ++trial) {
    Vec4 t;
    Vec10 s;
    for (int i = 0; i < 4; ++i) t[i] = U(rng);
    for (int i = 0; i < 10; ++i) s[i] = U(rng);
    const Vec4 h = stc_residual(t, s);
    CHECK((h.array() >= 0.0).all());
    const bool cons[4] = {(s.head<5>().array() <= 0).all(), s[5] <= 0, s[6] <= 0 && s[7] <= 0,
                          s[8] <= 0 && s[9] <= 0};
    const bool trig[4] = {t[0] < 0, t[1] < 0, t[2] < 0 && t[3] < 0, t[2] > 0 || t[3] > 0};
    for (int j = 0; j < 4; ++j) CHECK((h[j] == 0.0) == (!trig[j] || cons[j]));
  }
}

}  // TEST_SUITE
