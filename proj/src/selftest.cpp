#include "pdg/selftest.hpp"

#include "pdg/ocp.hpp"

#include <fmt/format.h>

#include <functional>

namespace pdg {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

double uniform(std::mt19937_64& rng, double a, double b) {
  return std::uniform_real_distribution<double>(a, b)(rng);
}

void note_failure(SuiteResult& r, const SelftestOptions& o, int index, std::uint64_t seed, const std::string& what) {
  ++r.failures;
  if (r.failed.size() < o.max_reported) r.failed.push_back(fmt::format("case {} seed {}: {}", index, seed, what));
}

// Worst entry of |analytic - fd| relative to max(|fd|, floor), floor tied to the matrix magnitude.
double compare(const MatrixXd& analytic, const MatrixXd& fd, int& wi, int& wj) {
  const double floor = std::max(1e-6 * fd.cwiseAbs().maxCoeff(), 1e-9);
  double worst = 0.0;
  wi = wj = 0;
  for (int i = 0; i < fd.rows(); ++i)
    for (int j = 0; j < fd.cols(); ++j) {
      const double e = std::abs(analytic(i, j) - fd(i, j)) / std::max(std::abs(fd(i, j)), floor);
      if (e > worst) {
        worst = e;
        wi = i;
        wj = j;
      }
    }
  return worst;
}

MatrixXd central_difference(const std::function<VectorXd(const VectorXd&)>& f, const VectorXd& x0) {
  const VectorXd f0 = f(x0);
  MatrixXd J(f0.size(), x0.size());
  for (int j = 0; j < x0.size(); ++j) {
    auto central = [&](double h) {
      VectorXd xp = x0, xm = x0;
      xp[j] += h;
      xm[j] -= h;
      return VectorXd((f(xp) - f(xm)) / (2.0 * h));
    };
    // Richardson extrapolation of two step sizes.
    const double h = 1e-4 * (1.0 + std::abs(x0[j]));
    J.col(j) = (4.0 * central(0.5 * h) - central(h)) / 3.0;
  }
  return J;
}

VecX random_state(std::mt19937_64& rng, const VehicleParams& v) {
  VecX x;
  x[0] = uniform(rng, v.m_dry, v.m_i);
  x.segment<3>(1) << uniform(rng, -300, 300), uniform(rng, -300, 300), uniform(rng, 1, 600);
  for (int i = 0; i < 3; ++i) x[4 + i] = uniform(rng, -60, 60);
  Vec4 q;
  for (int i = 0; i < 4; ++i) q[i] = uniform(rng, -1, 1);
  x.segment<4>(7) = q.normalized();
  for (int i = 0; i < 3; ++i) x[11 + i] = uniform(rng, -0.5, 0.5);
  return x;
}

VecU random_control(std::mt19937_64& rng, const VehicleParams& v) {
  VecU u;
  u << uniform(rng, 0.5e6, v.t2_max), uniform(rng, -v.delta_e_max, v.delta_e_max),
      uniform(rng, -v.phi_e_max, v.phi_e_max), uniform(rng, -v.delta_b_max, v.delta_b_max),
      uniform(rng, -v.phi_b_max, v.phi_b_max);
  return u;
}

// Finite differences straddling a kink (|angle| or a constraint threshold) are
// meaningless, so sample points keep this distance from every switching surface.
constexpr double kSwitchMargin = 1e-3;

bool clear_of_switches(const ProblemParams& p, const VecX& x, const VecU& u) {
  if (u.tail<4>().cwiseAbs().minCoeff() < kSwitchMargin) return false;
  const ConstraintValues c = normalized_constraints(x, u, p);
  auto clear = [](const auto& v, double shift) { return ((v.array() - shift).abs() >= kSwitchMargin).all(); };
  return clear(c.gx, 0.0) && clear(c.gu, 0.0) && clear(c.trig, p.delta_licq) && clear(c.stc, 0.0);
}

}  // namespace

std::uint64_t case_seed(std::uint64_t master, int suite, int index) {
  std::seed_seq seq{std::uint32_t(master), std::uint32_t(master >> 32), std::uint32_t(suite), std::uint32_t(index)};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (std::uint64_t(out[0]) << 32) | out[1];
}

SuiteResult gradient_suite(const SelftestOptions& o) {
  SuiteResult r;
  r.name = "gradient";
  const ProblemParams p = ProblemParams::Make(VehicleParams{}, BoundarySet{}, 1e-3);
  const VehicleParams& v = p.vehicle;
  constexpr double tol = 1e-5;
  for (int i = 0; i < o.gradient_points; ++i) {
    const std::uint64_t seed = case_seed(o.seed, 1, i);
    std::mt19937_64 rng(seed);
    VecX x;
    VecU u;
    do {
      x = random_state(rng, v);
      u = random_control(rng, v);
    } while (!clear_of_switches(p, x, u));
    int wi, wj;

    MatXX A;
    MatXU B;
    dynamics_jacobians(x, u, v, A, B);
    VectorXd xu(kNx + kNu);
    xu << x, u;
    const MatrixXd Jd = central_difference(
        [&](const VectorXd& z) -> VectorXd { return dynamics(z.head<kNx>(), z.tail<kNu>(), v); }, xu);
    MatrixXd An(kNx, kNx + kNu);
    An << A, B;
    double e = compare(An, Jd, wi, wj);
    r.worst = std::max(r.worst, e);
    ++r.cases;
    if (e > tol)
      note_failure(r, o, i, seed, fmt::format("dynamics d(f[{}])/d({}{}) rel err {:.2e}", wi, wj < kNx ? "x" : "u",
                                              wj < kNx ? wj : wj - kNx, e));

    VecXa xa;
    xa << x, uniform(rng, 0, 1), uniform(rng, 0, 20);
    VecUa ua;
    ua << u, uniform(rng, 1, 30);
    MatXaXa Aa;
    MatXaUa Ba;
    augmented_jacobians(xa, ua, p, Aa, Ba);
    VectorXd za(kNxa + kNua);
    za << xa, ua;
    const MatrixXd Ja = central_difference(
        [&](const VectorXd& z) -> VectorXd { return augmented_rhs(z.head<kNxa>(), z.tail<kNua>(), p); }, za);
    MatrixXd Aan(kNxa, kNxa + kNua);
    Aan << Aa, Ba;
    e = compare(Aan, Ja, wi, wj);
    r.worst = std::max(r.worst, e);
    ++r.cases;
    if (e > tol)
      note_failure(r, o, i, seed, fmt::format("augmented d(f[{}])/d({}{}) rel err {:.2e}", wi, wj < kNxa ? "x" : "u",
                                              wj < kNxa ? wj : wj - kNxa, e));

    Vec4 trig;
    Vec10 stc;
    do {
      for (int j = 0; j < 4; ++j) trig[j] = uniform(rng, -2, 2);
      for (int j = 0; j < 10; ++j) stc[j] = uniform(rng, -2, 2);
    } while (trig.cwiseAbs().minCoeff() < kSwitchMargin || stc.cwiseAbs().minCoeff() < kSwitchMargin);
    MatrixXd dtrig(4, 6), dstc(10, 6);
    for (int a = 0; a < 6; ++a) {
      for (int b = 0; b < 4; ++b) dtrig(b, a) = uniform(rng, -1, 1);
      for (int b = 0; b < 10; ++b) dstc(b, a) = uniform(rng, -1, 1);
    }
    const MatrixXd G = stc_residual_gradient(trig, stc, dtrig, dstc);
    const MatrixXd Js = central_difference(
        [&](const VectorXd& d) -> VectorXd {
          return stc_residual(trig + dtrig * d, stc + dstc * d);
        },
        VectorXd::Zero(6));
    e = compare(G, Js, wi, wj);
    r.worst = std::max(r.worst, e);
    ++r.cases;
    if (e > tol) note_failure(r, o, i, seed, fmt::format("stc_residual d(h[{}])/d(z{}) rel err {:.2e}", wi, wj, e));
  }
  return r;
}

FormulaNode random_formula(std::mt19937_64& rng, int depth, int max_arity, int n_pred) {
  std::uniform_int_distribution<int> pick_pred(0, n_pred - 1);
  if (depth <= 0 || uniform(rng, 0, 1) < 0.2) return FormulaNode::Pred(pick_pred(rng));
  const int kind = std::uniform_int_distribution<int>(0, 3)(rng);
  if (kind == 2) return FormulaNode::Not(random_formula(rng, depth - 1, max_arity, n_pred));
  if (kind == 3)
    return FormulaNode::Implies(random_formula(rng, depth - 1, max_arity, n_pred),
                                random_formula(rng, depth - 1, max_arity, n_pred));
  const int arity = std::uniform_int_distribution<int>(2, max_arity)(rng);
  std::vector<FormulaNode> c;
  for (int i = 0; i < arity; ++i) c.push_back(random_formula(rng, depth - 1, max_arity, n_pred));
  return kind == 0 ? FormulaNode::And(std::move(c)) : FormulaNode::Or(std::move(c));
}

bool boolean_eval(const FormulaNode& node, const VectorXd& values) {
  switch (node.kind) {
    case FormulaNode::Kind::Predicate: return values[node.predicate_index] >= 0.0;
    case FormulaNode::Kind::Negation: return !boolean_eval(node.children.at(0), values);
    case FormulaNode::Kind::Implication:
      return !boolean_eval(node.children.at(0), values) || boolean_eval(node.children.at(1), values);
    case FormulaNode::Kind::Conjunction:
      for (const auto& c : node.children)
        if (!boolean_eval(c, values)) return false;
      return true;
    case FormulaNode::Kind::Disjunction:
      for (const auto& c : node.children)
        if (boolean_eval(c, values)) return true;
      return false;
  }
  return false;
}

SuiteResult dgmsr_suite(const SelftestOptions& o) {
  SuiteResult r;
  r.name = "dgmsr";
  const GmsrParams params;
  for (int shape = 0; shape < o.dgmsr_shapes; ++shape) {
    const std::uint64_t seed = case_seed(o.seed, 2, shape);
    std::mt19937_64 rng(seed);
    const int n = std::uniform_int_distribution<int>(2, 6)(rng);
    const FormulaNode tree = random_formula(rng, 4, 6, n);
    int bad = 0;
    for (int s = 0; s < o.dgmsr_samples; ++s) {
      VectorXd y(n);
      for (int i = 0; i < n; ++i) {
        double v;
        do v = uniform(rng, -10, 10);
        while (std::abs(v) <= 1e-3);
        y[i] = v;
      }
      ++r.cases;
      if ((eval_formula(tree, y, params) >= 0.0) != boolean_eval(tree, y)) ++bad;
    }
    if (bad) note_failure(r, o, shape, seed, fmt::format("{} sign disagreements", bad));
  }

  // Monotonicity and duality of the flat operators.
  for (int s = 0; s < o.dgmsr_samples; ++s) {
    const std::uint64_t seed = case_seed(o.seed, 3, s);
    std::mt19937_64 rng(seed);
    const int n = std::uniform_int_distribution<int>(1, 6)(rng);
    VectorXd y(n);
    for (int i = 0; i < n; ++i) y[i] = uniform(rng, -10, 10);
    const int j = std::uniform_int_distribution<int>(0, n - 1)(rng);
    VectorXd y2 = y;
    y2[j] += uniform(rng, 0, 5);
    ++r.cases;
    if (conj_robustness(y2, params) < conj_robustness(y, params))
      note_failure(r, o, s, seed, "conjunction not monotone");
    ++r.cases;
    if (disj_robustness(y, params) != -conj_robustness(-y, params)) note_failure(r, o, s, seed, "duality violated");
  }
  return r;
}

bool enumerate_qp(const MatrixXd& P, const VectorXd& q, const MatrixXd& A, const VectorXd& l, const VectorXd& u,
                  VectorXd& x) {
  const int n = int(q.size()), m = int(l.size());
  std::vector<int> must, free_rows;
  for (int i = 0; i < m; ++i) (l[i] == u[i] ? must : free_rows).push_back(i);
  const int f = int(free_rows.size());
  // State per free row: 0 inactive, 1 at lower, 2 at upper. Visit by number of active rows.
  for (int size = 0; size <= f; ++size) {
    std::vector<int> state(f, 0);
    std::function<bool(int, int)> visit = [&](int pos, int left) -> bool {
      if (pos == f) {
        if (left) return false;
        std::vector<std::pair<int, double>> act;
        for (int i : must) act.emplace_back(i, l[i]);
        for (int k = 0; k < f; ++k)
          if (state[k]) act.emplace_back(free_rows[k], state[k] == 1 ? l[free_rows[k]] : u[free_rows[k]]);
        const int a = int(act.size());
        if (a > n) return false;
        MatrixXd K = MatrixXd::Zero(n + a, n + a);
        VectorXd rhs(n + a);
        K.topLeftCorner(n, n) = P;
        rhs.head(n) = -q;
        for (int k = 0; k < a; ++k) {
          K.block(n + k, 0, 1, n) = A.row(act[k].first);
          K.block(0, n + k, n, 1) = A.row(act[k].first).transpose();
          rhs[n + k] = act[k].second;
        }
        Eigen::FullPivLU<MatrixXd> lu(K);
        if (lu.rank() < n + a) return false;
        const VectorXd sol = lu.solve(rhs);
        const VectorXd xc = sol.head(n), y = sol.tail(a);
        const VectorXd Ax = A * xc;
        for (int i = 0; i < m; ++i)
          if (Ax[i] < l[i] - 1e-9 * (1 + std::abs(l[i])) || Ax[i] > u[i] + 1e-9 * (1 + std::abs(u[i]))) return false;
        // Multiplier signs: y > 0 pushes toward the upper bound, y < 0 toward the lower.
        for (int k = int(must.size()); k < a; ++k) {
          const bool upper = act[k].second == u[act[k].first];
          if (upper ? y[k] < -1e-10 : y[k] > 1e-10) return false;
        }
        x = xc;
        return true;
      }
      if (f - pos > left && visit(pos + 1, left)) return true;
      if (left > 0) {
        for (int s = 1; s <= 2; ++s) {
          const int row = free_rows[pos];
          if (s == 1 && !std::isfinite(l[row])) continue;
          if (s == 2 && !std::isfinite(u[row])) continue;
          state[pos] = s;
          if (visit(pos + 1, left - 1)) return true;
        }
        state[pos] = 0;
      }
      return false;
    };
    if (visit(0, size)) return true;
  }
  return false;
}

SuiteResult qp_oracle_suite(const SelftestOptions& o) {
  SuiteResult r;
  r.name = "qp_oracle";
  QpSettings qs;
  for (int i = 0; i < o.qp_cases; ++i) {
    const std::uint64_t seed = case_seed(o.seed, 4, i);
    std::mt19937_64 rng(seed);
    const int n = std::uniform_int_distribution<int>(1, 12)(rng);
    const int m = std::uniform_int_distribution<int>(1, std::min(8, n + 2))(rng);
    MatrixXd M(n, n), A(m, n);
    for (int a = 0; a < n; ++a)
      for (int b = 0; b < n; ++b) M(a, b) = uniform(rng, -1, 1);
    for (int a = 0; a < m; ++a)
      for (int b = 0; b < n; ++b) A(a, b) = uniform(rng, -1, 1);
    const MatrixXd P = M * M.transpose() + 0.1 * MatrixXd::Identity(n, n);
    VectorXd q(n), x0(n), l(m), u(m);
    for (int a = 0; a < n; ++a) {
      q[a] = uniform(rng, -5, 5);
      x0[a] = uniform(rng, -1, 1);
    }
    const VectorXd Ax0 = A * x0;
    for (int a = 0; a < m; ++a) {
      const double kind = uniform(rng, 0, 1);
      l[a] = Ax0[a] - uniform(rng, 0, 1);
      u[a] = Ax0[a] + uniform(rng, 0, 1);
      if (kind < 0.15 && m <= n) l[a] = u[a] = Ax0[a];
      else if (kind < 0.35) l[a] = -kInf;
      else if (kind < 0.5) u[a] = kInf;
    }
    VectorXd xo;
    ++r.cases;
    if (!enumerate_qp(P, q, A, l, u, xo)) {
      note_failure(r, o, i, seed, "oracle found no KKT point");
      continue;
    }
    SparseQP qp;
    qp.P = P.sparseView();
    qp.A = A.sparseView();
    qp.q = q;
    qp.l = l;
    qp.u = u;
    const QpSolution sol = solve_qp(qp, qs);
    const double err = sol.x.size() == n ? (sol.x - xo).lpNorm<Eigen::Infinity>() : kInf;
    r.worst = std::max(r.worst, err);
    if (sol.status != QpStatus::Solved || err > 1e-6)
      note_failure(r, o, i, seed, fmt::format("status {} primal error {:.2e}", to_string(sol.status), err));
  }
  return r;
}

std::vector<SuiteResult> run_selftest(const SelftestOptions& o) {
  return {gradient_suite(o), dgmsr_suite(o), qp_oracle_suite(o)};
}

}  // namespace pdg
