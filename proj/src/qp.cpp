#include "pdg/qp.hpp"

#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace pdg {

namespace {

using Trip = Eigen::Triplet<double>;

double inf_norm(const VectorXd& v) { return v.size() ? v.lpNorm<Eigen::Infinity>() : 0.0; }

VectorXd col_inf_norms(const SpMat& M) {
  VectorXd n = VectorXd::Zero(M.cols());
  for (int j = 0; j < M.outerSize(); ++j)
    for (SpMat::InnerIterator it(M, j); it; ++it) n[j] = std::max(n[j], std::abs(it.value()));
  return n;
}

VectorXd row_inf_norms(const SpMat& M) {
  VectorXd n = VectorXd::Zero(M.rows());
  for (int j = 0; j < M.outerSize(); ++j)
    for (SpMat::InnerIterator it(M, j); it; ++it)
      n[it.row()] = std::max(n[it.row()], std::abs(it.value()));
  return n;
}

double limit_scale(double v) {
  if (v < 1e-4) return 1.0;
  return std::min(v, 1e4);
}

VectorXd project(const VectorXd& v, const VectorXd& l, const VectorXd& u) {
  return v.cwiseMax(l).cwiseMin(u);
}

// Ruiz-equilibrated copy of the problem. x = D xs, z = E^-1 zs, y = E ys / c.
struct Scaled {
  SpMat P, A;
  VectorXd q, l, u;
  VectorXd D, E;
  double c = 1.0;
};

Scaled equilibrate(const SparseQP& qp, int iters) {
  Scaled s;
  s.P = qp.P;
  s.A = qp.A;
  s.q = qp.q;
  const int n = qp.n(), m = qp.m();
  s.D = VectorXd::Ones(n);
  s.E = VectorXd::Ones(m);
  for (int it = 0; it < iters; ++it) {
    VectorXd dn = col_inf_norms(s.P).cwiseMax(col_inf_norms(s.A));
    VectorXd en = row_inf_norms(s.A);
    for (int j = 0; j < n; ++j) dn[j] = 1.0 / std::sqrt(limit_scale(dn[j]));
    for (int i = 0; i < m; ++i) en[i] = 1.0 / std::sqrt(limit_scale(en[i]));
    s.P = dn.asDiagonal() * s.P * dn.asDiagonal();
    s.A = en.asDiagonal() * s.A * dn.asDiagonal();
    s.q = dn.cwiseProduct(s.q);
    s.D = s.D.cwiseProduct(dn);
    s.E = s.E.cwiseProduct(en);
    const double pn = n ? col_inf_norms(s.P).mean() : 0.0;
    const double g = 1.0 / limit_scale(std::max(pn, inf_norm(s.q)));
    s.P *= g;
    s.q *= g;
    s.c *= g;
  }
  s.l = s.E.cwiseProduct(qp.l);
  s.u = s.E.cwiseProduct(qp.u);
  return s;
}

struct Residuals {
  double prim, dual, eps_prim, eps_dual;
  // scaled norms for rho balancing
  double prim_s, dual_s, ax_s, z_s, px_s, aty_s, q_s;
};

Residuals residuals(const Scaled& s, const VectorXd& x, const VectorXd& z, const VectorXd& y,
                    double eps_abs, double eps_rel) {
  Residuals r;
  const VectorXd Ax = s.A * x;
  const VectorXd Px = s.P * x;
  const VectorXd Aty = s.A.transpose() * y;
  const VectorXd Einv = s.E.cwiseInverse();
  const VectorXd Dinv = s.D.cwiseInverse();
  r.prim = inf_norm(Einv.cwiseProduct(Ax - z));
  r.dual = inf_norm(Dinv.cwiseProduct(Px + s.q + Aty)) / s.c;
  r.eps_prim = eps_abs + eps_rel * std::max(inf_norm(Einv.cwiseProduct(Ax)), inf_norm(Einv.cwiseProduct(z)));
  r.eps_dual = eps_abs + eps_rel * std::max({inf_norm(Dinv.cwiseProduct(Px)), inf_norm(Dinv.cwiseProduct(Aty)),
                                             inf_norm(Dinv.cwiseProduct(s.q))}) / s.c;
  r.prim_s = inf_norm(Ax - z);
  r.dual_s = inf_norm(Px + s.q + Aty);
  r.ax_s = inf_norm(Ax);
  r.z_s = inf_norm(z);
  r.px_s = inf_norm(Px);
  r.aty_s = inf_norm(Aty);
  r.q_s = inf_norm(s.q);
  return r;
}

bool is_equality(double l, double u) { return std::isfinite(l) && std::isfinite(u) && u - l < 1e-12 * (1 + std::abs(l)); }

bool primal_infeasible(const Scaled& s, const VectorXd& dy, double eps) {
  const double ny = inf_norm(s.E.cwiseProduct(dy));
  if (ny < 1e-12) return false;
  const VectorXd Atdy = s.D.cwiseInverse().cwiseProduct(s.A.transpose() * dy);
  if (inf_norm(Atdy) > eps * ny) return false;
  double support = 0.0;
  for (int i = 0; i < dy.size(); ++i) {
    if (dy[i] > 0.0) {
      if (!std::isfinite(s.u[i])) return false;
      support += s.u[i] * dy[i];
    } else if (dy[i] < 0.0) {
      if (!std::isfinite(s.l[i])) return false;
      support += s.l[i] * dy[i];
    }
  }
  return support < -eps * ny;
}

// Active-set KKT solve on the scaled problem, seeded from the ADMM iterate.
// Degenerate rows (a slack at 1e-7 whose multiplier sits just under its
// penalty weight) are often misguessed, so the set is corrected one row at a
// time: wrong-sign multipliers leave, violated rows join. Returns false if no
// consistent set is found.
bool polish(const Scaled& s, const VectorXd& z, const VectorXd& y, const QpSettings& st,
            VectorXd& x_out, VectorXd& y_out) {
  const int n = int(s.q.size()), m = int(s.l.size());
  std::vector<int> side(m, 2);  // 2 inactive, -1 lower, +1 upper, 0 equality
  for (int i = 0; i < m; ++i) {
    if (is_equality(s.l[i], s.u[i])) side[i] = 0;
    else if (z[i] <= s.l[i] && y[i] < 0.0) side[i] = -1;
    else if (z[i] >= s.u[i] && y[i] > 0.0) side[i] = 1;
  }

  for (int round = 0; round <= st.polish_rounds; ++round) {
    std::vector<int> act;
    std::vector<int> row_map(m, -1);
    for (int i = 0; i < m; ++i)
      if (side[i] != 2) {
        row_map[i] = int(act.size());
        act.push_back(i);
      }
    const int na = int(act.size());

    std::vector<Trip> trips;
    for (int j = 0; j < n; ++j)
      for (SpMat::InnerIterator it(s.P, j); it; ++it) trips.emplace_back(it.row(), j, it.value());
    std::vector<Trip> exact = trips;
    for (int j = 0; j < n; ++j) trips.emplace_back(j, j, st.polish_delta);
    for (int j = 0; j < n; ++j)
      for (SpMat::InnerIterator it(s.A, j); it; ++it) {
        const int a = row_map[it.row()];
        if (a < 0) continue;
        trips.emplace_back(n + a, j, it.value());
        trips.emplace_back(j, n + a, it.value());
        exact.emplace_back(n + a, j, it.value());
        exact.emplace_back(j, n + a, it.value());
      }
    for (int a = 0; a < na; ++a) trips.emplace_back(n + a, n + a, -st.polish_delta);

    SpMat K(n + na, n + na), K0(n + na, n + na);
    K.setFromTriplets(trips.begin(), trips.end());
    K0.setFromTriplets(exact.begin(), exact.end());
    Eigen::SimplicialLDLT<SpMat> ldl(K);
    if (ldl.info() != Eigen::Success) return false;

    VectorXd rhs(n + na);
    rhs.head(n) = -s.q;
    for (int a = 0; a < na; ++a) rhs[n + a] = side[act[a]] == 1 ? s.u[act[a]] : s.l[act[a]];
    VectorXd sol = ldl.solve(rhs);
    for (int it = 0; it < st.refine_iters; ++it) sol += ldl.solve(rhs - K0 * sol);
    if (!sol.allFinite()) return false;

    x_out = sol.head(n);
    y_out = VectorXd::Zero(m);
    for (int a = 0; a < na; ++a) y_out[act[a]] = sol[n + a];

    // One change per round: the worst wrong-sign multiplier, else the worst violated row.
    const double ytol = 1e-9 * std::max(1.0, inf_norm(sol.tail(na)));
    int worst = -1;
    double worst_val = 0.0;
    for (int a = 0; a < na; ++a) {
      const int i = act[a];
      const double wrong = side[i] == -1 ? y_out[i] : side[i] == 1 ? -y_out[i] : 0.0;
      if (wrong > ytol && wrong > worst_val) worst = i, worst_val = wrong;
    }
    bool changed = false;
    if (worst >= 0) {
      side[worst] = 2;
      changed = true;
    } else {
      const VectorXd Ax = s.A * x_out;
      int add = -1, add_side = 2;
      double add_val = 0.0;
      for (int i = 0; i < m; ++i) {
        if (side[i] != 2) continue;
        const double tol = 1e-9 * (1.0 + std::abs(Ax[i]));
        const double below = s.l[i] - Ax[i], above = Ax[i] - s.u[i];
        if (below > tol && below > add_val) add = i, add_side = -1, add_val = below;
        if (above > tol && above > add_val) add = i, add_side = 1, add_val = above;
      }
      if (add >= 0) {
        side[add] = add_side;
        changed = true;
      }
    }
    if (!changed) return true;
  }
  return false;
}

}  // namespace

const char* to_string(QpStatus s) {
  switch (s) {
    case QpStatus::Solved: return "solved";
    case QpStatus::MaxIter: return "max_iter";
    case QpStatus::PrimalInfeasible: return "primal_infeasible";
  }
  return "unknown";
}

void SparseQP::Validate() const {
  const int nn = n(), mm = m();
  if (P.rows() != nn || P.cols() != nn) throw std::invalid_argument("qp: P dimension mismatch");
  if (A.cols() != nn || A.rows() != mm || u.size() != mm) throw std::invalid_argument("qp: A/l/u dimension mismatch");
  for (int i = 0; i < mm; ++i)
    if (!(l[i] <= u[i])) throw std::invalid_argument("qp: l > u");
  if (!q.allFinite()) throw std::invalid_argument("qp: non-finite q");
}

void qp_residuals(const SparseQP& qp, const VectorXd& x, const VectorXd& y, double& prim,
                  double& dual) {
  const VectorXd Ax = qp.A * x;
  prim = inf_norm(Ax - project(Ax, qp.l, qp.u));
  dual = inf_norm(qp.P * x + qp.q + qp.A.transpose() * y);
}

QpSolution solve_qp(const SparseQP& qp, const QpSettings& st, const QpSolution* warm) {
  qp.Validate();
  const int n = qp.n(), m = qp.m();
  const Scaled s = equilibrate(qp, st.scaling_iters);

  VectorXd x = VectorXd::Zero(n), z = VectorXd::Zero(m), y = VectorXd::Zero(m);
  if (warm && warm->x.size() == n && warm->y.size() == m) {
    x = s.D.cwiseInverse().cwiseProduct(warm->x);
    z = project(s.A * x, s.l, s.u);
    y = s.c * s.E.cwiseInverse().cwiseProduct(warm->y);
  }

  double rho = st.rho;
  VectorXd rho_vec(m);
  auto set_rho = [&](double r) {
    for (int i = 0; i < m; ++i) {
      if (!std::isfinite(s.l[i]) && !std::isfinite(s.u[i])) rho_vec[i] = st.rho_min;
      else if (is_equality(s.l[i], s.u[i])) rho_vec[i] = r * st.rho_eq_factor;
      else rho_vec[i] = r;
    }
  };
  set_rho(rho);

  const SpMat At = s.A.transpose();
  SpMat Id(n, n);
  Id.setIdentity();
  Eigen::SimplicialLLT<SpMat> llt;
  auto factor = [&]() {
    SpMat M = s.P + st.sigma * Id + At * rho_vec.asDiagonal() * s.A;
    llt.compute(M);
    if (llt.info() != Eigen::Success) throw std::runtime_error("qp: KKT factorization failed");
  };
  factor();

  QpSolution out;
  auto finish = [&](const VectorXd& xs, const VectorXd& ys, QpStatus status, int iters, bool pol) {
    out.x = s.D.cwiseProduct(xs);
    out.y = s.E.cwiseProduct(ys) / s.c;
    out.status = status;
    out.iterations = iters;
    out.polished = pol;
    qp_residuals(qp, out.x, out.y, out.prim_res, out.dual_res);
    out.objective = qp.Objective(out.x);
    return out;
  };
  auto within = [&](const VectorXd& xu, const VectorXd& yu) {
    double pr, du;
    qp_residuals(qp, xu, yu, pr, du);
    const VectorXd Ax = qp.A * xu;
    const double ep = st.eps_abs + st.eps_rel * inf_norm(Ax);
    const double ed = st.eps_abs + st.eps_rel * std::max({inf_norm(qp.P * xu), inf_norm(qp.A.transpose() * yu), inf_norm(qp.q)});
    return pr <= ep && du <= ed;
  };

  VectorXd y_prev = y;
  int last_polish = -1000000;
  for (int k = 1; k <= st.max_iter; ++k) {
    y_prev = y;
    const VectorXd rhs = st.sigma * x - s.q + At * (rho_vec.cwiseProduct(z) - y);
    const VectorXd xt = llt.solve(rhs);
    const VectorXd zt = s.A * xt;
    const VectorXd zr = st.alpha * zt + (1.0 - st.alpha) * z;
    x = st.alpha * xt + (1.0 - st.alpha) * x;
    const VectorXd zn = project(zr + y.cwiseQuotient(rho_vec), s.l, s.u);
    y += rho_vec.cwiseProduct(zr - zn);
    z = zn;

    const bool check = k % st.check_interval == 0 || k == st.max_iter;
    const bool adapt = st.adapt_interval > 0 && k % st.adapt_interval == 0;
    if (!check && !adapt) continue;

    const Residuals r = residuals(s, x, z, y, st.eps_abs, st.eps_rel);
    if (check) {
      if (r.prim <= r.eps_prim && r.dual <= r.eps_dual) {
        VectorXd xp, yp;
        if (st.polish && polish(s, z, y, st, xp, yp) && within(s.D.cwiseProduct(xp), s.E.cwiseProduct(yp) / s.c))
          return finish(xp, yp, QpStatus::Solved, k, true);
        return finish(x, y, QpStatus::Solved, k, false);
      }
      const Residuals loose = residuals(s, x, z, y, st.eps_polish_trigger, st.eps_polish_trigger);
      if (st.polish && loose.prim <= loose.eps_prim && loose.dual <= loose.eps_dual && k - last_polish >= 200) {
        last_polish = k;
        VectorXd xp, yp;
        if (polish(s, z, y, st, xp, yp) && within(s.D.cwiseProduct(xp), s.E.cwiseProduct(yp) / s.c))
          return finish(xp, yp, QpStatus::Solved, k, true);
      }
      if (primal_infeasible(s, y - y_prev, st.eps_pinf)) return finish(x, y, QpStatus::PrimalInfeasible, k, false);
    }
    if (adapt) {
      const double pn = r.prim_s / std::max({r.ax_s, r.z_s, 1e-30});
      const double dn = r.dual_s / std::max({r.px_s, r.aty_s, r.q_s, 1e-30});
      if (pn > 0.0 && dn > 0.0) {
        const double rho_new = std::clamp(rho * std::sqrt(pn / dn), st.rho_min, st.rho_max);
        if (rho_new > 5.0 * rho || rho_new < 0.2 * rho) {
          rho = rho_new;
          set_rho(rho);
          factor();
        }
      }
    }
  }
  return finish(x, y, QpStatus::MaxIter, st.max_iter, false);
}

void write_triplets(const SparseQP& qp, std::ostream& os) {
  os.precision(17);
  os << "# n " << qp.n() << " m " << qp.m() << "\n";
  auto dump_mat = [&](const char* name, const SpMat& M) {
    os << name << " " << M.nonZeros() << "\n";
    for (int j = 0; j < M.outerSize(); ++j)
      for (SpMat::InnerIterator it(M, j); it; ++it) os << it.row() << " " << j << " " << it.value() << "\n";
  };
  auto dump_vec = [&](const char* name, const VectorXd& v) {
    os << name << " " << v.size() << "\n";
    for (int i = 0; i < v.size(); ++i) os << i << " 0 " << v[i] << "\n";
  };
  dump_mat("P", qp.P);
  dump_vec("q", qp.q);
  dump_mat("A", qp.A);
  dump_vec("l", qp.l);
  dump_vec("u", qp.u);
}

}  // namespace pdg
