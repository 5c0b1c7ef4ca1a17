#include "pdg/scp.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

namespace pdg {

void ScpConfig::Validate() const {
  auto need = [](bool ok, const char* msg) {
    if (!ok) throw std::invalid_argument(msg);
  };
  need(K >= 2, "scp: K must be >= 2");
  need(0.0 < beta1 && beta1 < beta2 && beta2 < 1.0, "scp: need 0 < beta1 < beta2 < 1");
  need(sigma3 < 1.0 && 1.0 < sigma2 && sigma2 < sigma1, "scp: need sigma3 < 1 < sigma2 < sigma1");
  need(sigma3 > 0.0, "scp: sigma3 must be positive");
  need(eps_licq > 0.0 && s_min > 0.0, "scp: eps_licq and s_min must be positive");
  need(w_eq_dyn > 0.0 && w_prox_init > 0.0, "scp: weights must be positive");
  need(eps_opt > 0.0 && eps_feas > 0.0 && max_iter > 0 && substeps > 0, "scp: tolerances and counts must be positive");
  need(delta_licq >= 0.0 && y_range > 0.0 && tf_guess > 0.0, "scp: delta_licq >= 0, y_range > 0, tf_guess > 0");
}

const char* to_string(ScpStatus s) {
  switch (s) {
    case ScpStatus::Converged: return "converged";
    case ScpStatus::MaxIter: return "max_iter";
    case ScpStatus::SubproblemFailure: return "subproblem_failure";
  }
  return "unknown";
}

double time_cost(const Trajectory& z, const GridSpec& grid) {
  const std::vector<double> w = trapezoid_weights(grid);
  double t = 0.0;
  for (int k = 0; k < z.K(); ++k) t += w[k] * z.u[k][iu::s];
  return t;
}

double max_defect(const Trajectory& z, const std::vector<LinearizedSegment>& segs, const ScalingMap& sc) {
  double d = 0.0;
  for (size_t k = 0; k < segs.size(); ++k)
    d = std::max(d, (z.x[k + 1] - segs[k].x_end).cwiseQuotient(sc.x_scale).lpNorm<Eigen::Infinity>());
  return d;
}

double max_y_growth(const Trajectory& z, const std::vector<LinearizedSegment>& segs) {
  double g = 0.0;
  for (size_t k = 0; k < segs.size(); ++k) g = std::max(g, segs[k].x_end[ix::y] - z.x[k][ix::y]);
  return g;
}

double nonlinear_cost(const Trajectory& z, const std::vector<LinearizedSegment>& segs,
                      const ScalingMap& sc, const GridSpec& grid, double w_eq) {
  double pen = 0.0;
  for (size_t k = 0; k < segs.size(); ++k)
    pen += (z.x[k + 1] - segs[k].x_end).cwiseQuotient(sc.x_scale).lpNorm<1>();
  return time_cost(z, grid) + w_eq * pen;
}

double linearized_cost(const Trajectory& z, const Trajectory& z_ref,
                       const std::vector<LinearizedSegment>& segs_ref, double w_prox,
                       const ScalingMap& sc, const GridSpec& grid, double w_eq) {
  double pen = 0.0, prox = 0.0;
  for (size_t k = 0; k < segs_ref.size(); ++k) {
    const LinearizedSegment& s = segs_ref[k];
    const VecXa d = s.A * z.x[k] + s.B_minus * z.u[k] + s.B_plus * z.u[k + 1] + s.w - z.x[k + 1];
    pen += d.cwiseQuotient(sc.x_scale).lpNorm<1>();
  }
  for (int k = 0; k < z.K(); ++k) {
    prox += (z.x[k] - z_ref.x[k]).cwiseQuotient(sc.x_scale).squaredNorm();
    prox += (z.u[k] - z_ref.u[k]).cwiseQuotient(sc.u_scale).squaredNorm();
  }
  return time_cost(z, grid) + w_eq * pen + 0.5 * w_prox * prox;
}

WeightUpdate adaptive_weight(double w_prox, double J_nl_j, double J_nl_next, double J_lin_next,
                             const ScpConfig& cfg) {
  WeightUpdate r;
  const double pred = J_nl_j - J_lin_next;
  const double actual = J_nl_j - J_nl_next;
  if (pred < -1e-10) {
    r.internal_error = true;
    r.accepted = false;
    r.w_prox = w_prox;
    r.ratio = 0.0;
    return r;
  }
  if (pred < 1e-14) {
    r.degenerate = true;
    r.accepted = true;
    r.w_prox = w_prox;
    r.ratio = 1.0;
    return r;
  }
  r.ratio = actual / pred;
  if (r.ratio <= cfg.beta1) {
    r.accepted = false;
    r.w_prox = w_prox * cfg.sigma1;
  } else if (r.ratio < cfg.beta2) {
    r.accepted = true;
    r.w_prox = w_prox * cfg.sigma2;
  } else {
    r.accepted = true;
    r.w_prox = w_prox * cfg.sigma3;
  }
  return r;
}

ScpResult solve(const ProblemParams& p, const ScpConfig& cfg, const IterationCallback& on_iter) {
  ProblemParams pp = p;
  pp.delta_licq = cfg.delta_licq;
  return solve_from(pp, cfg, initial_guess(pp, cfg.K, cfg.tf_guess), on_iter);
}

ScpResult solve_from(const ProblemParams& p_in, const ScpConfig& cfg, const Trajectory& start,
                     const IterationCallback& on_iter) {
  cfg.Validate();
  ProblemParams p = p_in;
  p.delta_licq = cfg.delta_licq;
  ScpResult res;
  res.grid = GridSpec::Uniform(cfg.K, cfg.substeps);
  res.scaling = make_scaling(p, start, cfg.y_range);
  res.z = start;
  res.segments = discretize_all(res.z, res.grid, p);
  const ScalingMap& sc = res.scaling;

  double J = nonlinear_cost(res.z, res.segments, sc, res.grid, cfg.w_eq_dyn);
  double w = cfg.w_prox_init;
  int rejections = 0;
  QpSolution warm;
  bool have_warm = false;
  QpSettings qs;

  for (int it = 0; it < cfg.max_iter; ++it) {
    IterationRecord rec;
    rec.index = it;
    rec.J_nl_before = J;
    rec.w_prox = w;

    const SparseQP qp = assemble_subproblem(res.z, res.segments, {cfg.w_eq_dyn, w, cfg.eps_licq, cfg.s_min}, p, sc, res.grid);
    const QpSolution sol = solve_qp(qp, qs, have_warm ? &warm : nullptr);
    rec.qp_iterations = sol.iterations;
    rec.qp_status = to_string(sol.status);
    if (sol.status == QpStatus::PrimalInfeasible) {
      res.history.push_back(rec);
      if (on_iter) on_iter(rec);
      res.status = ScpStatus::SubproblemFailure;
      res.message = "subproblem reported primal infeasibility";
      return res;
    }

    bool ok = sol.status == QpStatus::Solved;
    Trajectory cand;
    std::vector<LinearizedSegment> cand_segs;
    double Jc = J, Jl = J;
    if (ok) {
      cand = extract_trajectory(sol.x, cfg.K, sc);
      try {
        cand_segs = discretize_all(cand, res.grid, p);
        Jc = nonlinear_cost(cand, cand_segs, sc, res.grid, cfg.w_eq_dyn);
        Jl = linearized_cost(cand, res.z, res.segments, w, sc, res.grid, cfg.w_eq_dyn);
        ok = std::isfinite(Jc);
      } catch (const PropagationError& e) {
        spdlog::warn("iteration {}: candidate propagation failed: {}", it, e.what());
        ok = false;
      }
    }

    WeightUpdate upd;
    if (ok) {
      upd = adaptive_weight(w, J, Jc, Jl, cfg);
      if (upd.internal_error) upd.w_prox = w * cfg.sigma1;
    } else {
      upd.accepted = false;
      upd.w_prox = w * cfg.sigma1;
    }
    rec.J_nl_after = Jc;
    rec.J_lin = Jl;
    rec.ratio = upd.ratio;
    rec.accepted = upd.accepted;
    if (ok) {
      rec.max_defect = max_defect(cand, cand_segs, sc);
      rec.max_y_growth = max_y_growth(cand, cand_segs);
      rec.final_time = cand.x.back()[ix::t];
    }
    res.history.push_back(rec);
    if (on_iter) on_iter(rec);
    spdlog::info("iter {:3d} J_nl {:.6f} J_lin {:.6f} defect {:.2e} r {:+.3f} w_prox {:.3g} qp {} {}", it, J, Jl,
                 rec.max_defect, rec.ratio, w, sol.iterations, rec.accepted ? "accepted" : "rejected");

    if (upd.accepted) {
      const bool converged = rec.max_defect <= cfg.eps_feas && std::abs(J - Jl) <= cfg.eps_opt &&
                             rec.max_y_growth <= cfg.eps_licq + 1e-9;
      res.z = std::move(cand);
      res.segments = std::move(cand_segs);
      J = Jc;
      warm = sol;
      have_warm = true;
      rejections = 0;
      ++res.accepted;
      if (converged) {
        res.status = ScpStatus::Converged;
        res.message = "converged";
        return res;
      }
    } else {
      ++rejections;
      if (rejections >= 3 && upd.w_prox > cfg.w_prox_max) {
        res.status = ScpStatus::SubproblemFailure;
        res.message = "repeated rejections with proximal weight above limit";
        return res;
      }
    }
    w = upd.w_prox;
  }
  res.status = ScpStatus::MaxIter;
  res.message = "iteration limit reached";
  return res;
}

}  // namespace pdg
