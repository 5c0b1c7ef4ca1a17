#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include <iosfwd>
#include <limits>
#include <string>

namespace pdg {

using SpMat = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// min 1/2 x'Px + q'x  s.t.  l <= Ax <= u
struct SparseQP {
  SpMat P;  // upper and lower triangles both stored
  VectorXd q;
  SpMat A;
  VectorXd l, u;

  int n() const { return int(q.size()); }
  int m() const { return int(l.size()); }
  void Validate() const;
  double Objective(const VectorXd& x) const { return 0.5 * x.dot(P * x) + q.dot(x); }
};

enum class QpStatus { Solved, MaxIter, PrimalInfeasible };
const char* to_string(QpStatus s);

struct QpSettings {
  double rho = 0.1;
  double rho_eq_factor = 1e3;
  double rho_min = 1e-6, rho_max = 1e6;
  double sigma = 1e-6;
  double alpha = 1.6;
  double eps_abs = 1e-8, eps_rel = 1e-8;
  double eps_polish_trigger = 1e-5;  // ADMM accuracy at which polishing is attempted
  double eps_pinf = 1e-7;
  int max_iter = 200000;
  int adapt_interval = 50;
  int check_interval = 10;
  int scaling_iters = 10;
  bool polish = true;
  int refine_iters = 5;
  double polish_delta = 1e-9;
  int polish_rounds = 40;  // active-set corrections after the ADMM guess
};

struct QpSolution {
  VectorXd x, y;
  QpStatus status = QpStatus::MaxIter;
  double prim_res = kInf, dual_res = kInf;
  int iterations = 0;
  bool polished = false;
  double objective = 0.0;
};

QpSolution solve_qp(const SparseQP& qp, const QpSettings& settings = {},
                    const QpSolution* warm = nullptr);

// Unscaled residuals of a candidate primal/dual pair.
void qp_residuals(const SparseQP& qp, const VectorXd& x, const VectorXd& y, double& prim,
                  double& dual);

// Text dump, one nonzero per line "i j value"; sections P, q, A, l, u.
void write_triplets(const SparseQP& qp, std::ostream& os);

}  // namespace pdg
