#include "pdg/subproblem.hpp"

#include <cmath>
#include <vector>

namespace pdg {

std::vector<double> trapezoid_weights(const GridSpec& grid) {
  const int K = grid.K();
  std::vector<double> w(K, 0.0);
  for (int k = 0; k + 1 < K; ++k) {
    const double h = grid.tau[k + 1] - grid.tau[k];
    w[k] += 0.5 * h;
    w[k + 1] += 0.5 * h;
  }
  return w;
}

SparseQP assemble_subproblem(const Trajectory& z_ref, const std::vector<LinearizedSegment>& segs,
                             const SubproblemWeights& wt, const ProblemParams& p,
                             const ScalingMap& sc, const GridSpec& grid) {
  const int K = z_ref.K();
  if (int(segs.size()) != K - 1 || grid.K() != K) throw std::invalid_argument("assemble_subproblem: dimension mismatch");
  for (const auto& s : segs)
    if (!s.A.allFinite() || !s.B_minus.allFinite() || !s.B_plus.allFinite() || !s.w.allFinite())
      throw std::invalid_argument("assemble_subproblem: NaN in segment matrices");

  const SubproblemLayout L{K};
  const int n = L.n();
  std::vector<Eigen::Triplet<double>> tr;
  std::vector<double> lo, hi;
  auto add_row = [&](double l, double u) {
    lo.push_back(l);
    hi.push_back(u);
    return int(lo.size()) - 1;
  };

  const VecXa Dx = sc.x_scale, cx = sc.x_offset;
  const VecUa Du = sc.u_scale, cu = sc.u_offset;
  const VecXa Dxi = Dx.cwiseInverse();

  // linearized dynamics with slack split
  for (int k = 0; k + 1 < K; ++k) {
    const LinearizedSegment& s = segs[k];
    const MatXaXa Ax = Dxi.asDiagonal() * s.A * Dx.asDiagonal();
    const MatXaUa Bm = Dxi.asDiagonal() * s.B_minus * Du.asDiagonal();
    const MatXaUa Bp = Dxi.asDiagonal() * s.B_plus * Du.asDiagonal();
    const VecXa c = Dxi.cwiseProduct(s.A * cx + s.B_minus * cu + s.B_plus * cu + s.w - cx);
    for (int r = 0; r < kNxa; ++r) {
      const int row = add_row(-c[r], -c[r]);
      for (int j = 0; j < kNxa; ++j)
        if (Ax(r, j) != 0.0) tr.emplace_back(row, L.x(k) + j, Ax(r, j));
      for (int j = 0; j < kNua; ++j) {
        if (Bm(r, j) != 0.0) tr.emplace_back(row, L.u(k) + j, Bm(r, j));
        if (Bp(r, j) != 0.0) tr.emplace_back(row, L.u(k + 1) + j, Bp(r, j));
      }
      tr.emplace_back(row, L.x(k + 1) + r, -1.0);
      tr.emplace_back(row, L.nu_plus(k) + r, -1.0);
      tr.emplace_back(row, L.nu_minus(k) + r, 1.0);
    }
  }
  for (int k = 0; k + 1 < K; ++k)
    for (int r = 0; r < kNxa; ++r) {
      tr.emplace_back(add_row(0.0, kInf), L.nu_plus(k) + r, 1.0);
      tr.emplace_back(add_row(0.0, kInf), L.nu_minus(k) + r, 1.0);
    }

  // per-segment accumulator growth
  for (int k = 0; k + 1 < K; ++k) {
    const int row = add_row(-kInf, wt.eps_licq);
    tr.emplace_back(row, L.x(k + 1) + ix::y, Dx[ix::y]);
    tr.emplace_back(row, L.x(k) + ix::y, -Dx[ix::y]);
  }

  // node-wise dilation floor and gimbal boxes
  const VehicleParams& v = p.vehicle;
  const double ub[5] = {0.0, v.delta_e_max, v.phi_e_max, v.delta_b_max, v.phi_b_max};
  for (int k = 0; k < K; ++k) {
    tr.emplace_back(add_row(wt.s_min - cu[iu::s], kInf), L.u(k) + iu::s, Du[iu::s]);
    for (int j = 1; j <= 4; ++j) tr.emplace_back(add_row(-ub[j] - cu[j], ub[j] - cu[j]), L.u(k) + j, Du[j]);
  }

  // boundary conditions
  VecXa x0;
  x0 << p.boundary.Initial(), 0.0, 0.0;
  const VecXa x0s = sc.ScaleX(x0);
  for (int i = 0; i < kNxa; ++i) tr.emplace_back(add_row(x0s[i], x0s[i]), L.x(0) + i, 1.0);
  VecXa xf = VecXa::Zero();
  xf.head<kNx>() = p.boundary.Final();
  const VecXa xfs = sc.ScaleX(xf);
  for (int i = ix::r; i < ix::y; ++i) tr.emplace_back(add_row(xfs[i], xfs[i]), L.x(K - 1) + i, 1.0);
  tr.emplace_back(add_row(xfs[ix::m], kInf), L.x(K - 1) + ix::m, 1.0);

  SparseQP qp;
  const int m = int(lo.size());
  qp.A.resize(m, n);
  qp.A.setFromTriplets(tr.begin(), tr.end());
  qp.l = Eigen::Map<VectorXd>(lo.data(), m);
  qp.u = Eigen::Map<VectorXd>(hi.data(), m);

  // objective: trapezoidal final time + L1 slack + proximal term
  qp.q = VectorXd::Zero(n);
  const std::vector<double> tw = trapezoid_weights(grid);
  for (int k = 0; k < K; ++k) qp.q[L.u(k) + iu::s] += tw[k] * Du[iu::s];
  for (int i = L.nu_plus(0); i < n; ++i) qp.q[i] = wt.w_eq;
  std::vector<Eigen::Triplet<double>> pt;
  const VectorXd ref = pack_trajectory(z_ref, sc);
  const int nxu = K * (kNxa + kNua);
  for (int i = 0; i < nxu; ++i) {
    pt.emplace_back(i, i, wt.w_prox);
    qp.q[i] -= wt.w_prox * ref[i];
  }
  qp.P.resize(n, n);
  qp.P.setFromTriplets(pt.begin(), pt.end());
  return qp;
}

Trajectory extract_trajectory(const VectorXd& sol, int K, const ScalingMap& sc) {
  const SubproblemLayout L{K};
  Trajectory z;
  z.x.resize(K);
  z.u.resize(K);
  for (int k = 0; k < K; ++k) {
    z.x[k] = sc.UnscaleX(sol.segment<kNxa>(L.x(k)));
    z.u[k] = sc.UnscaleU(sol.segment<kNua>(L.u(k)));
  }
  return z;
}

VectorXd pack_trajectory(const Trajectory& z, const ScalingMap& sc) {
  const int K = z.K();
  const SubproblemLayout L{K};
  VectorXd v = VectorXd::Zero(L.n());
  for (int k = 0; k < K; ++k) {
    v.segment<kNxa>(L.x(k)) = sc.ScaleX(z.x[k]);
    v.segment<kNua>(L.u(k)) = sc.ScaleU(z.u[k]);
  }
  return v;
}

}  // namespace pdg
