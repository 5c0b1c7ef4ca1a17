#include "pdg/discretization.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <future>
#include <thread>

namespace pdg {

namespace {

struct VarState {
  VecXa x;
  MatXaXa Phi;
  MatXaUa Bm, Bp;

  VarState operator+(const VarState& o) const { return {x + o.x, Phi + o.Phi, Bm + o.Bm, Bp + o.Bp}; }
  VarState operator*(double h) const { return {x * h, Phi * h, Bm * h, Bp * h}; }
};

VarState var_rhs(const VarState& z, double tau, double tau_k, double tau_k1, const VecUa& uk,
                 const VecUa& uk1, const ProblemParams& p) {
  const double dt = tau_k1 - tau_k;
  const double lm = (tau_k1 - tau) / dt;
  const double lp = (tau - tau_k) / dt;
  const VecUa u = lm * uk + lp * uk1;
  MatXaXa A;
  MatXaUa B;
  augmented_jacobians(z.x, u, p, A, B);
  return {augmented_rhs(z.x, u, p), A * z.Phi, A * z.Bm + B * lm, A * z.Bp + B * lp};
}

}  // namespace

GridSpec GridSpec::Uniform(int K, int substeps) {
  if (K < 2) throw std::invalid_argument("grid: K must be >= 2");
  GridSpec g;
  g.substeps = substeps;
  g.tau.resize(K);
  for (int k = 0; k < K; ++k) g.tau[k] = double(k) / (K - 1);
  return g;
}

VecUa foh(double tau, double tau_k, double tau_k1, const VecUa& u_k, const VecUa& u_k1) {
  if (tau < tau_k || tau > tau_k1 || !(tau_k1 > tau_k))
    throw std::domain_error("foh: tau outside segment");
  const double lm = (tau_k1 - tau) / (tau_k1 - tau_k);
  const double lp = (tau - tau_k) / (tau_k1 - tau_k);
  return lm * u_k + lp * u_k1;
}

LinearizedSegment propagate_segment(const VecXa& x_k, const VecUa& u_k, const VecUa& u_k1,
                                    double tau_k, double tau_k1, int substeps,
                                    const ProblemParams& p) {
  VarState z{x_k, MatXaXa::Identity(), MatXaUa::Zero(), MatXaUa::Zero()};
  const double h = (tau_k1 - tau_k) / substeps;
  for (int i = 0; i < substeps; ++i) {
    const double t0 = tau_k + i * h;
    const double tm = t0 + 0.5 * h;
    const double t1 = i + 1 == substeps ? tau_k1 : t0 + h;
    const VarState k1 = var_rhs(z, t0, tau_k, tau_k1, u_k, u_k1, p);
    const VarState k2 = var_rhs(z + k1 * (0.5 * h), tm, tau_k, tau_k1, u_k, u_k1, p);
    const VarState k3 = var_rhs(z + k2 * (0.5 * h), tm, tau_k, tau_k1, u_k, u_k1, p);
    const VarState k4 = var_rhs(z + k3 * h, t1, tau_k, tau_k1, u_k, u_k1, p);
    z = z + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
    if (!z.x.allFinite() || !z.Phi.allFinite()) throw PropagationError("segment propagation blew up");
  }
  LinearizedSegment seg;
  seg.A = z.Phi;
  seg.B_minus = z.Bm;
  seg.B_plus = z.Bp;
  seg.x_end = z.x;
  seg.w = z.x - z.Phi * x_k - z.Bm * u_k - z.Bp * u_k1;
  return seg;
}

VecXa propagate_state(const VecXa& x_k, const VecUa& u_k, const VecUa& u_k1, double tau_k,
                      double tau_k1, int substeps, const ProblemParams& p) {
  VecXa x = x_k;
  const double h = (tau_k1 - tau_k) / substeps;
  auto f = [&](const VecXa& xx, double tau) {
    return augmented_rhs(xx, foh(std::clamp(tau, tau_k, tau_k1), tau_k, tau_k1, u_k, u_k1), p);
  };
  for (int i = 0; i < substeps; ++i) {
    const double t0 = tau_k + i * h;
    const double t1 = i + 1 == substeps ? tau_k1 : t0 + h;
    const VecXa k1 = f(x, t0);
    const VecXa k2 = f(x + 0.5 * h * k1, t0 + 0.5 * h);
    const VecXa k3 = f(x + 0.5 * h * k2, t0 + 0.5 * h);
    const VecXa k4 = f(x + h * k3, t1);
    x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  if (!x.allFinite()) throw PropagationError("state propagation blew up");
  return x;
}

std::vector<LinearizedSegment> discretize_all(const Trajectory& z, const GridSpec& grid,
                                              const ProblemParams& p) {
  const int K = grid.K();
  if (z.K() != K || int(z.u.size()) != K) throw std::invalid_argument("discretize_all: node count mismatch");
  std::vector<LinearizedSegment> out(K - 1);
  const int workers = std::max(1u, std::thread::hardware_concurrency());

  auto run = [&](int first, int stride) {
    for (int k = first; k < K - 1; k += stride) {
      try {
        out[k] = propagate_segment(z.x[k], z.u[k], z.u[k + 1], grid.tau[k], grid.tau[k + 1],
                                   grid.substeps, p);
      } catch (const std::exception& e) {
        throw PropagationError(fmt::format("segment {}: {}", k, e.what()));
      }
    }
  };
  if (workers == 1) {
    run(0, 1);
    return out;
  }
  std::vector<std::future<void>> jobs;
  for (int w = 0; w < workers; ++w) jobs.push_back(std::async(std::launch::async, run, w, workers));
  for (auto& j : jobs) j.get();
  return out;
}

}  // namespace pdg
