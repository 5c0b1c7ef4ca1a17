#include "pdg/dgmsr.hpp"

#include <cmath>
#include <string>

namespace pdg {

namespace {

// log(1 + exp(a)) without overflow.
double log1pexp(double a) {
  return a > 30.0 ? a + std::log1p(std::exp(-a)) : std::log1p(std::exp(a));
}

double logaddexp(double a, double b) {
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(std::min(a, b) - hi));
}

void RequireFinite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) throw std::domain_error(std::string(what) + ": non-finite input");
}

void RequireNonnegative(const Eigen::VectorXd& z, const char* what) {
  RequireFinite(z, what);
  if ((z.array() < 0.0).any()) throw std::domain_error(std::string(what) + ": negative entry");
}

double pos2(double z) { return z > 0.0 ? z * z : 0.0; }
double dpos2(double z) { return z > 0.0 ? 2.0 * z : 0.0; }

}  // namespace

void GmsrParams::Validate(int arity) const {
  if (!(c > 0.0) || !std::isfinite(c)) throw std::invalid_argument("gmsr: c must be positive");
  if (p < 1) throw std::invalid_argument("gmsr: p must be >= 1");
  if (!w.empty()) {
    if (int(w.size()) != arity) throw std::invalid_argument("gmsr: weight count does not match arity");
    for (int wi : w)
      if (wi < 1) throw std::invalid_argument("gmsr: weights must be >= 1");
  }
}

double GmsrParams::WeightSum(int arity) const {
  if (w.empty()) return double(arity);
  double s = 0.0;
  for (int wi : w) s += wi;
  return s;
}

double gmean_zero(const Eigen::VectorXd& z, const GmsrParams& params) {
  const int n = int(z.size());
  params.Validate(n);
  RequireNonnegative(z, "gmean_zero");
  if (n == 0 || (z.array() == 0.0).any()) return params.c;
  const double W = params.WeightSum(n);
  double log_prod = 0.0;
  for (int i = 0; i < n; ++i) log_prod += params.Weight(i) * std::log(z[i]);
  return std::exp(logaddexp(W * std::log(params.c), log_prod) / W);
}

double gmean_p(const Eigen::VectorXd& z, const GmsrParams& params) {
  const int n = int(z.size());
  params.Validate(n);
  RequireNonnegative(z, "gmean_p");
  const double W = params.WeightSum(n);
  double s = 0.0;
  for (int i = 0; i < n; ++i) s += params.Weight(i) * std::pow(z[i], params.p);
  if (s == 0.0) return params.c;
  return std::pow(std::pow(params.c, params.p) + s / W, 1.0 / params.p);
}

// Written as sqrt(c) * [(1 + X)^(1/2W) - (1 + Y)^(1/2p)] with
// X = prod(y+^2w) / c^W and Y = sum(w y-^2p) / (W c^p). At most one of X, Y
// is nonzero, which makes the sign exact.
double conj_robustness(const Eigen::VectorXd& y, const GmsrParams& params,
                       Eigen::VectorXd* grad) {
  const int n = int(y.size());
  params.Validate(n);
  RequireFinite(y, "conj_robustness");
  const double W = params.WeightSum(n);
  const double sc = std::sqrt(params.c);
  if (grad) grad->setZero(n);

  bool any_neg = false, any_zero = false;
  for (int i = 0; i < n; ++i) {
    any_neg |= y[i] < 0.0;
    any_zero |= y[i] == 0.0;
  }

  if (!any_neg) {
    if (any_zero || n == 0) return 0.0;
    double log_x = -W * std::log(params.c);
    for (int i = 0; i < n; ++i) log_x += 2.0 * params.Weight(i) * std::log(y[i]);
    const double a = log1pexp(log_x) / (2.0 * W);
    if (grad) {
      const double frac = 1.0 / (1.0 + std::exp(-log_x));  // X / (1 + X)
      const double outer = sc * std::exp(a) / (2.0 * W) * frac;
      for (int i = 0; i < n; ++i) (*grad)[i] = outer * 2.0 * params.Weight(i) / y[i];
    }
    return sc * std::expm1(a);
  }

  const int p = params.p;
  const double cp = std::pow(params.c, p);
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    if (y[i] < 0.0) s += params.Weight(i) * std::pow(y[i] * y[i], p);
  const double Y = s / (W * cp);
  const double b = std::log1p(Y) / (2.0 * p);
  if (grad) {
    const double outer = -sc * std::exp(b) / (2.0 * p) / (1.0 + Y);
    for (int i = 0; i < n; ++i) {
      if (y[i] >= 0.0) continue;
      const double dY = params.Weight(i) * 2.0 * p * std::pow(y[i], 2 * p - 1) / (W * cp);
      (*grad)[i] = outer * dY;
    }
  }
  return -sc * std::expm1(b);
}

double disj_robustness(const Eigen::VectorXd& y, const GmsrParams& params,
                       Eigen::VectorXd* grad) {
  const double h = conj_robustness(-y, params, grad);
  return -h;
}

FormulaNode FormulaNode::Pred(int index) {
  FormulaNode n;
  n.kind = Kind::Predicate;
  n.predicate_index = index;
  return n;
}

FormulaNode FormulaNode::And(std::vector<FormulaNode> c) {
  FormulaNode n;
  n.kind = Kind::Conjunction;
  n.children = std::move(c);
  return n;
}

FormulaNode FormulaNode::Or(std::vector<FormulaNode> c) {
  FormulaNode n;
  n.kind = Kind::Disjunction;
  n.children = std::move(c);
  return n;
}

FormulaNode FormulaNode::Not(FormulaNode c) {
  FormulaNode n;
  n.kind = Kind::Negation;
  n.children.push_back(std::move(c));
  return n;
}

FormulaNode FormulaNode::Implies(FormulaNode a, FormulaNode b) {
  FormulaNode n;
  n.kind = Kind::Implication;
  n.children.push_back(std::move(a));
  n.children.push_back(std::move(b));
  return n;
}

double eval_formula(const FormulaNode& node, const Eigen::VectorXd& values,
                    const GmsrParams& params) {
  using K = FormulaNode::Kind;
  const int arity = int(node.children.size());
  auto node_params = [&](int n) {
    GmsrParams p = params;
    if (int(p.w.size()) != n) p.w.clear();
    return p;
  };
  switch (node.kind) {
    case K::Predicate:
      if (arity != 0) throw FormulaError("predicate node with children");
      if (node.predicate_index < 0 || node.predicate_index >= values.size())
        throw FormulaError("predicate index out of range");
      return values[node.predicate_index];
    case K::Negation:
      if (arity != 1) throw FormulaError("negation needs exactly one child");
      return -eval_formula(node.children[0], values, params);
    case K::Conjunction:
    case K::Disjunction: {
      if (arity < 2) throw FormulaError("conjunction/disjunction needs at least two children");
      Eigen::VectorXd sub(arity);
      for (int i = 0; i < arity; ++i) sub[i] = eval_formula(node.children[i], values, params);
      return node.kind == K::Conjunction ? conj_robustness(sub, node_params(arity))
                                         : disj_robustness(sub, node_params(arity));
    }
    case K::Implication: {
      if (arity != 2) throw FormulaError("implication needs exactly two children");
      Eigen::VectorXd sub(2);
      sub[0] = -eval_formula(node.children[0], values, params);
      sub[1] = eval_formula(node.children[1], values, params);
      return disj_robustness(sub, node_params(2));
    }
  }
  throw FormulaError("unknown node kind");
}

Vec4 stc_residual(const Vec4& t, const Vec10& s) {
  Vec4 h;
  double s15 = 0.0;
  for (int i = 0; i < 5; ++i) s15 += pos2(s[i]);
  h[0] = pos2(-t[0]) * s15;
  h[1] = pos2(-t[1]) * pos2(s[5]);
  h[2] = pos2(-t[2]) * pos2(-t[3]) * (pos2(s[6]) + pos2(s[7]));
  h[3] = (pos2(t[2]) + pos2(t[3])) * (pos2(s[8]) + pos2(s[9]));
  return h;
}

void stc_residual_partials(const Vec4& t, const Vec10& s, Eigen::Matrix4d& dt,
                           Eigen::Matrix<double, 4, 10>& ds) {
  dt.setZero();
  ds.setZero();
  double s15 = 0.0;
  for (int i = 0; i < 5; ++i) s15 += pos2(s[i]);
  const double a1 = pos2(-t[0]);
  dt(0, 0) = -dpos2(-t[0]) * s15;
  for (int i = 0; i < 5; ++i) ds(0, i) = a1 * dpos2(s[i]);

  const double a2 = pos2(-t[1]);
  dt(1, 1) = -dpos2(-t[1]) * pos2(s[5]);
  ds(1, 5) = a2 * dpos2(s[5]);

  const double n3 = pos2(-t[2]), n4 = pos2(-t[3]);
  const double c3 = pos2(s[6]) + pos2(s[7]);
  dt(2, 2) = -dpos2(-t[2]) * n4 * c3;
  dt(2, 3) = -dpos2(-t[3]) * n3 * c3;
  ds(2, 6) = n3 * n4 * dpos2(s[6]);
  ds(2, 7) = n3 * n4 * dpos2(s[7]);

  const double act = pos2(t[2]) + pos2(t[3]);
  const double c4 = pos2(s[8]) + pos2(s[9]);
  dt(3, 2) = dpos2(t[2]) * c4;
  dt(3, 3) = dpos2(t[3]) * c4;
  ds(3, 8) = act * dpos2(s[8]);
  ds(3, 9) = act * dpos2(s[9]);
}

Eigen::Matrix<double, 4, Eigen::Dynamic> stc_residual_gradient(
    const Vec4& trig, const Vec10& stc, const Eigen::MatrixXd& dtrig,
    const Eigen::MatrixXd& dstc) {
  if (dtrig.rows() != 4 || dstc.rows() != 10 || dtrig.cols() != dstc.cols())
    throw std::invalid_argument("stc_residual_gradient: dimension mismatch");
  Eigen::Matrix4d dt;
  Eigen::Matrix<double, 4, 10> ds;
  stc_residual_partials(trig, stc, dt, ds);
  return dt * dtrig + ds * dstc;
}

}  // namespace pdg
