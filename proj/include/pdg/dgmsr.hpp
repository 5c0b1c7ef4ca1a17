#pragma once

#include "pdg/types.hpp"

#include <vector>

namespace pdg {

// Generalized-mean smooth robustness. Weights left empty mean all ones.
struct GmsrParams {
  double c = 1e-4;
  int p = 1;
  std::vector<int> w;

  void Validate(int arity) const;
  double Weight(int i) const { return w.empty() ? 1.0 : double(w[i]); }
  double WeightSum(int arity) const;
};

double gmean_zero(const Eigen::VectorXd& z, const GmsrParams& params);
double gmean_p(const Eigen::VectorXd& z, const GmsrParams& params);

// Conjunction robustness: nonnegative iff every y_i >= 0. Optional gradient.
double conj_robustness(const Eigen::VectorXd& y, const GmsrParams& params,
                       Eigen::VectorXd* grad = nullptr);
// Disjunction robustness: -conj(-y).
double disj_robustness(const Eigen::VectorXd& y, const GmsrParams& params,
                       Eigen::VectorXd* grad = nullptr);

struct FormulaNode {
  enum class Kind { Predicate, Conjunction, Disjunction, Negation, Implication };
  Kind kind = Kind::Predicate;
  std::vector<FormulaNode> children;
  int predicate_index = -1;

  static FormulaNode Pred(int index);
  static FormulaNode And(std::vector<FormulaNode> c);
  static FormulaNode Or(std::vector<FormulaNode> c);
  static FormulaNode Not(FormulaNode c);
  static FormulaNode Implies(FormulaNode a, FormulaNode b);
};

struct FormulaError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Recursive robustness. Per-node weights are taken from params.w when its
// length matches the node arity, otherwise uniform.
double eval_formula(const FormulaNode& node, const Eigen::VectorXd& values,
                    const GmsrParams& params);

// Residuals of the four triggered-constraint groups (altitude h1 group,
// line of sight, low-speed-or-tilt thrust band, high thrust band).
Vec4 stc_residual(const Vec4& trig, const Vec10& stc);

// Chain rule through stc_residual; dtrig is 4 x n, dstc is 10 x n.
Eigen::Matrix<double, 4, Eigen::Dynamic> stc_residual_gradient(
    const Vec4& trig, const Vec10& stc, const Eigen::MatrixXd& dtrig,
    const Eigen::MatrixXd& dstc);

// Partial derivatives of stc_residual with respect to its two arguments.
void stc_residual_partials(const Vec4& trig, const Vec10& stc,
                           Eigen::Matrix4d& d_trig,
                           Eigen::Matrix<double, 4, 10>& d_stc);

}  // namespace pdg
