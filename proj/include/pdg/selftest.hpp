#pragma once

#include "pdg/dgmsr.hpp"
#include "pdg/qp.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace pdg {

struct SuiteResult {
  std::string name;
  int cases = 0;
  int failures = 0;
  double worst = 0.0;                 // largest error metric seen
  std::vector<std::string> failed;    // "case <i> seed <s>: detail"
  bool Passed() const { return failures == 0; }
};

struct SelftestOptions {
  std::uint64_t seed = 1;
  int gradient_points = 100;
  int dgmsr_samples = 2000;  // per tree shape
  int dgmsr_shapes = 20;
  int qp_cases = 200;
  size_t max_reported = 5;
};

// Case seeds derive from the master seed so any failure can be replayed alone.
std::uint64_t case_seed(std::uint64_t master, int suite, int index);

SuiteResult gradient_suite(const SelftestOptions& o);
SuiteResult dgmsr_suite(const SelftestOptions& o);
SuiteResult qp_oracle_suite(const SelftestOptions& o);
std::vector<SuiteResult> run_selftest(const SelftestOptions& o);

// Random formula tree with the given maximum depth and arity over n predicates.
FormulaNode random_formula(std::mt19937_64& rng, int depth, int max_arity, int n_pred);
bool boolean_eval(const FormulaNode& node, const Eigen::VectorXd& values);

// Exhaustive active-set search for a strictly convex dense QP. Returns false
// when no KKT point exists (infeasible).
bool enumerate_qp(const Eigen::MatrixXd& P, const Eigen::VectorXd& q, const Eigen::MatrixXd& A,
                  const Eigen::VectorXd& l, const Eigen::VectorXd& u, Eigen::VectorXd& x);

}  // namespace pdg
