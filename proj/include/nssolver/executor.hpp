#pragma once

#include "nssolver/equation_tree.hpp"
#include "nssolver/problem.hpp"

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace nss {

struct SolveConfig {
  double residual_tol = 1e-9;  // affinity probes, singularity thresholds
  double grade_tol = 1e-4;     // answer matching, absolute-or-relative
  int newton_max_iter = 100;
  double scan_min = -1e6;
  double scan_max = 1e6;
  int scan_points = 4096;  // log-spaced magnitudes plus 0
  int max_solutions = 16;
};

// every Solved answer satisfies |LHS - RHS| <= kResidualBound * max(1, |RHS|)
inline constexpr double kResidualBound = 1e-6;

enum class SolveStatus { Solved, NoRealSolution, Singular, NonConvergent };

std::string solve_status_name(SolveStatus s);

struct SolvedAnswer {
  SolveStatus status = SolveStatus::NonConvergent;
  bool is_scalar = false;
  double scalar_value = 0.0;
  // unknown -> solution values; for systems the lists are aligned, so
  // combination i is (x[i], y[i])
  std::map<std::string, std::vector<double>> bindings;
};

// unresolvable leaf while evaluating
struct BindingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// division by zero, zero to a negative power, or other domain failure
struct SingularError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exact recursive evaluation of an `=`/`;`-free tree. Leaves resolve through
// the bindings map (by symbol name, templates included) or a constant's own
// value.
double eval_arithmetic(const EquationTree& tree,
                       const std::map<std::string, double>& bindings);

// replaces template leaves n_k by constants values[k-1]
EquationTree ground_templates(const EquationTree& tree,
                              const std::vector<double>& values);

// Solves an ensemble of one or two equations over unknowns in {x, y}.
// The tree must be grounded (no template leaves).
SolvedAnswer solve(const EquationTree& ensemble,
                   const SolveConfig& config = SolveConfig());
SolvedAnswer solve(const EquationTree& ensemble,
                   const std::vector<double>& template_values,
                   const SolveConfig& config = SolveConfig());

// |a - b| <= grade_tol * max(1, |b|)
bool values_match(double a, double b, const SolveConfig& config);

// True iff the predicted tree solves and its solution profile matches the
// gold answer: any real root counts for one-unknown problems, and systems
// match order-insensitively across the unknown set. Solver failures never
// throw; they grade false.
bool grade(const EquationTree& predicted, const GoldAnswer& gold,
           const SolveConfig& config = SolveConfig());
bool grade(const EquationTree& predicted,
           const std::vector<double>& template_values, const GoldAnswer& gold,
           const SolveConfig& config = SolveConfig());

}  // namespace nss
