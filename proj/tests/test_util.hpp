#pragma once

#include "nssolver/common.hpp"
#include "nssolver/equation_tree.hpp"
#include "nssolver/problem.hpp"

#include <string>
#include <vector>

namespace nss::testutil {

inline EquationTree random_expr(Rng& rng, int depth, int n_templates,
                                const std::string& unknown) {
  if (depth <= 0 || rng.uniform() < 0.35) {
    double r = rng.uniform();
    if (!unknown.empty() && r < 0.2)
      return EquationTree::leaf(Symbol::unknown(unknown));
    if (n_templates > 0 && r < 0.6)
      return EquationTree::leaf(
          Symbol::number_template(rng.uniform_int(1, n_templates)));
    static const double pool[] = {0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 7.0,
                                  10.0, 0.5, 2.5, 3.14, 100.0};
    return EquationTree::leaf(Symbol::constant(pool[rng.uniform_int(0, 11)]));
  }
  static const char* ops[] = {"+", "-", "*", "/", "^"};
  // keep ^ rare so random trees stay printable without blowing up
  int pick = rng.uniform_int(0, 9);
  const char* op = pick < 9 ? ops[pick % 4] : ops[4];
  return EquationTree::internal(Symbol::op(op),
                                random_expr(rng, depth - 1, n_templates, unknown),
                                random_expr(rng, depth - 1, n_templates, unknown));
}

// structurally valid ensemble: 1-2 segments, one '=' at each segment root
inline EquationTree random_tree(Rng& rng, int n_templates = 3) {
  int segments = rng.uniform_int(1, 2);
  EquationTree result;
  for (int s = 0; s < segments; ++s) {
    std::string unk = (s == 0) ? "x" : "y";
    EquationTree lhs = rng.uniform() < 0.5
                           ? EquationTree::leaf(Symbol::unknown(unk))
                           : random_expr(rng, 3, n_templates, unk);
    EquationTree rhs = random_expr(rng, 3, n_templates, unk);
    EquationTree eq = EquationTree::internal(Symbol::op("="), lhs, rhs);
    result = s == 0 ? eq : EquationTree::internal(Symbol::op(";"), result, eq);
  }
  return result;
}

inline SymbolTable table_with_templates(int k) {
  std::vector<double> values;
  for (int i = 0; i < k; ++i) values.push_back(i + 1.0);
  return SymbolTable({Symbol::unknown("x"), Symbol::unknown("y")}, {},
                     std::move(values));
}

}  // namespace nss::testutil
