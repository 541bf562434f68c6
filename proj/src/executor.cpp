#include "nssolver/executor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

namespace nss {

std::string solve_status_name(SolveStatus s) {
  switch (s) {
    case SolveStatus::Solved: return "Solved";
    case SolveStatus::NoRealSolution: return "NoRealSolution";
    case SolveStatus::Singular: return "Singular";
    case SolveStatus::NonConvergent: return "NonConvergent";
  }
  return "NonConvergent";
}

namespace {

using Node = EquationTree::Node;

double resolve_leaf(const Symbol& s,
                    const std::map<std::string, double>& bindings,
                    bool throwing) {
  if (s.kind == SymbolKind::Constant) return s.value;
  auto it = bindings.find(s.name);
  if (it != bindings.end()) return it->second;
  if (throwing)
    throw BindingError("eval_arithmetic: unbound leaf '" + s.name + "'");
  return std::numeric_limits<double>::quiet_NaN();
}

// quiet evaluator returning NaN on domain failures (used by the scanners)
double eval_quiet(const Node& n, const std::map<std::string, double>& b) {
  if (n.is_leaf()) return resolve_leaf(n.symbol, b, false);
  double l = eval_quiet(*n.left, b);
  double r = eval_quiet(*n.right, b);
  const std::string& op = n.symbol.name;
  double v;
  if (op == "+") v = l + r;
  else if (op == "-") v = l - r;
  else if (op == "*") v = l * r;
  else if (op == "/") v = (r == 0.0) ? std::numeric_limits<double>::quiet_NaN() : l / r;
  else if (op == "^") {
    if (l == 0.0 && r < 0.0) return std::numeric_limits<double>::quiet_NaN();
    v = std::pow(l, r);
  } else {
    return std::numeric_limits<double>::quiet_NaN();  // '=' or ';' inside expr
  }
  return std::isfinite(v) ? v : std::numeric_limits<double>::quiet_NaN();
}

double eval_throwing(const Node& n, const std::map<std::string, double>& b) {
  if (n.is_leaf()) return resolve_leaf(n.symbol, b, true);
  double l = eval_throwing(*n.left, b);
  double r = eval_throwing(*n.right, b);
  const std::string& op = n.symbol.name;
  if (op == "+") return l + r;
  if (op == "-") return l - r;
  if (op == "*") return l * r;
  if (op == "/") {
    if (r == 0.0) throw SingularError("eval_arithmetic: division by zero");
    return l / r;
  }
  if (op == "^") {
    if (l == 0.0 && r < 0.0)
      throw SingularError("eval_arithmetic: zero to a negative power");
    double v = std::pow(l, r);
    if (!std::isfinite(v))
      throw SingularError("eval_arithmetic: non-finite power result");
    return v;
  }
  throw BindingError("eval_arithmetic: '" + op + "' is not an arithmetic operator");
}

void collect_unknowns(const Node& n, std::vector<std::string>& out) {
  if (n.is_leaf()) {
    if (n.symbol.kind == SymbolKind::Unknown &&
        std::find(out.begin(), out.end(), n.symbol.name) == out.end())
      out.push_back(n.symbol.name);
    return;
  }
  collect_unknowns(*n.left, out);
  collect_unknowns(*n.right, out);
}

bool has_equals(const Node& n) { return !n.is_leaf() && n.symbol.name == "="; }

struct Equation {
  EquationTree::NodePtr lhs;
  EquationTree::NodePtr rhs;
};

// residual of one equation at the given bindings; NaN on domain failure
double residual(const Equation& eq, const std::map<std::string, double>& b) {
  double l = eval_quiet(*eq.lhs, b);
  double r = eval_quiet(*eq.rhs, b);
  return l - r;
}

bool residual_within_bound(const Equation& eq,
                           const std::map<std::string, double>& b) {
  double l = eval_quiet(*eq.lhs, b);
  double r = eval_quiet(*eq.rhs, b);
  if (!std::isfinite(l) || !std::isfinite(r)) return false;
  return std::abs(l - r) <= kResidualBound * std::max(1.0, std::abs(r));
}

bool all_residuals_ok(const std::vector<Equation>& eqs,
                      const std::map<std::string, double>& b) {
  for (const auto& eq : eqs)
    if (!residual_within_bound(eq, b)) return false;
  return true;
}

std::vector<double> scan_grid(const SolveConfig& cfg) {
  // log-spaced magnitudes from 1e-6 up to the scan bound, mirrored, plus 0
  int half = std::max(1, cfg.scan_points / 2);
  double max_mag = std::max(std::abs(cfg.scan_min), std::abs(cfg.scan_max));
  double lo = 1e-6;
  std::vector<double> mags(half);
  for (int i = 0; i < half; ++i) {
    double t = (half == 1) ? 1.0 : static_cast<double>(i) / (half - 1);
    mags[i] = lo * std::pow(max_mag / lo, t);
  }
  std::vector<double> grid;
  grid.reserve(2 * half + 1);
  for (int i = half - 1; i >= 0; --i) grid.push_back(-mags[i]);
  grid.push_back(0.0);
  for (int i = 0; i < half; ++i) grid.push_back(mags[i]);
  return grid;
}

class OneUnknownSolver {
 public:
  OneUnknownSolver(const std::vector<Equation>& eqs, std::string unknown,
                   const SolveConfig& cfg)
      : eqs_(eqs), unknown_(std::move(unknown)), cfg_(cfg) {}

  double f(double t) const {
    std::map<std::string, double> b{{unknown_, t}};
    double sum = 0.0;
    for (const auto& eq : eqs_) sum += residual(eq, b);
    return sum;
  }

  SolvedAnswer run() {
    SolvedAnswer out;
    double f0 = f(0.0), f1 = f(1.0), f2 = f(2.0);
    if (std::isfinite(f0) && std::isfinite(f1) && std::isfinite(f2)) {
      double scale = std::max({1.0, std::abs(f0), std::abs(f1), std::abs(f2)});
      if (std::abs(f0 - 2.0 * f1 + f2) <= cfg_.residual_tol * scale) {
        double a = f1 - f0, b = f0;
        if (std::abs(a) <= cfg_.residual_tol * scale) {
          out.status = std::abs(b) <= cfg_.residual_tol * scale
                           ? SolveStatus::Singular
                           : SolveStatus::NoRealSolution;
          return out;
        }
        double root = -b / a;
        std::map<std::string, double> bind{{unknown_, root}};
        if (!all_residuals_ok(eqs_, bind)) {
          out.status = SolveStatus::NoRealSolution;
          return out;
        }
        out.status = SolveStatus::Solved;
        out.bindings[unknown_] = {root};
        return out;
      }
    }
    return scan();
  }

 private:
  SolvedAnswer scan() {
    SolvedAnswer out;
    std::vector<double> grid = scan_grid(cfg_);
    std::vector<double> roots;
    bool saw_bracket = false;
    double prev_t = 0.0, prev_f = std::numeric_limits<double>::quiet_NaN();
    for (double t : grid) {
      double ft = f(t);
      if (std::isfinite(ft)) {
        if (ft == 0.0) {
          push_root(roots, t);
        } else if (std::isfinite(prev_f) && prev_f * ft < 0.0) {
          saw_bracket = true;
          auto r = bisect_newton(prev_t, t, prev_f);
          if (r) push_root(roots, *r);
        }
        prev_t = t;
        prev_f = ft;
      } else {
        prev_f = std::numeric_limits<double>::quiet_NaN();
      }
    }
    std::sort(roots.begin(), roots.end());
    std::vector<double> verified;
    for (double r : roots) {
      std::map<std::string, double> bind{{unknown_, r}};
      if (all_residuals_ok(eqs_, bind)) verified.push_back(r);
      if (static_cast<int>(verified.size()) >= cfg_.max_solutions) break;
    }
    if (verified.empty()) {
      out.status = (saw_bracket || !roots.empty()) ? SolveStatus::NoRealSolution
                                                   : SolveStatus::NonConvergent;
      return out;
    }
    out.status = SolveStatus::Solved;
    out.bindings[unknown_] = std::move(verified);
    return out;
  }

  void push_root(std::vector<double>& roots, double r) const {
    for (double q : roots)
      if (std::abs(q - r) <= 1e-8 * std::max(1.0, std::abs(q))) return;
    roots.push_back(r);
  }

  std::optional<double> bisect_newton(double a, double b, double fa) const {
    for (int it = 0; it < 200; ++it) {
      double mid = 0.5 * (a + b);
      if (std::abs(b - a) <= 1e-12 * std::max(1.0, std::abs(mid))) break;
      double fm = f(mid);
      if (!std::isfinite(fm)) return std::nullopt;
      if (fm == 0.0) return polish(mid);
      if (fa * fm < 0.0) {
        b = mid;
      } else {
        a = mid;
        fa = fm;
      }
    }
    return polish(0.5 * (a + b));
  }

  double polish(double x) const {
    double best = x, best_f = std::abs(f(x));
    for (int it = 0; it < cfg_.newton_max_iter; ++it) {
      double h = 1e-7 * std::max(1.0, std::abs(x));
      double fp = (f(x + h) - f(x - h)) / (2.0 * h);
      if (!std::isfinite(fp) || fp == 0.0) break;
      double fx = f(x);
      if (!std::isfinite(fx)) break;
      double nx = x - fx / fp;
      if (!std::isfinite(nx)) break;
      double nf = std::abs(f(nx));
      if (std::isfinite(nf) && nf < best_f) {
        best = nx;
        best_f = nf;
      }
      if (std::abs(nx - x) <= 1e-15 * std::max(1.0, std::abs(x))) break;
      x = nx;
    }
    return best;
  }

  const std::vector<Equation>& eqs_;
  std::string unknown_;
  const SolveConfig& cfg_;
};

struct AffineForm {
  double a = 0.0, b = 0.0, c = 0.0;  // a*x + b*y + c
};

// 4-point collinearity probes per variable plus a cross term check
std::optional<AffineForm> detect_affine_2d(const Equation& eq,
                                           const SolveConfig& cfg) {
  auto g = [&](double x, double y) {
    std::map<std::string, double> b{{"x", x}, {"y", y}};
    return residual(eq, b);
  };
  double g00 = g(0, 0), g10 = g(1, 0), g20 = g(2, 0);
  double g01 = g(0, 1), g02 = g(0, 2), g11 = g(1, 1);
  for (double v : {g00, g10, g20, g01, g02, g11})
    if (!std::isfinite(v)) return std::nullopt;
  double scale = std::max({1.0, std::abs(g00), std::abs(g10), std::abs(g20),
                           std::abs(g01), std::abs(g02), std::abs(g11)});
  double tol = cfg.residual_tol * scale;
  if (std::abs(g20 - 2.0 * g10 + g00) > tol) return std::nullopt;
  if (std::abs(g02 - 2.0 * g01 + g00) > tol) return std::nullopt;
  if (std::abs(g11 - g10 - g01 + g00) > tol) return std::nullopt;
  return AffineForm{g10 - g00, g01 - g00, g00};
}

class TwoUnknownSolver {
 public:
  TwoUnknownSolver(const std::vector<Equation>& eqs, const SolveConfig& cfg)
      : eqs_(eqs), cfg_(cfg) {}

  SolvedAnswer run() {
    SolvedAnswer out;
    if (eqs_.size() < 2) {
      out.status = SolveStatus::Singular;  // underdetermined
      return out;
    }
    auto af1 = detect_affine_2d(eqs_[0], cfg_);
    auto af2 = detect_affine_2d(eqs_[1], cfg_);
    if (af1 && af2) return elimination(*af1, *af2);
    return newton_multistart();
  }

 private:
  SolvedAnswer elimination(const AffineForm& e1, const AffineForm& e2) {
    SolvedAnswer out;
    double det = e1.a * e2.b - e2.a * e1.b;
    double norm = std::max({1.0, std::abs(e1.a), std::abs(e1.b),
                            std::abs(e2.a), std::abs(e2.b)});
    if (std::abs(det) <= cfg_.residual_tol * norm) {
      out.status = SolveStatus::Singular;
      return out;
    }
    double x = (-e1.c * e2.b + e2.c * e1.b) / det;
    double y = (-e1.a * e2.c + e2.a * e1.c) / det;
    std::map<std::string, double> bind{{"x", x}, {"y", y}};
    if (!all_residuals_ok(eqs_, bind)) {
      out.status = SolveStatus::NoRealSolution;
      return out;
    }
    out.status = SolveStatus::Solved;
    out.bindings["x"] = {x};
    out.bindings["y"] = {y};
    return out;
  }

  SolvedAnswer newton_multistart() {
    SolvedAnswer out;
    std::vector<double> starts = {0.0, 1.0, -1.0, 10.0, -10.0,
                                  100.0, -100.0, 1000.0, -1000.0};
    std::vector<std::pair<double, double>> sols;
    for (double sx : starts)
      for (double sy : starts) {
        auto sol = newton2d(sx, sy);
        if (!sol) continue;
        bool dup = false;
        for (const auto& q : sols)
          if (std::abs(q.first - sol->first) <=
                  1e-8 * std::max(1.0, std::abs(q.first)) &&
              std::abs(q.second - sol->second) <=
                  1e-8 * std::max(1.0, std::abs(q.second))) {
            dup = true;
            break;
          }
        if (!dup && static_cast<int>(sols.size()) < cfg_.max_solutions)
          sols.push_back(*sol);
      }
    if (sols.empty()) {
      out.status = SolveStatus::NonConvergent;
      return out;
    }
    std::sort(sols.begin(), sols.end());
    out.status = SolveStatus::Solved;
    for (const auto& s : sols) {
      out.bindings["x"].push_back(s.first);
      out.bindings["y"].push_back(s.second);
    }
    return out;
  }

  std::optional<std::pair<double, double>> newton2d(double x, double y) {
    auto F = [&](double px, double py, double& r1, double& r2) {
      std::map<std::string, double> b{{"x", px}, {"y", py}};
      r1 = residual(eqs_[0], b);
      r2 = residual(eqs_[1], b);
      return std::isfinite(r1) && std::isfinite(r2);
    };
    for (int it = 0; it < cfg_.newton_max_iter; ++it) {
      double r1, r2;
      if (!F(x, y, r1, r2)) return std::nullopt;
      double hx = 1e-7 * std::max(1.0, std::abs(x));
      double hy = 1e-7 * std::max(1.0, std::abs(y));
      double a1, a2, t1, t2;
      if (!F(x + hx, y, a1, a2) || !F(x - hx, y, t1, t2)) return std::nullopt;
      double j11 = (a1 - t1) / (2 * hx), j21 = (a2 - t2) / (2 * hx);
      if (!F(x, y + hy, a1, a2) || !F(x, y - hy, t1, t2)) return std::nullopt;
      double j12 = (a1 - t1) / (2 * hy), j22 = (a2 - t2) / (2 * hy);
      double det = j11 * j22 - j12 * j21;
      if (!std::isfinite(det) || std::abs(det) < 1e-14) return std::nullopt;
      double dx = (r1 * j22 - r2 * j12) / det;
      double dy = (j11 * r2 - j21 * r1) / det;
      x -= dx;
      y -= dy;
      if (!std::isfinite(x) || !std::isfinite(y)) return std::nullopt;
      if (std::abs(dx) <= 1e-12 * std::max(1.0, std::abs(x)) &&
          std::abs(dy) <= 1e-12 * std::max(1.0, std::abs(y))) {
        std::map<std::string, double> bind{{"x", x}, {"y", y}};
        if (all_residuals_ok(eqs_, bind)) return std::make_pair(x, y);
        return std::nullopt;
      }
    }
    return std::nullopt;
  }

  const std::vector<Equation>& eqs_;
  const SolveConfig& cfg_;
};

EquationTree::NodePtr ground_node(const Node& n,
                                  const std::vector<double>& values) {
  if (n.is_leaf()) {
    int k = n.symbol.template_index();
    if (k >= 1) {
      if (k > static_cast<int>(values.size()))
        throw BindingError("ground_templates: no value for n_" +
                           std::to_string(k));
      return std::make_shared<Node>(
          Node{Symbol::constant(values[k - 1]), nullptr, nullptr});
    }
    return std::make_shared<Node>(Node{n.symbol, nullptr, nullptr});
  }
  return std::make_shared<Node>(Node{n.symbol, ground_node(*n.left, values),
                                     ground_node(*n.right, values)});
}

}  // namespace

double eval_arithmetic(const EquationTree& tree,
                       const std::map<std::string, double>& bindings) {
  if (tree.empty()) throw BindingError("eval_arithmetic: empty tree");
  return eval_throwing(tree.root(), bindings);
}

EquationTree ground_templates(const EquationTree& tree,
                              const std::vector<double>& values) {
  if (tree.empty()) return tree;
  return EquationTree(ground_node(tree.root(), values));
}

SolvedAnswer solve(const EquationTree& ensemble, const SolveConfig& config) {
  SolvedAnswer out;
  if (ensemble.empty()) return out;

  std::vector<EquationTree> segments = split_ensemble(ensemble);
  if (segments.empty() || segments.size() > 2) return out;

  std::vector<std::string> unknowns;
  collect_unknowns(ensemble.root(), unknowns);

  // pure expression: evaluate to a scalar
  if (unknowns.empty() && segments.size() == 1 &&
      !has_equals(segments[0].root())) {
    double v = eval_quiet(segments[0].root(), {});
    if (!std::isfinite(v)) {
      out.status = SolveStatus::Singular;
      return out;
    }
    out.status = SolveStatus::Solved;
    out.is_scalar = true;
    out.scalar_value = v;
    return out;
  }

  std::vector<Equation> eqs;
  for (const auto& seg : segments) {
    if (!has_equals(seg.root())) {
      out.status = SolveStatus::NonConvergent;  // not an equation
      return out;
    }
    eqs.push_back(Equation{seg.root().left, seg.root().right});
  }

  if (unknowns.empty()) {
    // verification only
    for (const auto& eq : eqs)
      if (!residual_within_bound(eq, {})) {
        out.status = SolveStatus::NoRealSolution;
        return out;
      }
    out.status = SolveStatus::Solved;
    out.is_scalar = true;
    out.scalar_value = eval_quiet(*eqs[0].rhs, {});
    return out;
  }

  if (unknowns.size() == 1) {
    // direct form u = expr (or expr = u) with an unknown-free other side
    if (eqs.size() == 1) {
      const Equation& eq = eqs[0];
      for (bool flip : {false, true}) {
        const Node& u = flip ? *eq.rhs : *eq.lhs;
        const Node& expr = flip ? *eq.lhs : *eq.rhs;
        std::vector<std::string> expr_unknowns;
        collect_unknowns(expr, expr_unknowns);
        if (u.is_leaf() && u.symbol.kind == SymbolKind::Unknown &&
            expr_unknowns.empty()) {
          double v = eval_quiet(expr, {});
          if (!std::isfinite(v)) {
            out.status = SolveStatus::Singular;
            return out;
          }
          out.status = SolveStatus::Solved;
          out.bindings[u.symbol.name] = {v};
          return out;
        }
      }
    }
    return OneUnknownSolver(eqs, unknowns[0], config).run();
  }

  return TwoUnknownSolver(eqs, config).run();
}

SolvedAnswer solve(const EquationTree& ensemble,
                   const std::vector<double>& template_values,
                   const SolveConfig& config) {
  try {
    return solve(ground_templates(ensemble, template_values), config);
  } catch (const BindingError&) {
    return SolvedAnswer{};
  }
}

bool values_match(double a, double b, const SolveConfig& config) {
  return std::abs(a - b) <= config.grade_tol * std::max(1.0, std::abs(b));
}

namespace {

bool roots_contain(const std::vector<double>& roots, double gold,
                   const SolveConfig& cfg) {
  for (double r : roots)
    if (values_match(r, gold, cfg)) return true;
  return false;
}

}  // namespace

bool grade(const EquationTree& predicted, const GoldAnswer& gold,
           const SolveConfig& config) {
  if (gold.values.empty()) return false;
  SolvedAnswer ans;
  try {
    ans = solve(predicted, config);
  } catch (...) {
    return false;
  }
  if (ans.status != SolveStatus::Solved) return false;

  if (ans.is_scalar)
    return gold.values.size() == 1 &&
           values_match(ans.scalar_value, gold.values[0], config);

  if (ans.bindings.size() != gold.values.size()) return false;

  if (gold.values.size() == 1)
    return roots_contain(ans.bindings.begin()->second, gold.values[0], config);

  // two unknowns: any solution combination, order-insensitive assignment
  const auto& xs = ans.bindings.begin()->second;
  const auto& ys = std::next(ans.bindings.begin())->second;
  double g1 = gold.values[0], g2 = gold.values[1];
  for (std::size_t i = 0; i < std::min(xs.size(), ys.size()); ++i) {
    bool direct = values_match(xs[i], g1, config) && values_match(ys[i], g2, config);
    bool swapped = values_match(xs[i], g2, config) && values_match(ys[i], g1, config);
    if (direct || swapped) return true;
  }
  return false;
}

bool grade(const EquationTree& predicted,
           const std::vector<double>& template_values, const GoldAnswer& gold,
           const SolveConfig& config) {
  try {
    return grade(ground_templates(predicted, template_values), gold, config);
  } catch (...) {
    return false;
  }
}

}  // namespace nss
