#include "nssolver/executor.hpp"

#include "test_util.hpp"

#include <doctest.h>

#include <cmath>

using namespace nss;

namespace {

EquationTree infix(const std::string& text) {
  return parse_infix(text, testutil::table_with_templates(0));
}

}  // namespace

TEST_CASE("eval_arithmetic basics") {
  auto table = testutil::table_with_templates(2);
  auto plus = EquationTree::internal(Symbol::op("+"),
                                     EquationTree::leaf(Symbol::constant(2)),
                                     EquationTree::leaf(Symbol::constant(3)));
  CHECK(eval_arithmetic(plus, {}) == 5.0);

  auto diff = EquationTree::internal(
      Symbol::op("-"), EquationTree::leaf(Symbol::number_template(1)),
      EquationTree::leaf(Symbol::number_template(2)));
  CHECK(eval_arithmetic(diff, {{"n_1", 26.0}, {"n_2", 82.0}}) == -56.0);

  auto expr = parse_infix("x=(3+4)*2", table);
  CHECK(eval_arithmetic(EquationTree(expr.root().right), {}) == 14.0);
}

TEST_CASE("eval_arithmetic error paths") {
  auto div0 = infix("x=1/0");
  CHECK_THROWS_AS(eval_arithmetic(EquationTree(div0.root().right), {}),
                  SingularError);
  auto pow0 = infix("x=0^(0-2)");
  CHECK_THROWS_AS(eval_arithmetic(EquationTree(pow0.root().right), {}),
                  SingularError);
  auto unbound = EquationTree::leaf(Symbol::unknown("y"));
  CHECK_THROWS_AS(eval_arithmetic(unbound, {}), BindingError);
}

TEST_CASE("solve handles the four dispatch classes") {
  SUBCASE("direct assignment") {
    auto ans = solve(infix("x=26-82"));
    REQUIRE(ans.status == SolveStatus::Solved);
    REQUIRE(ans.bindings.count("x") == 1);
    CHECK(ans.bindings.at("x")[0] == doctest::Approx(-56.0).epsilon(1e-12));
  }
  SUBCASE("affine one unknown") {
    auto ans = solve(infix("3*x+5=26"));
    REQUIRE(ans.status == SolveStatus::Solved);
    CHECK(ans.bindings.at("x")[0] == doctest::Approx(7.0).epsilon(1e-12));
  }
  SUBCASE("quadratic returns both real roots") {
    auto ans = solve(infix("x^2=9"));
    REQUIRE(ans.status == SolveStatus::Solved);
    REQUIRE(ans.bindings.at("x").size() == 2);
    CHECK(ans.bindings.at("x")[0] == doctest::Approx(-3.0).epsilon(1e-9));
    CHECK(ans.bindings.at("x")[1] == doctest::Approx(3.0).epsilon(1e-9));
  }
  SUBCASE("2x2 affine system") {
    auto ans = solve(infix("x+y=26 ; 2*x+4*y=82"));
    REQUIRE(ans.status == SolveStatus::Solved);
    CHECK(ans.bindings.at("x")[0] == doctest::Approx(11.0).epsilon(1e-12));
    CHECK(ans.bindings.at("y")[0] == doctest::Approx(15.0).epsilon(1e-12));
  }
}

TEST_CASE("solve failure statuses") {
  CHECK(solve(infix("x+1=x")).status == SolveStatus::NoRealSolution);
  CHECK(solve(infix("x=x")).status == SolveStatus::Singular);
  CHECK(solve(infix("x+y=3 ; 2*x+2*y=6")).status == SolveStatus::Singular);
  CHECK(solve(infix("x+y=3")).status == SolveStatus::Singular);
  CHECK(solve(infix("x^2=0-9")).status != SolveStatus::Solved);
  CHECK(solve(infix("x=1/0")).status == SolveStatus::Singular);
}

TEST_CASE("solve verifies templates through grounding") {
  auto table = testutil::table_with_templates(2);
  auto tree = parse_infix("x+y=n_1 ; 2*x+4*y=n_2", table);
  auto ans = solve(tree, std::vector<double>{26.0, 82.0});
  REQUIRE(ans.status == SolveStatus::Solved);
  CHECK(ans.bindings.at("x")[0] == doctest::Approx(11.0));
  CHECK(ans.bindings.at("y")[0] == doctest::Approx(15.0));
}

TEST_CASE("grade implements answer-accuracy semantics") {
  SolveConfig cfg;
  SUBCASE("system graded order-insensitively") {
    auto predicted = infix("x=(82-2*26)/2 ; y=26-x");
    GoldAnswer gold{{"x", "y"}, {11.0, 15.0}};
    CHECK(grade(predicted, gold, cfg));
  }
  SUBCASE("solver failures grade false") {
    GoldAnswer gold{{}, {7.0}};
    CHECK_FALSE(grade(infix("x=1/0"), gold, cfg));
  }
  SUBCASE("any real root may match the gold answer") {
    GoldAnswer gold{{"x"}, {3.0}};
    CHECK(grade(infix("x^2=9"), gold, cfg));
    GoldAnswer negative{{"x"}, {-3.0}};
    CHECK(grade(infix("x^2=9"), negative, cfg));
  }
  SUBCASE("scalar gold accepts a one-unknown assignment") {
    GoldAnswer gold{{}, {-56.0}};
    CHECK(grade(infix("x=26-82"), gold, cfg));
    CHECK_FALSE(grade(infix("x=26-81"), gold, cfg));
  }
  SUBCASE("unknown-count mismatch grades false") {
    GoldAnswer gold{{}, {7.0}};
    CHECK_FALSE(grade(infix("x+y=10 ; x-y=4"), gold, cfg));
  }
}

TEST_CASE("closed-form oracle equivalence on random instances") {
  Rng rng(99);
  SolveConfig cfg;
  SUBCASE("affine one unknown") {
    for (int i = 0; i < 200; ++i) {
      double a = 0.0;
      while (std::abs(a) < 0.1) a = rng.uniform(-20, 20);
      double b = rng.uniform(-50, 50);
      double c = rng.uniform(-50, 50);
      auto tree = parse_infix(
          "(" + fmt_g(a) + "*x+" + fmt_g(b) + ")=" + fmt_g(c),
          testutil::table_with_templates(0));
      auto ans = solve(tree, cfg);
      REQUIRE(ans.status == SolveStatus::Solved);
      double expected = (c - b) / a;
      CHECK(std::abs(ans.bindings.at("x")[0] - expected) <=
            1e-9 * std::max(1.0, std::abs(expected)));
    }
  }
  SUBCASE("2x2 affine systems") {
    for (int i = 0; i < 200; ++i) {
      double a1 = rng.uniform(-9, 9), b1 = rng.uniform(-9, 9);
      double a2 = rng.uniform(-9, 9), b2 = rng.uniform(-9, 9);
      double det = a1 * b2 - a2 * b1;
      if (std::abs(det) < 0.5) continue;
      double x = rng.uniform(-10, 10), y = rng.uniform(-10, 10);
      double c1 = a1 * x + b1 * y, c2 = a2 * x + b2 * y;
      std::string text = fmt_g(a1) + "*x+" + fmt_g(b1) + "*y=" + fmt_g(c1) +
                         " ; " + fmt_g(a2) + "*x+" + fmt_g(b2) +
                         "*y=" + fmt_g(c2);
      auto ans = solve(parse_infix(text, testutil::table_with_templates(0)), cfg);
      REQUIRE(ans.status == SolveStatus::Solved);
      CHECK(std::abs(ans.bindings.at("x")[0] - x) <= 1e-9 * std::max(1.0, std::abs(x)));
      CHECK(std::abs(ans.bindings.at("y")[0] - y) <= 1e-9 * std::max(1.0, std::abs(y)));
    }
  }
  SUBCASE("quadratics with known integer roots") {
    for (int i = 0; i < 100; ++i) {
      int r = rng.uniform_int(1, 30);
      int a = rng.uniform_int(1, 5);
      std::string text = fmt_g(a) + "*x^2=" + fmt_g(a * r * r);
      auto ans = solve(parse_infix(text, testutil::table_with_templates(0)), cfg);
      REQUIRE(ans.status == SolveStatus::Solved);
      REQUIRE(ans.bindings.at("x").size() == 2);
      CHECK(std::abs(ans.bindings.at("x")[0] + r) <= 1e-9 * std::max(1.0, double(r)));
      CHECK(std::abs(ans.bindings.at("x")[1] - r) <= 1e-9 * std::max(1.0, double(r)));
    }
  }
}

TEST_CASE("residual soundness holds on every Solved output") {
  Rng rng(123);
  SolveConfig cfg;
  int solved = 0;
  for (int i = 0; i < 300; ++i) {
    auto tree = testutil::random_tree(rng, 0);
    SolvedAnswer ans;
    try {
      ans = solve(tree, cfg);
    } catch (...) {
      continue;
    }
    if (ans.status != SolveStatus::Solved || ans.is_scalar) continue;
    ++solved;
    std::size_t combos = ans.bindings.begin()->second.size();
    for (std::size_t c = 0; c < combos; ++c) {
      std::map<std::string, double> bind;
      bool aligned = true;
      for (const auto& [name, roots] : ans.bindings) {
        if (c >= roots.size()) { aligned = false; break; }
        bind[name] = roots[c];
      }
      if (!aligned) continue;
      for (const auto& seg : split_ensemble(tree)) {
        double lhs = eval_arithmetic(EquationTree(seg.root().left), bind);
        double rhs = eval_arithmetic(EquationTree(seg.root().right), bind);
        CHECK(std::abs(lhs - rhs) <= kResidualBound * std::max(1.0, std::abs(rhs)));
      }
    }
  }
  CHECK(solved > 20);  // the generator must exercise the solver
}

TEST_CASE("quartics surface every real root, ascending") {
  auto ans = solve(infix("x^4-10*x^2+9=0"));
  REQUIRE(ans.status == SolveStatus::Solved);
  REQUIRE(ans.bindings.at("x").size() == 4);
  double expect[] = {-3.0, -1.0, 1.0, 3.0};
  for (int i = 0; i < 4; ++i)
    CHECK(ans.bindings.at("x")[i] == doctest::Approx(expect[i]).epsilon(1e-9));
}

TEST_CASE("solve is deterministic") {
  auto t = infix("x^2=7");
  auto a = solve(t);
  auto b = solve(t);
  REQUIRE(a.status == b.status);
  REQUIRE(a.bindings.at("x").size() == b.bindings.at("x").size());
  for (std::size_t i = 0; i < a.bindings.at("x").size(); ++i)
    CHECK(a.bindings.at("x")[i] == b.bindings.at("x")[i]);
}
