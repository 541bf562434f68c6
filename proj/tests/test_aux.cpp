#include "nssolver/aux_tasks.hpp"
#include "nssolver/dual_models.hpp"
#include "nssolver/equation_tree.hpp"
#include "nssolver/gradcheck.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>

using namespace nss;
using namespace nss::ad;

TEST_CASE("nqp uniform head scores ln(Q+1)") {
  ParameterStore store;
  AuxHeadParams heads = make_aux_heads(store, 8, 10, 24, 4, 0, 0);
  Tape tape;
  Var pooled = tape.constant(Mat::Ones(8, 1));
  Var loss = nqp_loss(tape, heads, pooled, 2);
  CHECK(loss.value()(0, 0) == doctest::Approx(std::log(11.0)).epsilon(1e-9));
  CHECK_THROWS_AS(nqp_loss(tape, heads, pooled, 11), AuxConfigError);
}

TEST_CASE("nlp multi-hot targets reconstruct the number positions") {
  std::vector<int> positions = {3, 7, 15};
  Mat target = multi_hot(24, positions);
  std::vector<int> decoded;
  for (int i = 0; i < 24; ++i)
    if (target(i) == 1.0) decoded.push_back(i);
  CHECK(decoded == positions);
}

TEST_CASE("nlp rejects positions beyond L") {
  ParameterStore store;
  AuxHeadParams heads = make_aux_heads(store, 8, 5, 10, 2, 0, 0);
  Tape tape;
  Var pooled = tape.constant(Mat::Zero(8, 1));
  CHECK_THROWS_AS(nlp_loss(tape, heads, pooled, {10}), AuxConfigError);
}

TEST_CASE("perfect predictions cost nothing; confident errors stay finite") {
  Tape tape;
  Mat targets(4, 1);
  targets << 1, 0, 1, 0;
  Var perfect = binary_cross_entropy(tape.constant(targets), targets);
  CHECK(perfect.value()(0, 0) == doctest::Approx(0.0).epsilon(1e-9));

  Mat wrong(4, 1);
  wrong << 0, 1, 0, 1;  // clamps keep the loss finite
  Var bad = binary_cross_entropy(tape.constant(wrong), targets);
  CHECK(std::isfinite(bad.value()(0, 0)));
  CHECK(bad.value()(0, 0) ==
        doctest::Approx(4.0 * -std::log(1e-12)).epsilon(1e-6));
}

TEST_CASE("select_constants keeps confident picks plus the best three others") {
  // vocabulary [1, 2, 4, 3.14, 10, 12]
  Vec probs(6);
  probs << 0.9, 0.95, 0.8, 0.2, 0.3, 0.1;
  auto picked = select_constants(probs);
  CHECK(picked == std::vector<int>{1, 0, 2, 4, 3, 5});

  SUBCASE("all confident: everything selected, no extras required") {
    Vec high(4);
    high << 0.9, 0.8, 0.7, 0.6;
    CHECK(select_constants(high) == std::vector<int>{0, 1, 2, 3});
  }
  SUBCASE("tiny vocabularies are selected whole") {
    Vec low(3);
    low << 0.1, 0.3, 0.2;
    CHECK(select_constants(low) == std::vector<int>{1, 2, 0});
  }
}

TEST_CASE("semantic loss closed forms") {
  SUBCASE("all-correct fully confident steps cost zero") {
    std::vector<Vec> dists;
    Vec d(3);
    d << 1.0, 0.0, 0.0;
    dists = {d, d};
    CHECK(semantic_loss_value(dists, {0, 0}) ==
          doctest::Approx(0.0).epsilon(1e-9));
  }
  SUBCASE("worked two-step case") {
    Vec d1(2), d2(2);
    d1 << 0.8, 0.2;  // argmax 0, gold 0: contributes -log 0.8
    d2 << 0.6, 0.4;  // argmax 0, gold 1: contributes -log 0.4
    double v = semantic_loss_value({d1, d2}, {0, 1});
    CHECK(v == doctest::Approx(1.1394).epsilon(1e-4));
    CHECK(v == doctest::Approx(-std::log(0.8 * 0.4)).epsilon(1e-12));
  }
  SUBCASE("confident wrong steps clamp at about 27.63 each") {
    Vec d(2);
    d << 1.0, 0.0;
    double v = semantic_loss_value({d, d, d}, {1, 1, 1});
    CHECK(v == doctest::Approx(3.0 * -std::log(1e-12)).epsilon(1e-6));
  }
  SUBCASE("length mismatch is an error") {
    Vec d(2);
    d << 0.5, 0.5;
    CHECK_THROWS_AS(semantic_loss_value({d}, {0, 1}), AuxConfigError);
  }
}

TEST_CASE("semantic loss monotonicity in the matched-step probability") {
  auto loss_at = [](double p) {
    Vec d(2);
    d << p, 1.0 - p;
    return semantic_loss_value({d}, {0});
  };
  CHECK(loss_at(0.9) < loss_at(0.8));
  CHECK(loss_at(0.8) < loss_at(0.7));
}

TEST_CASE("semantic loss tape route matches the value route") {
  Tape tape;
  Mat d1(3, 1), d2(3, 1);
  d1 << 0.7, 0.2, 0.1;
  d2 << 0.25, 0.6, 0.15;
  std::vector<Var> dists = {tape.constant(d1), tape.constant(d2)};
  Var loss = semantic_loss(tape, dists, {0, 2});
  double expect =
      semantic_loss_value({Vec(d1.col(0)), Vec(d2.col(0))}, {0, 2});
  CHECK(loss.value()(0, 0) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("dual loss closed forms and invariances") {
  CHECK(dual_loss_value(-10, -20, -12, -18) == 0.0);
  CHECK(dual_loss_value(-10, -20, -12, -17) == 1.0);
  // adding the same constant to one term of each pathway changes nothing
  double base = dual_loss_value(-3.5, -8.25, -4.75, -6.5);
  CHECK(dual_loss_value(-3.5 + 2.25, -8.25, -4.75 + 2.25, -6.5) ==
        doctest::Approx(base).epsilon(1e-15));

  Tape tape;
  Var nll_t = tape.scalar(20.0);   // log p(T|P)  = -20
  Var nll_pos = tape.scalar(17.0); // log p(P'|T) = -17
  Var v = dual_loss(tape, -10.0, nll_t, -12.0, nll_pos);
  CHECK(v.value()(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("rule tagger uses the lexicon, NUM templates, and X fallback") {
  auto tags = rule_pos_tagger({"tom", "has", "n_1", "apples"});
  CHECK(tags == std::vector<std::string>{"NOUN", "VERB", "NUM", "NOUN"});
  CHECK(rule_pos_tagger({}).empty());
  CHECK(rule_pos_tagger({"zyzzyva"}) == std::vector<std::string>{"X"});
}

TEST_CASE("lexicon files load one token<TAB>TAG per line") {
  std::string path = "pos_lexicon_test.tsv";
  {
    std::ofstream out(path);
    out << "glorp\tNOUN\nfrobs\tVERB\n";
  }
  PosLexicon lex = PosLexicon::load(path);
  auto tags = lex.tag({"glorp", "frobs", "n_2", "???"});
  CHECK(tags == std::vector<std::string>{"NOUN", "VERB", "NUM", "X"});
  std::remove(path.c_str());
}

TEST_CASE("pos branch: uniform decoder scores len * ln(n_tags)") {
  ParameterStore store;  // zero parameters keep the logits flat
  TreeEncoderParams te = make_tree_encoder(store, 6, 0);
  PosDecoderParams pd = make_pos_decoder(store, 4, 6, 12, 0);
  Tape tape;
  SymbolTable table({Symbol::unknown("x"), Symbol::unknown("y")}, {}, {1.0});
  EquationTree tree = parse_infix("x=n_1+3", table);
  Var zero_leaf = tape.constant(Mat::Zero(6, 1));
  Var nodes = encode_tree(tape, te, tree, [&](const Symbol&) { return zero_leaf; });
  CHECK(nodes.cols() == 5);
  std::vector<int> gold(7, 3);
  auto res = pos_branch(tape, pd, nodes, gold, 0.0, false);
  REQUIRE(res.step_probs.size() == 7);
  CHECK(res.nll.value()(0, 0) ==
        doctest::Approx(7.0 * std::log(12.0)).epsilon(1e-9));
}

TEST_CASE("pos branch handles a single-node tree") {
  ParameterStore store;
  Rng rng(2);
  TreeEncoderParams te = make_tree_encoder(store, 6, 0);
  PosDecoderParams pd = make_pos_decoder(store, 4, 6, 5, 0);
  for (int i = 0; i < store.size(); ++i) init_xavier_uniform(store.at(i), rng);
  Tape tape;
  EquationTree leaf = EquationTree::leaf(Symbol::constant(3.0));
  Var rep = tape.constant(Mat::Ones(6, 1));
  Var nodes = encode_tree(tape, te, leaf, [&](const Symbol&) { return rep; });
  CHECK(nodes.cols() == 1);
  auto res = pos_branch(tape, pd, nodes, {1, 2}, 0.0, false);
  CHECK(res.step_probs.size() == 2);
  CHECK(std::isfinite(res.nll.value()(0, 0)));
}

TEST_CASE("language model NLL: tape and frozen evaluation agree") {
  ParameterStore store;
  LstmLmParams lm = make_lstm_lm(store, "lm", 5, 7, 9, 0);
  Rng rng(4);
  for (int i = 0; i < store.size(); ++i) init_xavier_uniform(store.at(i), rng);
  std::vector<int> seq = {3, 5, 2, 8, 3};
  Tape tape;
  Var nll = lm_nll(tape, lm, seq);
  double frozen = lm_nll_value(lm, seq);
  CHECK(nll.value()(0, 0) == doctest::Approx(frozen).epsilon(1e-12));
}

TEST_CASE("language model gradients pass the finite-difference check") {
  ParameterStore store;
  LstmLmParams lm = make_lstm_lm(store, "lm", 4, 5, 7, 0);
  Rng rng(6);
  for (int i = 0; i < store.size(); ++i) init_xavier_uniform(store.at(i), rng);
  std::vector<int> seq = {2, 4, 6, 3};
  auto loss_fn = [&](GradBuffer* gb) {
    Tape tape(1);
    Var loss = lm_nll(tape, lm, seq);
    double v = loss.value()(0, 0);
    if (gb) tape.backward(loss, *gb);
    return v;
  };
  Rng coords(8);
  auto report = finite_difference_check(store, loss_fn, coords, 96);
  INFO("worst: ", report.worst);
  CHECK(report.max_rel_err < 1e-4);
}
