#include "nssolver/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace nss::ad {

GradCheckReport finite_difference_check(
    ParameterStore& store, const std::function<double(GradBuffer*)>& loss_fn,
    Rng& rng, int max_coords, double epsilon) {
  GradBuffer grads(store);
  loss_fn(&grads);

  std::int64_t total = store.scalar_count();
  int n = static_cast<int>(std::min<std::int64_t>(max_coords, total));
  std::set<std::int64_t> coords;
  while (static_cast<int>(coords.size()) < n)
    coords.insert(static_cast<std::int64_t>(rng.next_u64() % total));

  GradCheckReport report;
  for (std::int64_t flat : coords) {
    // locate the coordinate
    std::int64_t off = flat;
    int pi = 0;
    while (off >= store.at(pi).value.size()) {
      off -= store.at(pi).value.size();
      ++pi;
    }
    Parameter& p = store.at(pi);
    double orig = p.value(off);
    p.value(off) = orig + epsilon;
    double lp = loss_fn(nullptr);
    p.value(off) = orig - epsilon;
    double lm = loss_fn(nullptr);
    p.value(off) = orig;

    double fd = (lp - lm) / (2.0 * epsilon);
    double an = grads.at(pi)(off);
    double rel = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
    ++report.checked;
    if (rel > report.max_rel_err) {
      report.max_rel_err = rel;
      report.worst = p.name + "(" + std::to_string(off % p.value.rows()) +
                     ", " + std::to_string(off / p.value.rows()) + ")";
    }
  }
  return report;
}

namespace {

void fill_uniform(Parameter& p, Rng& rng, double lo, double hi) {
  for (Eigen::Index i = 0; i < p.value.size(); ++i)
    p.value(i) = rng.uniform(lo, hi);
}

// keeps |x| >= margin so kinked ops stay differentiable at the probes
void fill_away_from_zero(Parameter& p, Rng& rng, double margin) {
  for (Eigen::Index i = 0; i < p.value.size(); ++i) {
    double v = rng.uniform(margin, 1.0);
    p.value(i) = rng.uniform() < 0.5 ? v : -v;
  }
}

struct OpHarness {
  std::string name;
  std::function<void(ParameterStore&, Rng&)> setup;
  std::function<Var(Tape&, ParameterStore&)> forward;  // returns scalar loss
};

Var project(Tape& tape, Var out, double seed_mix) {
  // deterministic projection to a scalar so every output entry matters
  Mat w(out.rows(), out.cols());
  for (Eigen::Index i = 0; i < w.size(); ++i)
    w(i) = 0.25 + 0.5 * std::fmod(seed_mix * (static_cast<double>(i) + 1.3), 1.0);
  return sum_all(mul(out, tape.constant(std::move(w))));
}

std::vector<OpHarness> op_harnesses() {
  std::vector<OpHarness> hs;

  auto simple = [](const std::string& name, int rows, int cols,
                   std::function<Var(Tape&, Var)> fn,
                   double lo = -1.5, double hi = 1.5) {
    return OpHarness{
        name,
        [rows, cols, lo, hi](ParameterStore& s, Rng& rng) {
          fill_uniform(s.add("a", rows, cols), rng, lo, hi);
        },
        [fn, name](Tape& t, ParameterStore& s) {
          return project(t, fn(t, t.param(s.at(0))), 0.7315);
        }};
  };

  hs.push_back({"matmul",
                [](ParameterStore& s, Rng& rng) {
                  fill_uniform(s.add("a", 3, 4), rng, -1, 1);
                  fill_uniform(s.add("b", 4, 2), rng, -1, 1);
                },
                [](Tape& t, ParameterStore& s) {
                  return project(t, matmul(t.param(s.at(0)), t.param(s.at(1))),
                                 0.41);
                }});
  hs.push_back({"add",
                [](ParameterStore& s, Rng& rng) {
                  fill_uniform(s.add("a", 3, 3), rng, -1, 1);
                  fill_uniform(s.add("b", 3, 3), rng, -1, 1);
                },
                [](Tape& t, ParameterStore& s) {
                  return project(t, add(t.param(s.at(0)), t.param(s.at(1))),
                                 0.53);
                }});
  hs.push_back({"sub",
                [](ParameterStore& s, Rng& rng) {
                  fill_uniform(s.add("a", 2, 5), rng, -1, 1);
                  fill_uniform(s.add("b", 2, 5), rng, -1, 1);
                },
                [](Tape& t, ParameterStore& s) {
                  return project(t, sub(t.param(s.at(0)), t.param(s.at(1))),
                                 0.21);
                }});
  hs.push_back({"mul",
                [](ParameterStore& s, Rng& rng) {
                  fill_uniform(s.add("a", 4, 2), rng, -1, 1);
                  fill_uniform(s.add("b", 4, 2), rng, -1, 1);
                },
                [](Tape& t, ParameterStore& s) {
                  return project(t, mul(t.param(s.at(0)), t.param(s.at(1))),
                                 0.74);
                }});
  hs.push_back(simple("scale", 3, 4, [](Tape&, Var a) { return scale(a, -2.5); }));
  hs.push_back(simple("square", 3, 3, [](Tape&, Var a) { return square(a); }));
  hs.push_back(simple("transpose", 3, 5, [](Tape&, Var a) { return transpose(a); }));
  hs.push_back({"add_colvec",
                [](ParameterStore& s, Rng& rng) {
                  fill_uniform(s.add("m", 4, 5), rng, -1, 1);
                  fill_uniform(s.add("v", 4, 1), rng, -1, 1);
                },
                [](Tape& t, ParameterStore& s) {
                  return project(
                      t, add_colvec(t.param(s.at(0)), t.param(s.at(1))), 0.9);
                }});
  hs.push_back({"vconcat",
                [](ParameterStore& s, Rng& rng) {
                  fill_uniform(s.add("a", 2, 3), rng, -1, 1);
                  fill_uniform(s.add("b", 4, 3), rng, -1, 1);
                },
                [](Tape& t, ParameterStore& s) {
                  return project(t, vconcat(t.param(s.at(0)), t.param(s.at(1))),
                                 0.36);
                }});
  hs.push_back({"concat_cols",
                [](ParameterStore& s, Rng& rng) {
                  fill_uniform(s.add("a", 3, 1), rng, -1, 1);
                  fill_uniform(s.add("b", 3, 2), rng, -1, 1);
                  fill_uniform(s.add("c", 3, 1), rng, -1, 1);
                },
                [](Tape& t, ParameterStore& s) {
                  return project(t,
                                 concat_cols({t.param(s.at(0)), t.param(s.at(1)),
                                              t.param(s.at(2))}),
                                 0.62);
                }});
  hs.push_back(simple("block", 4, 6,
                      [](Tape&, Var a) { return block(a, 1, 2, 2, 3); }));
  hs.push_back(simple("sigmoid", 3, 4, [](Tape&, Var a) { return sigmoid(a); }));
  hs.push_back(simple("tanh", 3, 4, [](Tape&, Var a) { return tanh(a); }));
  hs.push_back({"relu",
                [](ParameterStore& s, Rng& rng) {
                  fill_away_from_zero(s.add("a", 4, 4), rng, 0.2);
                },
                [](Tape& t, ParameterStore& s) {
                  return project(t, relu(t.param(s.at(0))), 0.48);
                }});
  hs.push_back(simple("softmax", 6, 1, [](Tape&, Var a) { return softmax(a); }));
  hs.push_back(simple("log_softmax", 6, 1,
                      [](Tape&, Var a) { return log_softmax(a); }));
  hs.push_back({"masked_softmax",
                [](ParameterStore& s, Rng& rng) {
                  fill_uniform(s.add("a", 7, 1), rng, -1.5, 1.5);
                },
                [](Tape& t, ParameterStore& s) {
                  std::vector<std::uint8_t> mask = {1, 0, 1, 1, 0, 1, 1};
                  return project(t, masked_softmax(t.param(s.at(0)), mask),
                                 0.58);
                }});
  hs.push_back({"embedding_lookup",
                [](ParameterStore& s, Rng& rng) {
                  fill_uniform(s.add("table", 4, 6), rng, -1, 1);
                },
                [](Tape& t, ParameterStore& s) {
                  std::vector<int> ids = {3, 0, 3, 5};
                  return project(t, embedding_lookup(t.param(s.at(0)), ids),
                                 0.81);
                }});
  hs.push_back(simple("mean_all", 4, 5, [](Tape&, Var a) { return mean_all(a); }));
  hs.push_back(simple("sum_all", 4, 5, [](Tape&, Var a) { return sum_all(a); }));
  hs.push_back(simple("dropout", 5, 5, [](Tape&, Var a) {
    return dropout(a, 0.3, true);
  }));
  hs.push_back({"log_clamped",
                [](ParameterStore& s, Rng& rng) {
                  fill_uniform(s.add("a", 4, 3), rng, 0.05, 0.95);
                },
                [](Tape& t, ParameterStore& s) {
                  return project(t, log_clamped(t.param(s.at(0))), 0.27);
                }});
  hs.push_back({"binary_cross_entropy",
                [](ParameterStore& s, Rng& rng) {
                  fill_uniform(s.add("logits", 6, 1), rng, -1.5, 1.5);
                },
                [](Tape& t, ParameterStore& s) {
                  Mat targets(6, 1);
                  targets << 1, 0, 0, 1, 1, 0;
                  return binary_cross_entropy(sigmoid(t.param(s.at(0))),
                                              targets);
                }});
  hs.push_back({"categorical_cross_entropy",
                [](ParameterStore& s, Rng& rng) {
                  fill_uniform(s.add("logits", 8, 1), rng, -2, 2);
                },
                [](Tape& t, ParameterStore& s) {
                  return categorical_cross_entropy(
                      log_softmax(t.param(s.at(0))), 3);
                }});
  return hs;
}

}  // namespace

GradCheckReport check_all_ops(std::uint64_t seed) {
  GradCheckReport worst;
  for (auto& h : op_harnesses()) {
    ParameterStore store;
    Rng init_rng(mix_seed(seed, std::hash<std::string>{}(h.name)));
    h.setup(store, init_rng);
    std::uint64_t tape_seed = mix_seed(seed, 17);
    auto loss_fn = [&](GradBuffer* gb) {
      Tape tape(tape_seed);
      Var loss = h.forward(tape, store);
      double v = loss.value()(0, 0);
      if (gb) tape.backward(loss, *gb);
      return v;
    };
    Rng coord_rng(mix_seed(seed, 31));
    auto report = finite_difference_check(store, loss_fn, coord_rng, 256);
    if (report.max_rel_err > worst.max_rel_err) {
      worst.max_rel_err = report.max_rel_err;
      worst.worst = h.name + " " + report.worst;
    }
    worst.checked += report.checked;
  }
  return worst;
}

}  // namespace nss::ad
