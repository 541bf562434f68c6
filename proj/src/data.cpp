#include "nssolver/data.hpp"

#include "nssolver/aux_tasks.hpp"
#include "nssolver/common.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace nss {

namespace {

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  std::string tok;
  while (in >> tok) out.push_back(tok);
  return out;
}

// answer strings accept an optional sign ahead of the numeric token forms
double parse_answer_value(const std::string& s) {
  std::string t = s;
  double sign = 1.0;
  if (!t.empty() && (t[0] == '-' || t[0] == '+')) {
    if (t[0] == '-') sign = -1.0;
    t = t.substr(1);
  }
  auto v = parse_numeric_token(t);
  if (!v) throw std::runtime_error("unparseable answer value '" + s + "'");
  return sign * *v;
}

}  // namespace

Vocabulary Vocabulary::build(const std::vector<ProblemInstance>& train,
                             int unk_min_count, int max_templates) {
  std::map<std::string, int> counts;
  for (const auto& p : train)
    for (const auto& tok : p.templated_tokens)
      if (tok.compare(0, 2, "n_") != 0) counts[tok] += 1;

  std::vector<std::string> toks = {"<pad>", "<unk>"};
  for (int k = 1; k <= max_templates; ++k)
    toks.push_back("n_" + std::to_string(k));
  // frequency-descending, then lexicographic, for a reproducible layout
  std::vector<std::pair<std::string, int>> items(counts.begin(), counts.end());
  std::sort(items.begin(), items.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  for (const auto& [tok, count] : items)
    if (count >= unk_min_count) toks.push_back(tok);
  return from_tokens(std::move(toks));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i)
    v.ids_[v.tokens_[i]] = static_cast<int>(i);
  return v;
}

int Vocabulary::id_of(const std::string& token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<int> Vocabulary::encode(
    const std::vector<std::string>& tokens) const {
  std::vector<int> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id_of(t));
  return out;
}

namespace {

using nlohmann::json;

ProblemType infer_type(const EquationTree& tree) {
  std::vector<Symbol> prefix = to_prefix(tree);
  bool has_semi = false;
  std::vector<std::string> unknowns;
  for (const auto& s : prefix) {
    if (s.name == ";") has_semi = true;
    if (s.kind == SymbolKind::Unknown &&
        std::find(unknowns.begin(), unknowns.end(), s.name) == unknowns.end())
      unknowns.push_back(s.name);
  }
  if (has_semi || unknowns.size() > 1) return ProblemType::System;
  if (unknowns.empty()) return ProblemType::Arithmetic;
  // single unknown: direct "x = expr" with an unknown-free right side is
  // plain arithmetic; a power over the unknown marks it nonlinear
  const auto& root = tree.root();
  if (root.symbol.name == "=" && root.left->is_leaf() &&
      root.left->symbol.kind == SymbolKind::Unknown) {
    bool rhs_has_unknown = false;
    for (const auto& s : to_prefix(EquationTree(root.right)))
      if (s.kind == SymbolKind::Unknown) rhs_has_unknown = true;
    if (!rhs_has_unknown) return ProblemType::Arithmetic;
  }
  std::function<bool(const EquationTree::Node&)> has_pow_over_unknown =
      [&](const EquationTree::Node& n) -> bool {
    if (n.is_leaf()) return false;
    if (n.symbol.name == "^") {
      for (const auto& s : to_prefix(EquationTree(n.left)))
        if (s.kind == SymbolKind::Unknown) return true;
    }
    return has_pow_over_unknown(*n.left) || has_pow_over_unknown(*n.right);
  };
  return has_pow_over_unknown(tree.root()) ? ProblemType::Nonlinear1
                                           : ProblemType::Linear1;
}

std::string normalize_equation_text(std::string eq) {
  for (char& c : eq) {
    if (c == '[') c = '(';
    if (c == ']') c = ')';
  }
  if (eq.find('=') == std::string::npos) eq = "x=" + eq;
  return eq;
}

ProblemInstance record_to_instance(const json& rec, CorpusFormat format,
                                   const SolveConfig& solve_cfg) {
  ProblemInstance p;
  if (rec.contains("id")) {
    const auto& id = rec.at("id");
    p.id = id.is_string() ? id.get<std::string>() : id.dump();
  }
  p.tokens = split_ws(rec.at("segmented_text").get<std::string>());
  auto mapped = tokenize_and_map(p.tokens);
  p.templated_tokens = std::move(mapped.templated_tokens);
  p.number_values = std::move(mapped.number_values);
  p.number_positions = std::move(mapped.number_positions);

  p.gold_equation_text = rec.at("equation").get<std::string>();
  std::string eq_text = p.gold_equation_text;
  if (format == CorpusFormat::Math23k) eq_text = normalize_equation_text(eq_text);

  SymbolTable parse_table({Symbol::unknown("x"), Symbol::unknown("y")}, {},
                          p.number_values);
  p.gold_tree = parse_infix(eq_text, parse_table, /*substitute=*/true);
  validate_tree(p.gold_tree);

  if (format == CorpusFormat::Canonical) {
    std::string type_name = rec.at("type").get<std::string>();
    auto t = problem_type_from_name(type_name);
    if (!t) throw std::runtime_error("unknown problem type '" + type_name + "'");
    p.type = *t;
  } else {
    p.type = infer_type(p.gold_tree);
  }

  // answers
  std::vector<double> values;
  const auto& ans = rec.at("ans");
  if (ans.is_array()) {
    for (const auto& a : ans)
      values.push_back(a.is_string() ? parse_answer_value(a.get<std::string>())
                                     : a.get<double>());
  } else if (ans.is_string()) {
    values.push_back(parse_answer_value(ans.get<std::string>()));
  } else {
    values.push_back(ans.get<double>());
  }
  if (p.type == ProblemType::Arithmetic) {
    if (values.size() != 1)
      throw std::runtime_error("arithmetic record needs one answer value");
    p.gold_answers = GoldAnswer{{}, values};
  } else if (p.type == ProblemType::System) {
    if (values.size() != 2)
      throw std::runtime_error("system record needs two answer values");
    p.gold_answers = GoldAnswer{{"x", "y"}, values};
  } else {
    if (values.size() != 1)
      throw std::runtime_error("one-unknown record needs one answer value");
    p.gold_answers = GoldAnswer{{"x"}, values};
  }

  // POS tags: given, or produced by the rule tagger over templated tokens
  if (rec.contains("pos")) {
    auto tags = split_ws(rec.at("pos").get<std::string>());
    if (tags.size() != p.tokens.size())
      throw std::runtime_error("pos field length " + std::to_string(tags.size()) +
                               " does not match " +
                               std::to_string(p.tokens.size()) + " tokens");
    p.pos_tags = std::move(tags);
    p.pos_provided = true;
  } else {
    p.pos_tags = rule_pos_tagger(p.templated_tokens);
  }

  if (!grade(p.gold_tree, p.number_values, p.gold_answers, solve_cfg))
    throw std::runtime_error("gold equation does not grade true against answer");
  return p;
}

}  // namespace

std::vector<ProblemInstance> load_corpus_lines(
    const std::vector<std::string>& lines, CorpusFormat format,
    LoadReport* report, const SolveConfig& solve_cfg) {
  std::vector<ProblemInstance> out;
  LoadReport local;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    ++local.total;
    std::string id = "line " + std::to_string(i + 1);
    try {
      json rec = json::parse(line);
      if (rec.contains("id")) {
        const auto& jid = rec.at("id");
        id = jid.is_string() ? jid.get<std::string>() : jid.dump();
      }
      out.push_back(record_to_instance(rec, format, solve_cfg));
      ++local.accepted;
    } catch (const std::exception& e) {
      local.rejected.emplace_back(id, e.what());
    }
  }
  if (report) *report = std::move(local);
  return out;
}

std::vector<ProblemInstance> load_corpus(const std::string& path,
                                         CorpusFormat format,
                                         LoadReport* report,
                                         const SolveConfig& solve_cfg) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_corpus: cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) lines.push_back(line);
  return load_corpus_lines(lines, format, report, solve_cfg);
}

std::array<std::vector<ProblemInstance>, 3> split_corpus(
    const std::vector<ProblemInstance>& records, double train_ratio,
    double valid_ratio, double test_ratio, std::uint64_t seed) {
  double sum = train_ratio + valid_ratio + test_ratio;
  if (std::abs(sum - 1.0) > 1e-9)
    throw std::invalid_argument("split_corpus: ratios must sum to 1");
  std::vector<int> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  std::size_t n = records.size();
  std::size_t n_train = static_cast<std::size_t>(std::llround(n * train_ratio));
  std::size_t n_valid = static_cast<std::size_t>(std::llround(n * valid_ratio));
  n_train = std::min(n_train, n);
  n_valid = std::min(n_valid, n - n_train);
  std::array<std::vector<ProblemInstance>, 3> out;
  for (std::size_t i = 0; i < n; ++i) {
    const ProblemInstance& p = records[order[i]];
    if (i < n_train) out[0].push_back(p);
    else if (i < n_train + n_valid) out[1].push_back(p);
    else out[2].push_back(p);
  }
  return out;
}

std::vector<std::vector<ProblemInstance>> kfold(
    const std::vector<ProblemInstance>& records, int k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("kfold: k must be at least 2");
  std::vector<int> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.shuffle(order);
  std::vector<std::vector<ProblemInstance>> folds(k);
  for (std::size_t i = 0; i < order.size(); ++i)
    folds[i % k].push_back(records[order[i]]);
  return folds;
}

DatasetStats compute_stats(const std::vector<ProblemInstance>& records) {
  DatasetStats s;
  if (records.empty()) return s;
  for (const auto& p : records) {
    auto prefix = to_prefix(p.gold_tree);
    s.avg_problem_length += static_cast<double>(p.tokens.size());
    s.avg_equation_length += static_cast<double>(prefix.size());
    s.avg_tree_size += compute_tree_size(p.gold_tree);
    s.avg_num_count += static_cast<double>(p.number_values.size());
    s.avg_sni_count += static_cast<double>(p.gold_template_indices().size());
    int ops = 0;
    for (const auto& sym : prefix)
      if (sym.is_operator()) ++ops;
    s.avg_ops_count += ops;
    s.avg_constants_count += static_cast<double>(p.gold_constants().size());
  }
  double n = static_cast<double>(records.size());
  s.avg_problem_length /= n;
  s.avg_equation_length /= n;
  s.avg_tree_size /= n;
  s.avg_num_count /= n;
  s.avg_sni_count /= n;
  s.avg_ops_count /= n;
  s.avg_constants_count /= n;
  return s;
}

std::string stats_to_json(const DatasetStats& s) {
  nlohmann::ordered_json j;
  j["PL"] = s.avg_problem_length;
  j["EL"] = s.avg_equation_length;
  j["TS"] = s.avg_tree_size;
  j["Num"] = s.avg_num_count;
  j["SNI"] = s.avg_sni_count;
  j["Ops"] = s.avg_ops_count;
  j["Constants"] = s.avg_constants_count;
  return j.dump();
}

std::vector<Symbol> extract_constant_vocab(
    const std::vector<ProblemInstance>& records) {
  std::vector<Symbol> out;
  for (const auto& p : records)
    for (const auto& c : p.gold_constants())
      if (std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  std::sort(out.begin(), out.end(),
            [](const Symbol& a, const Symbol& b) { return a.value < b.value; });
  return out;
}

// ---- synthetic corpus ----

namespace {

struct GenRecord {
  std::string text;      // space-separated tokens, numbers inline
  std::string equation;  // templates for text numbers, literals for constants
  std::vector<double> answers;
  ProblemType type;
};

const std::vector<std::string> kNames = {"tom", "sara", "jane", "leo", "mia"};
const std::vector<std::string> kObjects = {"apples",  "pears", "pens",
                                           "candies", "marbles", "books"};

std::string pron_for(const std::string& name) {
  return (name == "tom" || name == "leo") ? "he" : "she";
}

std::string num(double v) { return fmt_g(v); }

GenRecord gen_arith(Rng& rng) {
  GenRecord r;
  r.type = ProblemType::Arithmetic;
  const std::string name = kNames[rng.uniform_int(0, 4)];
  const std::string obj = kObjects[rng.uniform_int(0, 5)];
  const std::string pron = pron_for(name);
  switch (rng.uniform_int(0, 6)) {
    case 0: {
      int a = rng.uniform_int(3, 60), b = rng.uniform_int(3, 60);
      r.text = name + " has " + num(a) + " " + obj + " . " + pron + " buys " +
               num(b) + " more . how many " + obj + " now ?";
      r.equation = "x=n_1+n_2";
      r.answers = {double(a + b)};
      break;
    }
    case 1: {
      int b = rng.uniform_int(3, 40), a = b + rng.uniform_int(1, 40);
      r.text = name + " had " + num(a) + " " + obj + " . " + pron + " gave " +
               num(b) + " away . how many " + obj + " remain ?";
      r.equation = "x=n_1-n_2";
      r.answers = {double(a - b)};
      break;
    }
    case 2: {
      int a = rng.uniform_int(3, 20), b = rng.uniform_int(3, 15);
      r.text = "a box holds " + num(a) + " " + obj + " . how many " + obj +
               " in " + num(b) + " boxes ?";
      r.equation = "x=n_1*n_2";
      r.answers = {double(a * b)};
      break;
    }
    case 3: {
      int b = rng.uniform_int(3, 12), q = rng.uniform_int(3, 15);
      int a = b * q;
      r.text = num(a) + " " + obj + " are shared by " + num(b) +
               " kids . how many does each kid get ?";
      r.equation = "x=n_1/n_2";
      r.answers = {double(q)};
      break;
    }
    case 4: {
      int a = rng.uniform_int(3, 40), b = rng.uniform_int(3, 9),
          c = rng.uniform_int(3, 12);
      r.text = name + " has " + num(a) + " " + obj + " and buys " + num(b) +
               " bags with " + num(c) + " each . how many now ?";
      r.equation = "x=n_1+n_2*n_3";
      r.answers = {double(a + b * c)};
      break;
    }
    case 5: {
      int radius = rng.uniform_int(3, 30);
      r.text = "a circular pond has radius " + num(radius) +
               " meters . what is its circumference ?";
      r.equation = "x=2*3.14*n_1";
      r.answers = {2.0 * 3.14 * radius};
      break;
    }
    default: {
      int d = rng.uniform_int(3, 9);
      r.text = name + " buys " + num(d) + " dozen " + obj +
               " . how many " + obj + " is that ?";
      r.equation = "x=12*n_1";
      r.answers = {double(12 * d)};
      break;
    }
  }
  return r;
}

GenRecord gen_linear(Rng& rng) {
  GenRecord r;
  r.type = ProblemType::Linear1;
  const std::string name = kNames[rng.uniform_int(0, 4)];
  const std::string obj = kObjects[rng.uniform_int(0, 5)];
  const std::string pron = pron_for(name);
  int a = rng.uniform_int(3, 12), x = rng.uniform_int(2, 12),
      b = rng.uniform_int(3, 20);
  int c = a * x + b;
  if (rng.uniform_int(0, 1) == 0) {
    r.text = "a box holds " + num(a) + " " + obj + " . with " + num(b) +
             " extra " + name + " has " + num(c) + " " + obj +
             " . how many boxes ?";
  } else {
    r.text = "each box holds " + num(a) + " " + obj + " . " + num(b) +
             " more make " + num(c) + " in all . how many boxes ?";
  }
  r.equation = "n_1*x+n_2=n_3";
  r.answers = {double(x)};
  return r;
}

GenRecord gen_nonlinear(Rng& rng) {
  GenRecord r;
  r.type = ProblemType::Nonlinear1;
  int root = rng.uniform_int(3, 12);
  switch (rng.uniform_int(0, 3)) {
    case 0: {
      r.text = "a square rug covers " + num(root * root) +
               " square meters . how long is one side ?";
      r.equation = "x^2=n_1";
      r.answers = {double(root)};
      break;
    }
    case 1: {
      int k = rng.uniform_int(3, 6);
      r.text = num(k) + " equal square tiles cover " + num(k * root * root) +
               " square meters . how long is a tile side ?";
      r.equation = "n_1*x^2=n_2";
      r.answers = {double(root)};
      break;
    }
    case 2: {
      int b = rng.uniform_int(3, 30);
      r.text = "a number squared plus " + num(b) + " equals " +
               num(root * root + b) + " . find the number .";
      r.equation = "x^2+n_1=n_2";
      r.answers = {double(root)};
      break;
    }
    default: {
      int side = rng.uniform_int(3, 8);
      r.text = "a cube shaped box holds " + num(side * side * side) +
               " unit blocks . how long is one side ?";
      r.equation = "x^3=n_1";
      r.answers = {double(side)};
      break;
    }
  }
  return r;
}

GenRecord gen_system(Rng& rng) {
  GenRecord r;
  r.type = ProblemType::System;
  switch (rng.uniform_int(0, 3)) {
    case 0: {
      int x = rng.uniform_int(3, 25), y = rng.uniform_int(3, 25);
      r.text = "a farm keeps chickens and rabbits with " + num(x + y) +
               " heads and " + num(2 * x + 4 * y) +
               " legs . how many of each ?";
      r.equation = "x+y=n_1 ; 2*x+4*y=n_2";
      r.answers = {double(x), double(y)};
      break;
    }
    case 1: {
      int x = rng.uniform_int(3, 25), y = rng.uniform_int(3, 25);
      r.text = "a lot has bikes and cars . " + num(x + y) + " vehicles have " +
               num(2 * x + 4 * y) + " wheels . how many of each ?";
      r.equation = "x+y=n_1 ; 2*x+4*y=n_2";
      r.answers = {double(x), double(y)};
      break;
    }
    case 2: {
      int x = rng.uniform_int(3, 20), y = rng.uniform_int(3, 20);
      r.text = "a shop parks bikes and tricycles with " + num(x + y) +
               " seats and " + num(2 * x + 3 * y) +
               " wheels . how many of each ?";
      r.equation = "x+y=n_1 ; 2*x+3*y=n_2";
      r.answers = {double(x), double(y)};
      break;
    }
    default: {
      int y = rng.uniform_int(3, 20), d = rng.uniform_int(1, 15);
      int x = y + d;
      const std::string n1 = kNames[rng.uniform_int(0, 4)];
      std::string n2 = n1;
      while (n2 == n1) n2 = kNames[rng.uniform_int(0, 4)];
      const std::string obj = kObjects[rng.uniform_int(0, 5)];
      r.text = n1 + " and " + n2 + " have " + num(x + y) + " " + obj + " . " +
               n1 + " has " + num(d) + " more than " + n2 +
               " . how many does each have ?";
      r.equation = "x+y=n_1 ; x-y=n_2";
      r.answers = {double(x), double(y)};
      break;
    }
  }
  return r;
}

}  // namespace

std::vector<std::string> generate_synthetic_lines(int n_per_type,
                                                  std::uint64_t seed) {
  if (n_per_type < 1)
    throw std::invalid_argument("generate_synthetic: n_per_type must be >= 1");
  std::vector<std::string> lines;
  struct TypeGen {
    const char* tag;
    GenRecord (*fn)(Rng&);
  };
  const TypeGen gens[] = {{"arith", gen_arith},
                          {"lin1", gen_linear},
                          {"nonlin1", gen_nonlinear},
                          {"system", gen_system}};
  for (const auto& g : gens) {
    Rng rng(mix_seed(seed, std::hash<std::string>{}(g.tag)));
    for (int i = 0; i < n_per_type; ++i) {
      GenRecord rec = g.fn(rng);
      auto tokens = split_ws(rec.text);
      auto mapped = tokenize_and_map(tokens);
      auto tags = rule_pos_tagger(mapped.templated_tokens);
      nlohmann::ordered_json j;
      j["id"] = std::string("syn-") + g.tag + "-" + std::to_string(i);
      j["segmented_text"] = rec.text;
      j["equation"] = rec.equation;
      if (rec.answers.size() == 1) {
        j["ans"] = fmt_g(rec.answers[0]);
      } else {
        std::vector<std::string> strs;
        for (double v : rec.answers) strs.push_back(fmt_g(v));
        j["ans"] = strs;
      }
      j["type"] = g.tag;
      std::string pos;
      for (std::size_t t = 0; t < tags.size(); ++t) {
        if (t) pos += " ";
        pos += tags[t];
      }
      j["pos"] = pos;
      lines.push_back(j.dump());
    }
  }
  return lines;
}

void generate_synthetic(int n_per_type, std::uint64_t seed,
                        const std::string& out_path) {
  std::ofstream out(out_path);
  if (!out)
    throw std::runtime_error("generate_synthetic: cannot open " + out_path);
  for (const auto& line : generate_synthetic_lines(n_per_type, seed))
    out << line << "\n";
}

}  // namespace nss
