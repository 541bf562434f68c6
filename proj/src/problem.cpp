#include "nssolver/problem.hpp"

#include <algorithm>
#include <set>

namespace nss {

std::string problem_type_name(ProblemType t) {
  switch (t) {
    case ProblemType::Arithmetic: return "arith";
    case ProblemType::Linear1: return "lin1";
    case ProblemType::Nonlinear1: return "nonlin1";
    case ProblemType::System: return "system";
  }
  return "arith";
}

std::optional<ProblemType> problem_type_from_name(const std::string& s) {
  if (s == "arith") return ProblemType::Arithmetic;
  if (s == "lin1") return ProblemType::Linear1;
  if (s == "nonlin1") return ProblemType::Nonlinear1;
  if (s == "system") return ProblemType::System;
  return std::nullopt;
}

MappedTokens tokenize_and_map(const std::vector<std::string>& tokens) {
  if (tokens.empty())
    throw std::invalid_argument("tokenize_and_map: empty token list");
  MappedTokens out;
  out.templated_tokens.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const std::string& tok = tokens[i];
    auto value = parse_numeric_token(tok);
    if (value) {
      int k = static_cast<int>(out.number_values.size()) + 1;
      out.templated_tokens.push_back("n_" + std::to_string(k));
      out.number_values.push_back(*value);
      out.number_positions.push_back(static_cast<int>(i));
    } else if (looks_numeric(tok)) {
      throw MappingError("tokenize_and_map: malformed numeric token '" + tok +
                             "' at index " + std::to_string(i),
                         static_cast<int>(i));
    } else {
      out.templated_tokens.push_back(tok);
    }
  }
  return out;
}

namespace {

void collect_leaves(const EquationTree::Node& n,
                    std::vector<const Symbol*>& out) {
  if (n.is_leaf()) {
    out.push_back(&n.symbol);
    return;
  }
  collect_leaves(*n.left, out);
  collect_leaves(*n.right, out);
}

}  // namespace

std::vector<Symbol> ProblemInstance::gold_constants() const {
  std::vector<Symbol> out;
  if (gold_tree.empty()) return out;
  std::vector<const Symbol*> leaves;
  collect_leaves(gold_tree.root(), leaves);
  for (const Symbol* s : leaves) {
    if (s->kind != SymbolKind::Constant) continue;
    if (std::find(out.begin(), out.end(), *s) == out.end()) out.push_back(*s);
  }
  return out;
}

std::vector<int> ProblemInstance::gold_template_indices() const {
  std::set<int> seen;
  if (!gold_tree.empty()) {
    std::vector<const Symbol*> leaves;
    collect_leaves(gold_tree.root(), leaves);
    for (const Symbol* s : leaves) {
      int k = s->template_index();
      if (k > 0) seen.insert(k);
    }
  }
  return std::vector<int>(seen.begin(), seen.end());
}

SymbolTable build_symbol_table(const ProblemInstance& problem,
                               const std::vector<Symbol>& constants) {
  std::vector<Symbol> dedup;
  for (const Symbol& c : constants)
    if (std::find(dedup.begin(), dedup.end(), c) == dedup.end())
      dedup.push_back(c);
  return SymbolTable({Symbol::unknown("x"), Symbol::unknown("y")},
                     std::move(dedup), problem.number_values);
}

}  // namespace nss
