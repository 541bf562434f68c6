#pragma once

#include "nssolver/equation_tree.hpp"
#include "nssolver/symbol.hpp"

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace nss {

enum class ProblemType { Arithmetic, Linear1, Nonlinear1, System };

std::string problem_type_name(ProblemType t);               // arith/lin1/...
std::optional<ProblemType> problem_type_from_name(const std::string& s);

// Solution labels: named unknown bindings for equation problems, or a single
// scalar for arithmetic ones.
struct GoldAnswer {
  std::vector<std::string> unknowns;  // empty for scalar answers
  std::vector<double> values;         // aligned to unknowns, or the scalar

  bool is_scalar() const { return unknowns.empty(); }
};

struct MappingError : std::runtime_error {
  MappingError(const std::string& what, int idx)
      : std::runtime_error(what), token_index(idx) {}
  int token_index;
};

struct MappedTokens {
  std::vector<std::string> templated_tokens;
  std::vector<double> number_values;
  std::vector<int> number_positions;  // strictly increasing, 0-based
};

// Replaces the i-th numeric token (decimal, fraction, or percent form) with
// n_{i+1} and records its normalized value and position. Tokens that begin
// with a digit but do not parse as numerals raise MappingError.
MappedTokens tokenize_and_map(const std::vector<std::string>& tokens);

// A preprocessed problem ready for training and evaluation.
struct ProblemInstance {
  std::string id;
  std::vector<std::string> tokens;
  std::vector<std::string> templated_tokens;
  std::vector<double> number_values;
  std::vector<int> number_positions;
  std::optional<std::vector<std::string>> pos_tags;  // aligned to tokens
  bool pos_provided = false;  // tags came with the record, not the tagger
  std::string gold_equation_text;
  EquationTree gold_tree;
  GoldAnswer gold_answers;
  ProblemType type = ProblemType::Arithmetic;

  // distinct constants appearing in the gold tree, left-to-right
  std::vector<Symbol> gold_constants() const;
  // distinct template indices used in the gold tree (1-based, ascending)
  std::vector<int> gold_template_indices() const;
};

// Table with the fixed operators, unknowns {x, y}, the given constants
// (deduplicated, order kept), and this problem's templates.
SymbolTable build_symbol_table(const ProblemInstance& problem,
                               const std::vector<Symbol>& constants);

}  // namespace nss
