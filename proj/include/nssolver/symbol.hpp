#pragma once

#include <optional>
#include <string>
#include <vector>

namespace nss {

enum class SymbolKind { Operator, Unknown, Constant, NumberTemplate };

// One token of a symbolic program. Operators are the seven fixed ones
// (+ - * / ^ = ;), unknowns are x and y, constants carry their numeric
// value, and number templates n_k refer to the k-th number of a problem.
struct Symbol {
  SymbolKind kind = SymbolKind::Operator;
  std::string name;
  double value = 0.0;  // constants only

  static Symbol op(const std::string& name);
  static Symbol unknown(const std::string& name);
  static Symbol constant(double v);
  static Symbol number_template(int k);  // k >= 1

  bool is_operator() const { return kind == SymbolKind::Operator; }
  // n_k -> k; -1 for non-templates
  int template_index() const;

  bool operator==(const Symbol& o) const {
    return kind == o.kind && name == o.name;
  }
  bool operator!=(const Symbol& o) const { return !(*this == o); }
};

const std::vector<std::string>& operator_names();  // +,-,*,/,^,=,;
bool is_operator_name(const std::string& s);

// ; < = < +,- < *,/ < ^
int precedence(const std::string& op);
bool right_associative(const std::string& op);  // only ^

// canonical decimal rendering: constant names are canonical_number(value)
std::string canonical_number(double v);

// Numeric token forms accepted in problem text and answer strings:
// decimal "3.5", fraction "3/4" (also "(3/4)" and mixed "1(3/4)"),
// percent "12.5%". Returns nullopt for non-numeric tokens.
std::optional<double> parse_numeric_token(const std::string& tok);

// True when the token begins like a numeral and must therefore parse as one.
bool looks_numeric(const std::string& tok);

// Per-problem output vocabulary of the programmer: fixed operators, the
// unknowns, problem-relevant constants, and one template per mapped number.
class SymbolTable {
 public:
  SymbolTable() = default;
  SymbolTable(std::vector<Symbol> unknowns, std::vector<Symbol> constants,
              std::vector<double> template_values);

  const std::vector<Symbol>& operators() const { return operators_; }
  const std::vector<Symbol>& unknowns() const { return unknowns_; }
  const std::vector<Symbol>& constants() const { return constants_; }
  const std::vector<Symbol>& templates() const { return templates_; }
  const std::vector<double>& template_values() const { return template_values_; }

  // concatenated order: operators, unknowns, constants, templates
  const std::vector<Symbol>& all() const { return all_; }
  int size() const { return static_cast<int>(all_.size()); }
  int index_of(const Symbol& s) const;  // -1 when absent
  const Symbol& at(int i) const { return all_[i]; }

 private:
  std::vector<Symbol> operators_;
  std::vector<Symbol> unknowns_;
  std::vector<Symbol> constants_;
  std::vector<Symbol> templates_;
  std::vector<double> template_values_;
  std::vector<Symbol> all_;
};

}  // namespace nss
