#include "nssolver/symbol.hpp"

#include "nssolver/common.hpp"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <stdexcept>
#include <unordered_set>

namespace nss {

std::string fmt_g(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

const std::vector<std::string>& operator_names() {
  static const std::vector<std::string> names = {"+", "-", "*", "/",
                                                 "^", "=", ";"};
  return names;
}

bool is_operator_name(const std::string& s) {
  const auto& names = operator_names();
  return std::find(names.begin(), names.end(), s) != names.end();
}

int precedence(const std::string& op) {
  if (op == ";") return 1;
  if (op == "=") return 2;
  if (op == "+" || op == "-") return 3;
  if (op == "*" || op == "/") return 4;
  if (op == "^") return 5;
  throw std::invalid_argument("precedence: not an operator: " + op);
}

bool right_associative(const std::string& op) { return op == "^"; }

std::string canonical_number(double v) { return fmt_g(v); }

Symbol Symbol::op(const std::string& name) {
  if (!is_operator_name(name))
    throw std::invalid_argument("Symbol::op: invalid operator: " + name);
  return Symbol{SymbolKind::Operator, name, 0.0};
}

Symbol Symbol::unknown(const std::string& name) {
  if (name != "x" && name != "y")
    throw std::invalid_argument("Symbol::unknown: invalid unknown: " + name);
  return Symbol{SymbolKind::Unknown, name, 0.0};
}

Symbol Symbol::constant(double v) {
  return Symbol{SymbolKind::Constant, canonical_number(v), v};
}

Symbol Symbol::number_template(int k) {
  if (k < 1)
    throw std::invalid_argument("Symbol::number_template: index must be >= 1");
  return Symbol{SymbolKind::NumberTemplate, "n_" + std::to_string(k), 0.0};
}

int Symbol::template_index() const {
  if (kind != SymbolKind::NumberTemplate) return -1;
  return std::atoi(name.c_str() + 2);
}

namespace {

bool parse_plain_decimal(const std::string& s, double& out) {
  if (s.empty()) return false;
  std::size_t i = 0;
  bool digits = false, dot = false;
  for (; i < s.size(); ++i) {
    char c = s[i];
    if (c >= '0' && c <= '9') {
      digits = true;
    } else if (c == '.' && !dot) {
      dot = true;
    } else {
      return false;
    }
  }
  if (!digits) return false;
  out = std::strtod(s.c_str(), nullptr);
  return true;
}

bool parse_unsigned_int(const std::string& s, double& out) {
  if (s.empty()) return false;
  for (char c : s)
    if (c < '0' || c > '9') return false;
  out = std::strtod(s.c_str(), nullptr);
  return true;
}

// "a/b" with integer parts, b != 0
bool parse_fraction(const std::string& s, double& out) {
  auto slash = s.find('/');
  if (slash == std::string::npos || s.find('/', slash + 1) != std::string::npos)
    return false;
  double num, den;
  if (!parse_unsigned_int(s.substr(0, slash), num)) return false;
  if (!parse_unsigned_int(s.substr(slash + 1), den)) return false;
  if (den == 0.0) return false;
  out = num / den;
  return true;
}

}  // namespace

std::optional<double> parse_numeric_token(const std::string& tok) {
  if (tok.empty()) return std::nullopt;
  double v;
  if (parse_plain_decimal(tok, v)) return v;
  if (tok.back() == '%') {
    if (parse_plain_decimal(tok.substr(0, tok.size() - 1), v)) return v / 100.0;
    return std::nullopt;
  }
  if (parse_fraction(tok, v)) return v;
  // "(a/b)" and mixed numbers "c(a/b)"
  auto open = tok.find('(');
  if (open != std::string::npos && tok.back() == ')') {
    double whole = 0.0;
    if (open > 0 && !parse_unsigned_int(tok.substr(0, open), whole))
      return std::nullopt;
    double frac;
    if (!parse_fraction(tok.substr(open + 1, tok.size() - open - 2), frac))
      return std::nullopt;
    return whole + frac;
  }
  return std::nullopt;
}

bool looks_numeric(const std::string& tok) {
  return !tok.empty() && tok[0] >= '0' && tok[0] <= '9';
}

SymbolTable::SymbolTable(std::vector<Symbol> unknowns,
                         std::vector<Symbol> constants,
                         std::vector<double> template_values)
    : unknowns_(std::move(unknowns)),
      constants_(std::move(constants)),
      template_values_(std::move(template_values)) {
  for (const auto& name : operator_names()) operators_.push_back(Symbol::op(name));
  for (std::size_t k = 1; k <= template_values_.size(); ++k)
    templates_.push_back(Symbol::number_template(static_cast<int>(k)));

  all_.reserve(operators_.size() + unknowns_.size() + constants_.size() +
               templates_.size());
  for (const auto& s : operators_) all_.push_back(s);
  for (const auto& s : unknowns_) all_.push_back(s);
  for (const auto& s : constants_) all_.push_back(s);
  for (const auto& s : templates_) all_.push_back(s);

  std::unordered_set<std::string> names;
  for (const auto& s : all_)
    if (!names.insert(s.name).second)
      throw std::invalid_argument("SymbolTable: duplicate symbol name: " +
                                  s.name);
}

int SymbolTable::index_of(const Symbol& s) const {
  for (std::size_t i = 0; i < all_.size(); ++i)
    if (all_[i] == s) return static_cast<int>(i);
  return -1;
}

}  // namespace nss
