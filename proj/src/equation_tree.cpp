#include "nssolver/equation_tree.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>

namespace nss {

EquationTree EquationTree::leaf(const Symbol& s) {
  if (s.is_operator())
    throw std::invalid_argument("EquationTree::leaf: operator cannot be a leaf");
  return EquationTree(std::make_shared<Node>(Node{s, nullptr, nullptr}));
}

EquationTree EquationTree::internal(const Symbol& op, EquationTree left,
                                    EquationTree right) {
  if (!op.is_operator())
    throw std::invalid_argument("EquationTree::internal: symbol is not an operator");
  if (left.empty() || right.empty())
    throw std::invalid_argument("EquationTree::internal: missing child");
  return EquationTree(std::make_shared<Node>(
      Node{op, left.root_ptr(), right.root_ptr()}));
}

namespace {

bool nodes_equal(const EquationTree::Node* a, const EquationTree::Node* b) {
  if (a == b) return true;
  if (!a || !b) return false;
  if (!(a->symbol == b->symbol)) return false;
  return nodes_equal(a->left.get(), b->left.get()) &&
         nodes_equal(a->right.get(), b->right.get());
}

int node_count(const EquationTree::Node& n) {
  if (n.is_leaf()) return 1;
  return 1 + node_count(*n.left) + node_count(*n.right);
}

void prefix_walk(const EquationTree::Node& n, std::vector<Symbol>& out) {
  out.push_back(n.symbol);
  if (!n.is_leaf()) {
    prefix_walk(*n.left, out);
    prefix_walk(*n.right, out);
  }
}

EquationTree::NodePtr parse_prefix_rec(const std::vector<Symbol>& symbols,
                                       std::size_t& pos) {
  if (pos >= symbols.size())
    throw PrefixArityError("parse_prefix: truncated sequence", pos);
  const Symbol& s = symbols[pos++];
  if (!s.is_operator())
    return std::make_shared<EquationTree::Node>(
        EquationTree::Node{s, nullptr, nullptr});
  auto left = parse_prefix_rec(symbols, pos);
  auto right = parse_prefix_rec(symbols, pos);
  return std::make_shared<EquationTree::Node>(
      EquationTree::Node{s, std::move(left), std::move(right)});
}

}  // namespace

bool EquationTree::operator==(const EquationTree& o) const {
  return nodes_equal(root_.get(), o.root_.get());
}

int compute_tree_size(const EquationTree& tree) {
  if (tree.empty()) return 0;
  return node_count(tree.root());
}

std::vector<Symbol> to_prefix(const EquationTree& tree) {
  std::vector<Symbol> out;
  if (!tree.empty()) prefix_walk(tree.root(), out);
  return out;
}

EquationTree parse_prefix(const std::vector<Symbol>& symbols) {
  if (symbols.empty())
    throw PrefixArityError("parse_prefix: empty sequence", 0);
  std::size_t pos = 0;
  auto root = parse_prefix_rec(symbols, pos);
  if (pos != symbols.size())
    throw PrefixArityError("parse_prefix: trailing symbols", pos);
  return EquationTree(std::move(root));
}

EquationTree parse_prefix(const std::vector<Symbol>& symbols,
                          const SymbolTable& table) {
  for (std::size_t i = 0; i < symbols.size(); ++i)
    if (table.index_of(symbols[i]) < 0)
      throw PrefixArityError("parse_prefix: symbol not in table: " +
                                 symbols[i].name,
                             i);
  return parse_prefix(symbols);
}

namespace {

std::string render_expr(const EquationTree::Node& n) {
  if (n.is_leaf()) return n.symbol.name;
  return "(" + render_expr(*n.left) + " " + n.symbol.name + " " +
         render_expr(*n.right) + ")";
}

std::string render_segment(const EquationTree::Node& n) {
  if (!n.is_leaf() && n.symbol.name == "=")
    return render_expr(*n.left) + " = " + render_expr(*n.right);
  return render_expr(n);
}

std::string render(const EquationTree::Node& n) {
  if (!n.is_leaf() && n.symbol.name == ";")
    return render(*n.left) + " ; " + render(*n.right);
  return render_segment(n);
}

// ---- infix lexing ----

struct Token {
  enum Kind { Number, Ident, Op, LParen, RParen, End } kind;
  std::string text;
  double value = 0.0;
};

std::vector<Token> lex_infix(const std::string& text) {
  std::vector<Token> out;
  std::size_t i = 0;
  auto fail = [&](const std::string& msg) {
    throw ParseError("parse_infix: " + msg + " at offset " + std::to_string(i));
  };
  while (i < text.size()) {
    char c = text[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      ++i;
      continue;
    }
    if (c >= '0' && c <= '9') {
      std::size_t j = i;
      bool dot = false;
      while (j < text.size() &&
             ((text[j] >= '0' && text[j] <= '9') || (text[j] == '.' && !dot))) {
        if (text[j] == '.') dot = true;
        ++j;
      }
      std::string lit = text.substr(i, j - i);
      double v = std::strtod(lit.c_str(), nullptr);
      if (j < text.size() && text[j] == '%') {
        v /= 100.0;
        ++j;
      }
      out.push_back({Token::Number, text.substr(i, j - i), v});
      i = j;
      continue;
    }
    if (std::isalpha(static_cast<unsigned char>(c))) {
      std::size_t j = i;
      while (j < text.size() &&
             (std::isalnum(static_cast<unsigned char>(text[j])) ||
              text[j] == '_'))
        ++j;
      out.push_back({Token::Ident, text.substr(i, j - i), 0.0});
      i = j;
      continue;
    }
    if (c == '(') {
      out.push_back({Token::LParen, "(", 0.0});
      ++i;
      continue;
    }
    if (c == ')') {
      out.push_back({Token::RParen, ")", 0.0});
      ++i;
      continue;
    }
    std::string op(1, c);
    if (is_operator_name(op)) {
      out.push_back({Token::Op, op, 0.0});
      ++i;
      continue;
    }
    fail(std::string("unknown character '") + c + "'");
  }
  out.push_back({Token::End, "", 0.0});
  return out;
}

class InfixParser {
 public:
  InfixParser(std::vector<Token> toks, const SymbolTable& table,
              bool substitute)
      : toks_(std::move(toks)), table_(table), substitute_(substitute) {}

  EquationTree parse() {
    EquationTree result = parse_equation();
    while (peek().kind == Token::Op && peek().text == ";") {
      next();
      EquationTree rhs = parse_equation();
      result = EquationTree::internal(Symbol::op(";"), result, rhs);
    }
    expect_end();
    return result;
  }

 private:
  const Token& peek() const { return toks_[pos_]; }
  const Token& next() { return toks_[pos_++]; }

  [[noreturn]] void fail(const std::string& msg) const {
    throw ParseError("parse_infix: " + msg);
  }

  void expect_end() {
    if (peek().kind != Token::End) fail("unexpected token '" + peek().text + "'");
  }

  EquationTree parse_equation() {
    EquationTree lhs = parse_sum();
    if (!(peek().kind == Token::Op && peek().text == "="))
      fail("each ';' segment needs exactly one '='");
    next();
    EquationTree rhs = parse_sum();
    if (peek().kind == Token::Op && peek().text == "=")
      fail("each ';' segment needs exactly one '='");
    return EquationTree::internal(Symbol::op("="), lhs, rhs);
  }

  EquationTree parse_sum() {
    EquationTree lhs = parse_term();
    while (peek().kind == Token::Op &&
           (peek().text == "+" || peek().text == "-")) {
      std::string op = next().text;
      lhs = EquationTree::internal(Symbol::op(op), lhs, parse_term());
    }
    return lhs;
  }

  EquationTree parse_term() {
    EquationTree lhs = parse_power();
    while (peek().kind == Token::Op &&
           (peek().text == "*" || peek().text == "/")) {
      std::string op = next().text;
      lhs = EquationTree::internal(Symbol::op(op), lhs, parse_power());
    }
    return lhs;
  }

  EquationTree parse_power() {
    EquationTree base = parse_unary();
    if (peek().kind == Token::Op && peek().text == "^") {
      next();
      // right associative
      return EquationTree::internal(Symbol::op("^"), base, parse_power());
    }
    return base;
  }

  EquationTree parse_unary() {
    if (peek().kind == Token::Op && peek().text == "-") {
      next();
      return EquationTree::internal(Symbol::op("-"),
                                    EquationTree::leaf(Symbol::constant(0.0)),
                                    parse_unary());
    }
    if (peek().kind == Token::Op && peek().text == "+") {
      next();
      return parse_unary();
    }
    return parse_primary();
  }

  EquationTree parse_primary() {
    const Token& t = peek();
    if (t.kind == Token::LParen) {
      next();
      EquationTree inner = parse_sum();
      if (peek().kind != Token::RParen) fail("unbalanced parentheses");
      next();
      return inner;
    }
    if (t.kind == Token::Number) {
      next();
      return EquationTree::leaf(number_symbol(t.value));
    }
    if (t.kind == Token::Ident) {
      next();
      if (t.text == "x" || t.text == "y")
        return EquationTree::leaf(Symbol::unknown(t.text));
      if (t.text.size() > 2 && t.text.compare(0, 2, "n_") == 0) {
        int k = std::atoi(t.text.c_str() + 2);
        if (k < 1 || k > static_cast<int>(table_.templates().size()))
          fail("unknown token '" + t.text + "'");
        return EquationTree::leaf(Symbol::number_template(k));
      }
      fail("unknown token '" + t.text + "'");
    }
    if (t.kind == Token::RParen) fail("unbalanced parentheses");
    fail("unexpected token '" + t.text + "'");
  }

  Symbol number_symbol(double v) const {
    if (substitute_) {
      const auto& tv = table_.template_values();
      for (std::size_t i = 0; i < tv.size(); ++i)
        if (std::abs(v - tv[i]) <= 1e-9 * std::max(1.0, std::abs(tv[i])))
          return Symbol::number_template(static_cast<int>(i) + 1);
    }
    return Symbol::constant(v);
  }

  std::vector<Token> toks_;
  const SymbolTable& table_;
  bool substitute_;
  std::size_t pos_ = 0;
};

void check_no_eq(const EquationTree::Node& n) {
  if (n.is_leaf()) return;
  if (n.symbol.name == "=" || n.symbol.name == ";")
    throw ParseError("validate_tree: '" + n.symbol.name +
                     "' below a segment root");
  check_no_eq(*n.left);
  check_no_eq(*n.right);
}

void validate_segment(const EquationTree::Node& n) {
  if (!n.is_leaf() && n.symbol.name == "=") {
    check_no_eq(*n.left);
    check_no_eq(*n.right);
  } else {
    check_no_eq(n);
  }
}

void validate_spine(const EquationTree::Node& n) {
  if (!n.is_leaf() && n.symbol.name == ";") {
    validate_spine(*n.left);
    validate_spine(*n.right);
  } else {
    validate_segment(n);
  }
}

void collect_segments(const EquationTree::Node& n,
                      std::vector<EquationTree::NodePtr>& out,
                      const EquationTree::NodePtr& self) {
  if (!n.is_leaf() && n.symbol.name == ";") {
    collect_segments(*n.left, out, n.left);
    collect_segments(*n.right, out, n.right);
  } else {
    out.push_back(self);
  }
}

}  // namespace

std::string to_infix(const EquationTree& tree) {
  if (tree.empty()) return "";
  return render(tree.root());
}

EquationTree parse_infix(const std::string& text, const SymbolTable& table,
                         bool substitute_templates) {
  InfixParser parser(lex_infix(text), table, substitute_templates);
  return parser.parse();
}

std::vector<EquationTree> split_ensemble(const EquationTree& tree) {
  std::vector<EquationTree::NodePtr> segs;
  if (!tree.empty()) collect_segments(tree.root(), segs, tree.root_ptr());
  std::vector<EquationTree> out;
  out.reserve(segs.size());
  for (auto& s : segs) out.emplace_back(std::move(s));
  return out;
}

void validate_tree(const EquationTree& tree) {
  if (tree.empty()) throw ParseError("validate_tree: empty tree");
  validate_spine(tree.root());
}

}  // namespace nss
