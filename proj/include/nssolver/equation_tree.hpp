#pragma once

#include "nssolver/symbol.hpp"

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace nss {

// Binary prefix tree of symbols. Immutable after construction; subtrees are
// shared, so copies are cheap. Multiple equations are joined by the
// lowest-priority `;` operator, which only appears on the spine from the
// root; each `;`-free segment holding an `=` has it at the segment root.
class EquationTree {
 public:
  struct Node {
    Symbol symbol;
    std::shared_ptr<const Node> left;
    std::shared_ptr<const Node> right;
    bool is_leaf() const { return left == nullptr; }
  };
  using NodePtr = std::shared_ptr<const Node>;

  EquationTree() = default;
  explicit EquationTree(NodePtr root) : root_(std::move(root)) {}

  static EquationTree leaf(const Symbol& s);
  static EquationTree internal(const Symbol& op, EquationTree left,
                               EquationTree right);

  bool empty() const { return root_ == nullptr; }
  const Node& root() const { return *root_; }
  NodePtr root_ptr() const { return root_; }

  bool operator==(const EquationTree& o) const;
  bool operator!=(const EquationTree& o) const { return !(*this == o); }

 private:
  NodePtr root_;
};

struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Prefix parsing failure; index points at the offending symbol position
// (or one past the end for truncated input).
struct PrefixArityError : ParseError {
  PrefixArityError(const std::string& what, std::size_t idx)
      : ParseError(what), index(idx) {}
  std::size_t index;
};

// total node count, `;` nodes included
int compute_tree_size(const EquationTree& tree);

std::vector<Symbol> to_prefix(const EquationTree& tree);

EquationTree parse_prefix(const std::vector<Symbol>& symbols);
// validating overload: every symbol must be present in the table
EquationTree parse_prefix(const std::vector<Symbol>& symbols,
                          const SymbolTable& table);

// Canonical infix rendering: `;` segments joined by " ; ", each side of `=`
// fully parenthesized below the top operator.
std::string to_infix(const EquationTree& tree);

// Parses infix text over the seven operators, parentheses, unknowns,
// decimal/percent literals, and template tokens n_k. When
// substitute_templates is set, literals matching one of the table's template
// values (first match wins) become that template. Every `;` segment must
// contain exactly one `=`.
EquationTree parse_infix(const std::string& text, const SymbolTable& table,
                         bool substitute_templates = false);

// equations of the `;` spine, left to right
std::vector<EquationTree> split_ensemble(const EquationTree& tree);

// Enforces the structural invariants (`;` only on the root spine, one `=`
// at the root of each segment that has one). Throws ParseError.
void validate_tree(const EquationTree& tree);

}  // namespace nss
