#pragma once

#include <memory>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "auditkit/cell.hpp"

namespace auditkit {

// ---------------------------------------------------------------------------
// Formula AST
// ---------------------------------------------------------------------------

enum class BinaryOp { Add, Sub, Mul, Div, Pow, Concat, Eq, Ne, Lt, Le, Gt, Ge };
enum class UnaryOp { Neg, Plus };

std::string_view op_text(BinaryOp op);
bool is_comparison(BinaryOp op);

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct LiteralNode {
  CellValue value;
};
struct RefNode {
  CellRef ref;  // empty sheet = holder's sheet
};
struct RangeNode {
  Range range;
};
struct NameNode {
  std::string name;
};
struct UnaryNode {
  UnaryOp op;
  NodePtr child;
};
struct BinaryNode {
  BinaryOp op;
  NodePtr lhs;
  NodePtr rhs;
};
struct CallNode {
  std::string name;  // upper-cased
  std::vector<NodePtr> args;
};

struct Node {
  std::variant<LiteralNode, RefNode, RangeNode, NameNode, UnaryNode, BinaryNode, CallNode> v;
};

bool operator==(const Node& a, const Node& b);

/// Immutable parsed formula. Copies share the tree.
class FormulaAst {
 public:
  FormulaAst() = default;
  explicit FormulaAst(NodePtr root) : root_(std::move(root)) {}

  const Node& root() const { return *root_; }
  const NodePtr& root_ptr() const { return root_; }
  bool empty() const { return !root_; }

  friend bool operator==(const FormulaAst& a, const FormulaAst& b) {
    if (!a.root_ || !b.root_) return a.root_ == b.root_;
    return *a.root_ == *b.root_;
  }

 private:
  NodePtr root_;
};

// Node construction helpers, used by the parser and by generators.
namespace ast {
NodePtr literal(CellValue v);
NodePtr number(double d);
NodePtr ref(CellRef r);
NodePtr range(Range r);
NodePtr name(std::string n);
NodePtr unary(UnaryOp op, NodePtr child);
NodePtr binary(BinaryOp op, NodePtr lhs, NodePtr rhs);
NodePtr call(std::string fn, std::vector<NodePtr> args);
}  // namespace ast

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Parses formula text beginning with '='. Precedence, loosest first:
/// comparisons, '&', '+ -', '* /', '^', unary sign. Binary operators are
/// left associative.
FormulaAst parse_formula(std::string_view src);

/// Canonical text ("=A1+B1"): no whitespace, upper-case functions and
/// columns, minimal parentheses.
std::string print_formula(const FormulaAst& formula);
std::string print_node(const Node& node);

/// Relative-offset canonical form used to decide whether two formula cells
/// are "the same formula". Relative components become R[dr]/C[dc] offsets
/// from `holder`, absolute components R<n>/C<m>.
std::string normalize_relative(const CellRef& holder, const FormulaAst& formula);

/// Every cell the formula reads, ranges expanded and named ranges resolved.
/// Cells carry no absolute markers; unqualified refs take holder's sheet.
/// Throws UnknownName for an unbound name.
std::set<CellRef> references_of(const FormulaAst& formula, const CellRef& holder,
                                const NamedRanges& names);

/// Calls `fn` for every node in pre-order.
template <typename Fn>
void visit_nodes(const Node& node, Fn&& fn) {
  fn(node);
  if (auto* u = std::get_if<UnaryNode>(&node.v)) {
    visit_nodes(*u->child, fn);
  } else if (auto* b = std::get_if<BinaryNode>(&node.v)) {
    visit_nodes(*b->lhs, fn);
    visit_nodes(*b->rhs, fn);
  } else if (auto* c = std::get_if<CallNode>(&node.v)) {
    for (const auto& a : c->args) visit_nodes(*a, fn);
  }
}

}  // namespace auditkit
