#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "auditkit/cell.hpp"
#include "auditkit/formula.hpp"
#include "auditkit/workbook.hpp"

namespace auditkit {

/// One strongly connected component in evaluation order. `cyclic` is true
/// for multi-cell components and for self-loops.
struct Scc {
  std::vector<std::size_t> nodes;
  bool cyclic = false;
};

/// Precedent -> dependent graph over cells. Nodes are every formula cell plus
/// every cell a formula reads on a known sheet, ordered by sheet order, row,
/// column. Range references contribute one edge per cell.
class DependencyGraph {
 public:
  std::size_t size() const { return nodes_.size(); }
  const std::vector<CellRef>& nodes() const { return nodes_; }
  const CellRef& node(std::size_t i) const { return nodes_[i]; }
  std::optional<std::size_t> index_of(const CellRef& ref) const;
  /// Lookup by resolved sheet index; nullopt when the cell is not a node.
  std::optional<std::size_t> index_of(std::size_t sheet, int row, int col) const;
  std::size_t sheet_of(std::size_t i) const { return sheet_index_[i]; }

  const std::vector<std::size_t>& dependents(std::size_t i) const { return dependents_[i]; }
  const std::vector<std::size_t>& precedents(std::size_t i) const { return precedents_[i]; }
  std::size_t edge_count() const;

  /// Parsed formula for node i; nullptr for literal or undefined cells.
  const FormulaAst* formula(std::size_t i) const {
    return formulas_[i].empty() ? nullptr : &formulas_[i];
  }

  /// Strongly connected component id of node i (ids follow topo_order).
  std::size_t scc_of(std::size_t i) const { return scc_index_[i]; }
  bool has_self_loop(std::size_t i) const;

  /// Graphviz rendering, nodes labelled Sheet!A1.
  std::string to_dot() const;

 private:
  friend DependencyGraph build_graph(const Workbook& wb);
  friend std::vector<Scc> topo_order(const DependencyGraph& g);

  static std::uint64_t key(std::size_t sheet, int row, int col) {
    return (static_cast<std::uint64_t>(sheet) << 52) | (static_cast<std::uint64_t>(row) << 20) |
           static_cast<std::uint64_t>(col);
  }

  const Workbook* wb_ = nullptr;
  std::vector<CellRef> nodes_;
  std::vector<std::size_t> sheet_index_;
  std::vector<FormulaAst> formulas_;
  std::vector<std::vector<std::size_t>> dependents_;
  std::vector<std::vector<std::size_t>> precedents_;
  std::vector<std::size_t> scc_index_;
  std::vector<Scc> sccs_;
  std::unordered_map<std::uint64_t, std::size_t> index_;
};

/// Builds the graph. The workbook must outlive the graph. SyntaxError is
/// rethrown with the cell address in its message; unknown names and
/// references to missing sheets add no edge.
DependencyGraph build_graph(const Workbook& wb);

/// Cells reachable from `seeds` along dependent edges, seeds excluded.
std::set<CellRef> transitive_dependents(const DependencyGraph& g, const std::set<CellRef>& seeds);

/// Condensation in topological order: every SCC precedes the SCCs that
/// depend on it. Deterministic for a given node order.
std::vector<Scc> topo_order(const DependencyGraph& g);

}  // namespace auditkit
