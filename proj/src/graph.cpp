#include "auditkit/graph.hpp"

#include <algorithm>
#include <deque>
#include <sstream>

#include "auditkit/error.hpp"

namespace auditkit {

std::optional<std::size_t> DependencyGraph::index_of(std::size_t sheet, int row, int col) const {
  auto it = index_.find(key(sheet, row, col));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::optional<std::size_t> DependencyGraph::index_of(const CellRef& ref) const {
  if (!wb_) return std::nullopt;
  auto sheet = wb_->sheet_index(ref.sheet);
  if (!sheet) return std::nullopt;
  return index_of(*sheet, ref.row, ref.col);
}

std::size_t DependencyGraph::edge_count() const {
  std::size_t n = 0;
  for (const auto& d : dependents_) n += d.size();
  return n;
}

bool DependencyGraph::has_self_loop(std::size_t i) const {
  return std::binary_search(dependents_[i].begin(), dependents_[i].end(), i);
}

std::string DependencyGraph::to_dot() const {
  std::ostringstream out;
  out << "digraph workbook {\n";
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    std::string label = to_a1(nodes_[i]);
    std::string escaped;
    for (char c : label) {
      if (c == '"' || c == '\\') escaped += '\\';
      escaped += c;
    }
    out << "  n" << i << " [label=\"" << escaped << "\"" << (formulas_[i].empty() ? ", shape=box" : "")
        << "];\n";
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    for (std::size_t d : dependents_[i]) out << "  n" << i << " -> n" << d << ";\n";
  }
  out << "}\n";
  return out.str();
}

namespace {

struct RawKey {
  std::size_t sheet;
  int row;
  int col;
  auto operator<=>(const RawKey&) const = default;
};

// Tarjan's algorithm without recursion. Components come out sinks first.
std::vector<std::vector<std::size_t>> tarjan(const std::vector<std::vector<std::size_t>>& adj) {
  const std::size_t n = adj.size();
  constexpr std::size_t kUnvisited = static_cast<std::size_t>(-1);
  std::vector<std::size_t> index(n, kUnvisited), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  std::vector<std::vector<std::size_t>> out;
  std::size_t counter = 0;

  struct Frame {
    std::size_t v;
    std::size_t next;
  };
  std::vector<Frame> call;

  for (std::size_t root = 0; root < n; ++root) {
    if (index[root] != kUnvisited) continue;
    call.push_back({root, 0});
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = true;
    while (!call.empty()) {
      Frame& f = call.back();
      if (f.next < adj[f.v].size()) {
        std::size_t w = adj[f.v][f.next++];
        if (index[w] == kUnvisited) {
          index[w] = low[w] = counter++;
          stack.push_back(w);
          on_stack[w] = true;
          call.push_back({w, 0});
        } else if (on_stack[w]) {
          low[f.v] = std::min(low[f.v], index[w]);
        }
        continue;
      }
      std::size_t v = f.v;
      call.pop_back();
      if (!call.empty()) low[call.back().v] = std::min(low[call.back().v], low[v]);
      if (low[v] == index[v]) {
        std::vector<std::size_t> comp;
        std::size_t w;
        do {
          w = stack.back();
          stack.pop_back();
          on_stack[w] = false;
          comp.push_back(w);
        } while (w != v);
        std::sort(comp.begin(), comp.end());
        out.push_back(std::move(comp));
      }
    }
  }
  return out;
}

}  // namespace

DependencyGraph build_graph(const Workbook& wb) {
  DependencyGraph g;
  g.wb_ = &wb;

  struct Parsed {
    RawKey key;
    FormulaAst ast;
    std::vector<RawKey> reads;
  };
  std::vector<Parsed> parsed;
  std::vector<RawKey> all;

  auto sheet_of = [&wb](const std::string& name) { return wb.sheet_index(name); };

  for (std::size_t si = 0; si < wb.sheets().size(); ++si) {
    const Sheet& sheet = wb.sheets()[si];
    for (const auto& [pos, cell] : sheet.cells()) {
      if (!cell.is_formula()) continue;
      Parsed p{RawKey{si, pos.first, pos.second}, {}, {}};
      try {
        p.ast = parse_formula(cell.formula());
      } catch (const SyntaxError& e) {
        throw SyntaxError(e.position(), e.expected() + " in " + to_a1(cell.ref));
      }
      auto add_range = [&](const Range& r, std::size_t s) {
        Range n = r.normalized();
        for (int row = n.start.row; row <= n.end.row; ++row) {
          for (int col = n.start.col; col <= n.end.col; ++col) p.reads.push_back({s, row, col});
        }
      };
      visit_nodes(p.ast.root(), [&](const Node& n) {
        if (auto* r = std::get_if<RefNode>(&n.v)) {
          auto s = r->ref.sheet.empty() ? std::optional<std::size_t>(si) : sheet_of(r->ref.sheet);
          if (s) p.reads.push_back({*s, r->ref.row, r->ref.col});
        } else if (auto* rg = std::get_if<RangeNode>(&n.v)) {
          auto s = rg->range.start.sheet.empty() ? std::optional<std::size_t>(si)
                                                 : sheet_of(rg->range.start.sheet);
          if (s) add_range(rg->range, *s);
        } else if (auto* nm = std::get_if<NameNode>(&n.v)) {
          auto it = wb.names().find(nm->name);
          if (it != wb.names().end()) {
            if (auto s = sheet_of(it->second.start.sheet)) add_range(it->second, *s);
          }
        }
      });
      all.push_back(p.key);
      all.insert(all.end(), p.reads.begin(), p.reads.end());
      parsed.push_back(std::move(p));
    }
  }

  std::sort(all.begin(), all.end());
  all.erase(std::unique(all.begin(), all.end()), all.end());

  const std::size_t n = all.size();
  g.nodes_.reserve(n);
  g.sheet_index_.reserve(n);
  g.index_.reserve(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    const RawKey& k = all[i];
    g.nodes_.push_back(CellRef{wb.sheets()[k.sheet].name(), k.col, k.row, false, false});
    g.sheet_index_.push_back(k.sheet);
    g.index_.emplace(DependencyGraph::key(k.sheet, k.row, k.col), i);
  }
  g.formulas_.resize(n);
  g.dependents_.resize(n);
  g.precedents_.resize(n);

  for (auto& p : parsed) {
    std::size_t v = g.index_.at(DependencyGraph::key(p.key.sheet, p.key.row, p.key.col));
    for (const RawKey& r : p.reads) {
      std::size_t u = g.index_.at(DependencyGraph::key(r.sheet, r.row, r.col));
      g.dependents_[u].push_back(v);
      g.precedents_[v].push_back(u);
    }
    g.formulas_[v] = std::move(p.ast);
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (auto* list : {&g.dependents_[i], &g.precedents_[i]}) {
      std::sort(list->begin(), list->end());
      list->erase(std::unique(list->begin(), list->end()), list->end());
    }
  }

  auto comps = tarjan(g.dependents_);
  std::reverse(comps.begin(), comps.end());
  g.scc_index_.assign(n, 0);
  g.sccs_.reserve(comps.size());
  for (std::size_t c = 0; c < comps.size(); ++c) {
    Scc scc;
    scc.nodes = std::move(comps[c]);
    for (std::size_t v : scc.nodes) g.scc_index_[v] = c;
    scc.cyclic = scc.nodes.size() > 1 || g.has_self_loop(scc.nodes.front());
    g.sccs_.push_back(std::move(scc));
  }
  return g;
}

std::set<CellRef> transitive_dependents(const DependencyGraph& g, const std::set<CellRef>& seeds) {
  std::vector<bool> seen(g.size(), false);
  std::vector<bool> is_seed(g.size(), false);
  std::deque<std::size_t> queue;
  for (const auto& s : seeds) {
    if (auto i = g.index_of(s)) {
      is_seed[*i] = true;
      if (!seen[*i]) {
        seen[*i] = true;
        queue.push_back(*i);
      }
    }
  }
  std::set<CellRef> out;
  while (!queue.empty()) {
    std::size_t v = queue.front();
    queue.pop_front();
    for (std::size_t d : g.dependents(v)) {
      if (!is_seed[d]) out.insert(g.node(d));
      if (!seen[d]) {
        seen[d] = true;
        queue.push_back(d);
      }
    }
  }
  return out;
}

std::vector<Scc> topo_order(const DependencyGraph& g) { return g.sccs_; }

}  // namespace auditkit
