#include "auditkit/detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <regex>

#include "auditkit/error.hpp"
#include "auditkit/formula.hpp"
#include "auditkit/graph.hpp"

namespace auditkit {

namespace {

template <typename Pred>
std::size_t unique_where(const Workbook& wb, Pred keep_sheet) {
  std::set<std::string> seen;
  for (const Sheet& sh : wb.sheets()) {
    if (!keep_sheet(sh)) continue;
    for (const auto& [pos, cell] : sh.cells()) {
      if (cell.is_formula()) seen.insert(normalize_relative(cell.ref, parse_formula(cell.formula())));
    }
  }
  return seen.size();
}

bool is_logical_call(const Node& n) {
  auto* c = std::get_if<CallNode>(&n.v);
  return c && (c->name == "AND" || c->name == "OR" || c->name == "NOT");
}

bool boolean_shape(const Node& n) {
  if (auto* b = std::get_if<BinaryNode>(&n.v)) return is_comparison(b->op);
  if (auto* l = std::get_if<LiteralNode>(&n.v)) return is_bool(l->value);
  return is_logical_call(n);
}

bool is_reference(const Node& n) {
  return std::holds_alternative<RefNode>(n.v) || std::holds_alternative<RangeNode>(n.v) ||
         std::holds_alternative<NameNode>(n.v);
}

const std::regex& footing_pattern() {
  static const std::regex re(R"(total\s+assets|total\s+(equity\s+and\s+)?liabilit)", std::regex::icase);
  return re;
}

}  // namespace

std::size_t count_unique_formulae(const Workbook& wb) {
  return unique_where(wb, [](const Sheet&) { return true; });
}

std::size_t count_unique_formulae(const Workbook& wb, std::string_view sheet) {
  return unique_where(wb, [&](const Sheet& sh) { return iequals(sh.name(), sheet); });
}

bool is_check_sheet(std::string_view name, const DetectOptions& options) {
  return std::any_of(options.check_sheets.begin(), options.check_sheets.end(),
                     [&](const std::string& s) { return iequals(s, name); });
}

std::vector<TestRecord> detect_tests(const Workbook& wb, const EvalResult& eval, const DetectOptions& options) {
  DependencyGraph g = build_graph(wb);
  const std::size_t n = g.size();

  std::vector<bool> candidate(n, false), aggregator(n, false), on_check(n, false);
  for (std::size_t v = 0; v < n; ++v) {
    on_check[v] = is_check_sheet(g.node(v).sheet, options);
    const FormulaAst* f = g.formula(v);
    if (!f) continue;
    candidate[v] = is_bool(eval.value(g.node(v))) || boolean_shape(f->root());
  }
  auto boolean_input = [&](std::size_t p) {
    if (g.formula(p)) return static_cast<bool>(candidate[p]);
    const Cell* c = wb.cell(g.node(p));
    return !c || is_bool(c->literal());
  };
  for (std::size_t v = 0; v < n; ++v) {
    if (!candidate[v] || !is_logical_call(g.formula(v)->root())) continue;
    const auto& call = std::get<CallNode>(g.formula(v)->root().v);
    bool refs_only = !call.args.empty() && std::all_of(call.args.begin(), call.args.end(),
                                                       [](const NodePtr& a) { return is_reference(*a); });
    aggregator[v] = refs_only && !g.precedents(v).empty() &&
                    std::all_of(g.precedents(v).begin(), g.precedents(v).end(), boolean_input);
  }

  // Footings: numeric formula cells on rows labelled as balance sheet totals.
  std::set<CellRef> footings;
  for (const Sheet& sh : wb.sheets()) {
    for (const auto& [pos, cell] : sh.cells()) {
      if (!cell.is_formula() || !std::holds_alternative<double>(eval.value(cell.ref))) continue;
      auto label = sh.label_for(pos.first, pos.second);
      if (label && std::regex_search(*label, footing_pattern())) footings.insert(cell.ref);
    }
  }
  std::vector<bool> below_footing(n, false);
  for (const CellRef& r : transitive_dependents(g, footings)) {
    if (auto i = g.index_of(r)) below_footing[*i] = true;
  }

  // Aggregators qualify directly or by feeding a qualifying aggregator.
  std::vector<bool> live_aggregator(n, false);
  const auto sccs = topo_order(g);
  for (auto it = sccs.rbegin(); it != sccs.rend(); ++it) {
    for (std::size_t v : it->nodes) {
      if (!aggregator[v]) continue;
      if (on_check[v] || below_footing[v]) live_aggregator[v] = true;
      if (!live_aggregator[v]) continue;
      for (std::size_t p : g.precedents(v)) {
        if (aggregator[p]) live_aggregator[p] = true;
      }
    }
  }

  std::vector<TestRecord> out;
  for (std::size_t v = 0; v < n; ++v) {
    if (!candidate[v] || aggregator[v]) continue;
    bool feeds = std::any_of(g.dependents(v).begin(), g.dependents(v).end(),
                             [&](std::size_t d) { return live_aggregator[d]; });
    if (!on_check[v] && !below_footing[v] && !feeds) continue;

    TestRecord rec;
    rec.root = g.node(v);
    rec.dedicated = on_check[v];
    const Sheet* sh = wb.sheet(rec.root.sheet);
    rec.label = sh->label_for(rec.root.row, rec.root.col).value_or("");
    if (rec.dedicated) {
      std::vector<std::size_t> stack{v};
      std::vector<bool> seen(n, false);
      seen[v] = true;
      while (!stack.empty()) {
        std::size_t u = stack.back();
        stack.pop_back();
        for (std::size_t p : g.precedents(u)) {
          if (seen[p]) continue;
          seen[p] = true;
          if (!g.formula(p) || candidate[p] || g.sheet_of(p) != g.sheet_of(v)) continue;
          rec.support.insert(g.node(p));
          stack.push_back(p);
        }
      }
      std::set<std::string> forms{normalize_relative(rec.root, *g.formula(v))};
      for (const CellRef& s : rec.support) forms.insert(normalize_relative(s, *g.formula(*g.index_of(s))));
      rec.attributed_formula_count = static_cast<double>(forms.size());
    } else {
      rec.attributed_formula_count = options.scattered_multiplier;
    }
    rec.category = classify_test(rec, wb);
    rec.kind = kind_for(rec.category);
    out.push_back(std::move(rec));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Classification
// ---------------------------------------------------------------------------

namespace {

struct Subject {
  CellRef holder;
  FormulaAst ast;
};

bool search(const std::string& text, const char* pattern) {
  return std::regex_search(text, std::regex(pattern, std::regex::icase));
}

bool any_search(const std::vector<std::string>& texts, const char* pattern) {
  std::regex re(pattern, std::regex::icase);
  return std::any_of(texts.begin(), texts.end(), [&](const std::string& t) { return std::regex_search(t, re); });
}

std::string sheet_or(const CellRef& r, const CellRef& holder) { return r.sheet.empty() ? holder.sheet : r.sheet; }

bool is_zero(const Node& n) {
  auto* l = std::get_if<LiteralNode>(&n.v);
  return l && is_number(l->value) && std::get<double>(l->value) == 0.0;
}

// ref - SUM(refs) with every reference on one sheet, or a comparison of a
// SUM against a reference on the same sheet.
bool addition_shape(const Subject& s) {
  const Node& root = s.ast.root();
  auto same_sheet_sum = [&](const Node& ref_side, const Node& sum_side) {
    auto* r = std::get_if<RefNode>(&ref_side.v);
    auto* c = std::get_if<CallNode>(&sum_side.v);
    if (!r || !c || c->name != "SUM" || c->args.empty()) return false;
    std::string sheet = to_lower(sheet_or(r->ref, s.holder));
    for (const auto& a : c->args) {
      if (auto* ar = std::get_if<RefNode>(&a->v)) {
        if (to_lower(sheet_or(ar->ref, s.holder)) != sheet) return false;
      } else if (auto* rg = std::get_if<RangeNode>(&a->v)) {
        if (to_lower(sheet_or(rg->range.start, s.holder)) != sheet) return false;
      } else {
        return false;
      }
    }
    return true;
  };
  auto* b = std::get_if<BinaryNode>(&root.v);
  if (!b) return false;
  if (b->op == BinaryOp::Sub) return same_sheet_sum(*b->lhs, *b->rhs);
  if (b->op == BinaryOp::Eq) return same_sheet_sum(*b->lhs, *b->rhs) || same_sheet_sum(*b->rhs, *b->lhs);
  return false;
}

bool final_column(const Workbook& wb, const CellRef& ref, const CellRef& holder) {
  const Sheet* sh = wb.sheet(sheet_or(ref, holder));
  return sh && ref.col == sh->max_column();
}

// A bare final-column reference, or "ref=0" on one.
bool clears_out_shape(const Workbook& wb, const Subject& s) {
  const Node& root = s.ast.root();
  if (auto* r = std::get_if<RefNode>(&root.v)) return !iequals(sheet_or(r->ref, s.holder), s.holder.sheet) &&
                                                      final_column(wb, r->ref, s.holder);
  if (auto* b = std::get_if<BinaryNode>(&root.v); b && b->op == BinaryOp::Eq) {
    for (auto [x, y] : {std::pair{b->lhs.get(), b->rhs.get()}, std::pair{b->rhs.get(), b->lhs.get()}}) {
      auto* r = std::get_if<RefNode>(&x->v);
      if (r && is_zero(*y) && final_column(wb, r->ref, s.holder)) return true;
    }
  }
  return false;
}

// MIN(0,ref) / MAX(0,ref), or an inequality between a reference and 0.
bool sign_shape(const Subject& s) {
  const Node& root = s.ast.root();
  if (auto* c = std::get_if<CallNode>(&root.v); c && (c->name == "MIN" || c->name == "MAX") && c->args.size() == 2) {
    return (is_zero(*c->args[0]) && std::holds_alternative<RefNode>(c->args[1]->v)) ||
           (is_zero(*c->args[1]) && std::holds_alternative<RefNode>(c->args[0]->v));
  }
  if (auto* b = std::get_if<BinaryNode>(&root.v);
      b && is_comparison(b->op) && b->op != BinaryOp::Eq && b->op != BinaryOp::Ne) {
    return (std::holds_alternative<RefNode>(b->lhs->v) && is_zero(*b->rhs)) ||
           (std::holds_alternative<RefNode>(b->rhs->v) && is_zero(*b->lhs));
  }
  return false;
}

bool calls(const Subject& s, std::string_view fn) {
  bool found = false;
  visit_nodes(s.ast.root(), [&](const Node& n) {
    if (auto* c = std::get_if<CallNode>(&n.v); c && c->name == fn) found = true;
  });
  return found;
}

bool references_something(const Node& n) {
  bool found = false;
  visit_nodes(n, [&](const Node& x) { found = found || is_reference(x); });
  return found;
}

// x - y or x = y with references on both sides.
bool identity_shape(const Subject& s) {
  auto* b = std::get_if<BinaryNode>(&s.ast.root().v);
  if (!b || (b->op != BinaryOp::Sub && b->op != BinaryOp::Eq)) return false;
  return references_something(*b->lhs) && references_something(*b->rhs);
}

}  // namespace

int classify_test(const TestRecord& rec, const Workbook& wb) {
  // Collect the formulas behind the test. On a check sheet the ones that
  // reach into the model carry the structure; elsewhere the root does.
  std::vector<Subject> all;
  auto add = [&](const CellRef& ref) {
    const Cell* c = wb.cell(ref);
    if (c && c->is_formula()) all.push_back({c->ref, parse_formula(c->formula())});
  };
  add(rec.root);
  for (const CellRef& s : rec.support) add(s);

  std::vector<Subject> subjects;
  std::vector<std::string> ref_labels;
  std::set<std::string> ref_sheets;
  for (const Subject& s : all) {
    bool external = false;
    for (const CellRef& r : references_of(s.ast, s.holder, wb.names())) {
      if (rec.dedicated && iequals(r.sheet, s.holder.sheet)) continue;
      external = true;
      ref_sheets.insert(to_lower(r.sheet));
      if (const Sheet* sh = wb.sheet(r.sheet)) {
        if (auto l = sh->label_for(r.row, r.col)) ref_labels.push_back(*l);
      }
    }
    if (external || !rec.dedicated) subjects.push_back(s);
  }
  if (subjects.empty() && !all.empty()) subjects.push_back(all.front());

  const std::string& L = rec.label;
  auto any_subject = [&](auto pred) { return std::any_of(subjects.begin(), subjects.end(), pred); };

  // 1 balance
  if (search(L, R"(balance\s+sheet\s+balances|\bbalance\s+check\b)") ||
      (any_search(ref_labels, R"(total\s+assets)") &&
       any_search(ref_labels, R"(total\s+(equity\s+and\s+)?liabilit)"))) {
    return 1;
  }
  // 4 sources and uses
  if ((search(L, R"(\bsources?\b)") && search(L, R"(\buses?\b)")) ||
      (any_search(ref_labels, R"(\bsources?\b)") && any_search(ref_labels, R"(\buses?\b)"))) {
    return 4;
  }
  // 7 cascade
  if (search(L, R"(cascade|waterfall)") ||
      (any_search(ref_labels, R"(residue|cascade|waterfall)") && any_search(ref_labels, R"(net\s+cash)"))) {
    return 7;
  }
  // 2 addition
  if (search(L, R"(subtotal|adds\s+up|\baddition\b)") || any_subject(addition_shape)) return 2;
  // 6 clears out
  if (search(L, R"(clears?\s+out|end\s+of\s+(life|project))") ||
      any_subject([&](const Subject& s) { return clears_out_shape(wb, s); })) {
    return 6;
  }
  // 3 signs
  if (search(L, R"(^\s*signs?\b|over-?repa|over-?depreciat|negative)") || any_subject(sign_shape)) return 3;
  // 10 yield
  if (search(L, R"(\byield\b|\birr\b)") ||
      any_subject([](const Subject& s) { return calls(s, "NPV") || calls(s, "IRR"); })) {
    return 10;
  }
  // 12 converged
  if (search(L, R"(converge|iterat)") || any_search(ref_labels, R"(\bsolved\b)")) return 12;
  // 9 tax inclusion
  if (search(L, R"(\btax\b)")) return 9;
  // 8 ratio inclusion
  if (search(L, R"(inclusion)")) return 8;
  // 11 physical
  if (search(L, R"(physical)") ||
      (any_search(ref_labels, R"(produced)") && any_search(ref_labels, R"(consumed)"))) {
    return 11;
  }
  // 13 inputs
  if (search(L, R"(\binputs?\b|\bdates?\b)") ||
      (!ref_sheets.empty() && std::all_of(ref_sheets.begin(), ref_sheets.end(),
                                          [](const std::string& s) { return s.rfind("input", 0) == 0; }))) {
    return 13;
  }
  // 14 outputs
  if (search(L, R"(covenant|\bdscr\b|\bllcr\b|repaid|threshold|minimum)") ||
      any_search(ref_labels, R"(\bdscr\b|\bllcr\b|cover)")) {
    return 14;
  }
  // 5 identities
  if (search(L, R"(identity|reconcil)") || any_subject(identity_shape)) return 5;
  return 15;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

MetricsReport compute_metrics(const SurveyCounts& counts, const std::map<int, double>& per_category) {
  if (counts.t < 0 || counts.o < 0 || counts.i < 0) throw SchemaError("counts must not be negative");
  if (counts.t == 0) throw EmptyModel("model has no formulas");
  if (counts.o + counts.i > counts.t) throw SchemaError("test formulas exceed total formulas");
  constexpr double kInf = std::numeric_limits<double>::infinity();
  MetricsReport m;
  m.counts = counts;
  m.c = counts.t - counts.o - counts.i;
  m.pct_testing = (counts.o + counts.i) / counts.t;
  m.calcs_per_integrity = counts.o == 0 ? kInf : m.c / counts.o;
  m.calcs_per_test_formula = counts.o + counts.i == 0 ? kInf : m.c / (counts.o + counts.i);
  m.per_category = per_category;
  return m;
}

AnalysisReport analyze_workbook(const Workbook& wb, const DetectOptions& options, const IterationPolicy& policy) {
  AnalysisReport rep;
  EvalResult ev = evaluate(wb, policy);
  rep.converged = ev.converged;
  if (!ev.converged) rep.warnings.push_back("iteration did not converge; some cells hold #CYCLE!");
  rep.formula_cells = wb.formula_count();
  rep.unique_formulae = count_unique_formulae(wb);
  rep.check_sheet_formulae =
      unique_where(wb, [&](const Sheet& sh) { return is_check_sheet(sh.name(), options); });
  rep.tests = detect_tests(wb, ev, options);

  SurveyCounts counts;
  counts.t = static_cast<double>(rep.unique_formulae);
  std::map<int, double> per_category;
  for (const auto& t : rep.tests) {
    (t.kind == CheckKind::Integrity ? counts.o : counts.i) += t.attributed_formula_count;
    per_category[t.category] += 1;
  }
  if (counts.o + counts.i > counts.t && counts.t > 0) {
    double scale = counts.t / (counts.o + counts.i);
    rep.warnings.push_back("attributed test formulas exceed the distinct total; scaled down");
    counts.o *= scale;
    counts.i *= scale;
  }
  if (counts.t == 0) throw EmptyModel("model has no formulas");
  rep.metrics = compute_metrics(counts, per_category);
  return rep;
}

}  // namespace auditkit
