#include "auditkit/mutation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include "auditkit/error.hpp"
#include "auditkit/formula.hpp"

namespace auditkit {

namespace {

constexpr std::array<std::pair<MutationKind, std::string_view>, 8> kKinds = {{
    {MutationKind::DropSubtotalTerm, "drop-subtotal-term"},
    {MutationKind::SignFlip, "sign-flip"},
    {MutationKind::OverRepayLoan, "over-repay-loan"},
    {MutationKind::OverDepreciate, "over-depreciate"},
    {MutationKind::StaleReportLink, "stale-report-link"},
    {MutationKind::BreakIdentity, "break-identity"},
    {MutationKind::BreakConvergence, "break-convergence"},
    {MutationKind::FinalBalanceResidue, "final-balance-residue"},
}};

template <typename F>
NodePtr map_refs(const NodePtr& p, F& f) {
  const Node& n = *p;
  if (auto* r = std::get_if<RefNode>(&n.v)) return ast::ref(f(r->ref));
  if (auto* g = std::get_if<RangeNode>(&n.v)) return ast::range(Range{f(g->range.start), f(g->range.end)});
  if (auto* u = std::get_if<UnaryNode>(&n.v)) return ast::unary(u->op, map_refs(u->child, f));
  if (auto* b = std::get_if<BinaryNode>(&n.v)) return ast::binary(b->op, map_refs(b->lhs, f), map_refs(b->rhs, f));
  if (auto* c = std::get_if<CallNode>(&n.v)) {
    std::vector<NodePtr> args;
    for (const auto& a : c->args) args.push_back(map_refs(a, f));
    return ast::call(c->name, std::move(args));
  }
  return p;
}

// New content for one cell, or nullopt when the fault does not apply to it.
std::optional<CellContent> mutate_cell(const Cell& cell, MutationKind kind) {
  if (!cell.is_formula()) {
    const double* d = std::get_if<double>(&cell.literal());
    if (!d) return std::nullopt;
    switch (kind) {
      case MutationKind::OverRepayLoan:
      case MutationKind::OverDepreciate:
        return CellContent{CellValue{*d * 1.5}};
      case MutationKind::StaleReportLink:
        return *d == 0 ? std::nullopt : std::optional<CellContent>(CellValue{0.0});
      case MutationKind::FinalBalanceResidue:
        return CellContent{CellValue{*d + 1}};
      default:
        return std::nullopt;
    }
  }
  FormulaAst f = parse_formula(cell.formula());
  const Node& root = f.root();
  NodePtr out;
  switch (kind) {
    case MutationKind::DropSubtotalTerm: {
      auto* c = std::get_if<CallNode>(&root.v);
      if (!c || c->name != "SUM" || c->args.size() < 2) return std::nullopt;
      out = ast::call("SUM", std::vector<NodePtr>(c->args.begin(), c->args.end() - 1));
      break;
    }
    case MutationKind::SignFlip: {
      auto* b = std::get_if<BinaryNode>(&root.v);
      if (!b || (b->op != BinaryOp::Add && b->op != BinaryOp::Sub)) return std::nullopt;
      out = ast::binary(b->op == BinaryOp::Add ? BinaryOp::Sub : BinaryOp::Add, b->lhs, b->rhs);
      break;
    }
    case MutationKind::OverRepayLoan:
    case MutationKind::OverDepreciate:
      out = ast::binary(BinaryOp::Mul, f.root_ptr(), ast::number(1.5));
      break;
    case MutationKind::StaleReportLink:
      return CellContent{CellValue{0.0}};
    case MutationKind::BreakIdentity: {
      bool moved = false;
      auto up = [&moved](CellRef r) {
        if (r.row > 1) {
          --r.row;
          moved = true;
        }
        return r;
      };
      out = map_refs(f.root_ptr(), up);
      if (!moved) return std::nullopt;
      break;
    }
    case MutationKind::FinalBalanceResidue:
      out = ast::binary(BinaryOp::Add, f.root_ptr(), ast::number(1));
      break;
    case MutationKind::BreakConvergence:
      return std::nullopt;
  }
  return CellContent{Formula{print_formula(FormulaAst(out))}};
}

std::vector<int> target_columns(const ModelSchema& s, const Mutation& m) {
  if (m.column) return {*m.column};
  if (m.kind == MutationKind::FinalBalanceResidue) return {s.last_column()};
  std::vector<int> cols;
  for (int c = s.first_column; c <= s.last_column(); ++c) cols.push_back(c);
  return cols;
}

const Sheet& target_sheet(const Workbook& wb, const Mutation& m) {
  const Sheet* sh = wb.sheet(m.target.sheet);
  if (!sh) throw TargetMissing("mutation " + m.id + ": no sheet '" + m.target.sheet + "'");
  return *sh;
}

std::string row_label(const Workbook& wb, const RowRef& r) {
  if (const Sheet* sh = wb.sheet(r.sheet)) {
    if (auto l = sh->label_for(r.row, 2)) return *l;
  }
  return to_string(r);
}

const Cell* first_formula(const Workbook& wb, const ModelSchema& s, const RowRef& r) {
  const Sheet* sh = wb.sheet(r.sheet);
  if (!sh) return nullptr;
  for (int c = s.first_column; c <= s.last_column(); ++c) {
    const Cell* cell = sh->find(r.row, c);
    if (cell && cell->is_formula()) return cell;
  }
  return nullptr;
}

bool applies(const Workbook& wb, const ModelSchema& s, const RowRef& r, MutationKind kind) {
  const Cell* cell = first_formula(wb, s, r);
  return cell && mutate_cell(*cell, kind).has_value();
}

bool caught(const AuditRun& run) { return !run.integrity_passed(); }

}  // namespace

std::string_view mutation_kind_name(MutationKind kind) {
  for (const auto& [k, name] : kKinds) {
    if (k == kind) return name;
  }
  return "?";
}

MutationKind parse_mutation_kind(std::string_view name) {
  for (const auto& [k, n] : kKinds) {
    if (n == name) return k;
  }
  throw Error("unknown mutation kind '" + std::string(name) + "'");
}

int designed_category(MutationKind kind) {
  switch (kind) {
    case MutationKind::DropSubtotalTerm:
    case MutationKind::SignFlip:
      return 2;
    case MutationKind::OverRepayLoan:
    case MutationKind::OverDepreciate:
      return 3;
    case MutationKind::StaleReportLink:
      return 7;
    case MutationKind::BreakIdentity:
      return 5;
    case MutationKind::BreakConvergence:
      return 12;
    case MutationKind::FinalBalanceResidue:
      return 6;
  }
  return 0;
}

MutatedModel apply_mutation(const Workbook& wb, const ModelSchema& schema, const Mutation& m) {
  const Sheet& src = target_sheet(wb, m);
  MutatedModel out{wb, std::nullopt};
  if (m.kind == MutationKind::BreakConvergence) {
    bool any = false;
    for (int c : target_columns(schema, m)) any = any || src.find(m.target.row, c);
    if (!any) throw TargetMissing("mutation " + m.id + ": nothing at " + to_string(m.target));
    out.policy = IterationPolicy{1, IterationPolicy{}.tolerance};
    return out;
  }
  Sheet& dst = *out.workbook.sheet(m.target.sheet);
  int changed = 0;
  for (int c : target_columns(schema, m)) {
    const Cell* cell = src.find(m.target.row, c);
    if (!cell) continue;
    if (auto content = mutate_cell(*cell, m.kind)) {
      dst.set(m.target.row, c, std::move(*content), cell->label);
      ++changed;
    }
  }
  if (changed == 0) {
    throw TargetMissing("mutation " + m.id + ": " + std::string(mutation_kind_name(m.kind)) + " does not apply to " +
                        to_string(m.target));
  }
  return out;
}

std::vector<Mutation> standard_suite(const Workbook& wb, const ModelSchema& s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<Mutation> suite;
  auto add = [&](MutationKind kind, std::vector<RowRef> candidates) {
    std::erase_if(candidates, [&](const RowRef& r) {
      return kind != MutationKind::BreakConvergence && !applies(wb, s, r, kind);
    });
    if (candidates.empty()) return;
    RowRef target = candidates[rng() % candidates.size()];
    target.sign = 1;
    std::string name(mutation_kind_name(kind));
    suite.push_back({name, kind, target, std::nullopt, name + " on " + row_label(wb, target)});
  };

  std::vector<RowRef> totals;
  for (const auto& t : s.subtotals) totals.push_back(t.total);
  add(MutationKind::DropSubtotalTerm, totals);
  add(MutationKind::SignFlip, totals);

  std::vector<RowRef> repayments;
  for (const auto& l : s.loans) repayments.push_back(l.repayment);
  add(MutationKind::OverRepayLoan, repayments);

  std::vector<RowRef> depreciation, per_period_left;
  for (const auto& id : s.identities) {
    if (id.kind == Reconciliation::LifeTotal) {
      depreciation.insert(depreciation.end(), id.right.begin(), id.right.end());
    } else if (id.left.size() == 1) {
      // Moving a roll-forward's references up can make it read itself.
      const Cell* cell = first_formula(wb, s, id.left[0]);
      if (!cell) continue;
      bool self = false;
      CellRef holder{id.left[0].sheet, cell->ref.col, cell->ref.row, false, false};
      for (const auto& ref : references_of(parse_formula(cell->formula()), holder, wb.names())) {
        self = self || (iequals(ref.sheet, holder.sheet) && ref.row == holder.row + 1);
      }
      if (!self) per_period_left.push_back(id.left[0]);
    }
  }
  add(MutationKind::OverDepreciate, depreciation);

  if (s.cascade && s.cascade->tiers.size() > 1) {
    add(MutationKind::StaleReportLink, std::vector<RowRef>(s.cascade->tiers.begin() + 1, s.cascade->tiers.end()));
  }
  add(MutationKind::BreakIdentity, per_period_left);

  std::vector<RowRef> solved;
  for (const auto& c : s.convergence) solved.push_back(c.solved);
  add(MutationKind::BreakConvergence, solved);

  if (s.finite_life) add(MutationKind::FinalBalanceResidue, s.clears_out);
  return suite;
}

std::vector<Mutation> parse_mutations(const nlohmann::json& j) {
  const nlohmann::json& list = j.is_object() && j.contains("mutations") ? j.at("mutations") : j;
  if (!list.is_array()) throw SchemaError("mutation suite: expected an array of mutations");
  std::vector<Mutation> out;
  for (std::size_t i = 0; i < list.size(); ++i) {
    const auto& e = list[i];
    std::string where = "mutations[" + std::to_string(i) + "]";
    try {
      Mutation m;
      m.kind = parse_mutation_kind(e.at("kind").get<std::string>());
      auto target = parse_row_ref(e.at("target").get<std::string>());
      if (!target) throw SchemaError("'target' is not a row reference");
      m.target = *target;
      m.id = e.value("id", std::string(mutation_kind_name(m.kind)) + "-" + std::to_string(i + 1));
      if (e.contains("column")) m.column = column_index(e.at("column").get<std::string>());
      m.description = e.value("description", std::string());
      out.push_back(std::move(m));
    } catch (const nlohmann::json::exception& ex) {
      throw SchemaError(where + ": " + ex.what());
    } catch (const Error& ex) {
      throw SchemaError(where + ": " + ex.what());
    }
  }
  return out;
}

std::vector<Mutation> load_mutations(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  try {
    return parse_mutations(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& ex) {
    throw SchemaError(path.string() + ": " + ex.what());
  }
}

nlohmann::json mutations_to_json(const std::vector<Mutation>& suite) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& m : suite) {
    nlohmann::json e{{"id", m.id}, {"kind", mutation_kind_name(m.kind)}, {"target", to_string(m.target)}};
    if (m.column) e["column"] = column_letters(*m.column);
    if (!m.description.empty()) e["description"] = m.description;
    arr.push_back(std::move(e));
  }
  return arr;
}

std::map<std::string, std::set<int>> CoverageReport::matrix() const {
  std::map<std::string, std::set<int>> out;
  for (const auto& o : outcomes) out[o.mutation.id] = o.failing_categories;
  return out;
}

bool CoverageReport::all_caught() const {
  return std::all_of(outcomes.begin(), outcomes.end(), [](const MutationOutcome& o) { return o.caught; });
}

CoverageReport run_campaign(const Workbook& wb, const ModelSchema& schema, const std::vector<Mutation>& mutations,
                            double tolerance, const IterationPolicy& policy) {
  AuditRun base = run_audit(wb, schema, tolerance, policy);
  if (caught(base)) {
    std::string ids;
    for (const auto& r : base.results) {
      if (r.kind == CheckKind::Integrity && !r.passed) ids += (ids.empty() ? "" : ", ") + r.id;
    }
    throw BaselineDirty("baseline model fails integrity checks: " + ids);
  }
  CoverageReport report;
  for (const auto& m : mutations) {
    MutatedModel mm = apply_mutation(wb, schema, m);
    AuditRun run = run_audit(mm.workbook, schema, tolerance, mm.policy.value_or(policy));
    MutationOutcome o;
    o.mutation = m;
    for (const auto& r : run.results) {
      if (r.passed) continue;
      o.failing_categories.insert(r.category);
      o.failing_checks.push_back(r.id);
    }
    o.caught = caught(run);
    o.root_flipped = !base.flag_raised() && run.flag_raised();
    report.outcomes.push_back(std::move(o));
  }
  std::stable_sort(report.outcomes.begin(), report.outcomes.end(),
                   [](const MutationOutcome& a, const MutationOutcome& b) { return a.mutation.id < b.mutation.id; });
  if (!report.outcomes.empty()) {
    auto n = std::count_if(report.outcomes.begin(), report.outcomes.end(),
                           [](const MutationOutcome& o) { return o.caught; });
    report.kill_rate = static_cast<double>(n) / static_cast<double>(report.outcomes.size());
  }
  return report;
}

namespace {

// target = sum of the same-period rows its formula adds and subtracts.
std::optional<IdentitySpec> identity_for(const Workbook& wb, const ModelSchema& s, const RowRef& target) {
  const Cell* cell = first_formula(wb, s, target);
  if (!cell) return std::nullopt;
  FormulaAst f = parse_formula(cell->formula());
  std::vector<RowRef> terms;
  bool ok = true;
  auto flatten = [&](auto&& self, const Node& n, int sign) -> void {
    if (!ok) return;
    if (auto* b = std::get_if<BinaryNode>(&n.v); b && (b->op == BinaryOp::Add || b->op == BinaryOp::Sub)) {
      self(self, *b->lhs, sign);
      self(self, *b->rhs, b->op == BinaryOp::Sub ? -sign : sign);
    } else if (auto* u = std::get_if<UnaryNode>(&n.v)) {
      self(self, *u->child, u->op == UnaryOp::Neg ? -sign : sign);
    } else if (auto* r = std::get_if<RefNode>(&n.v); r && r->ref.col == cell->ref.col && !r->ref.col_absolute) {
      terms.push_back(RowRef{r->ref.sheet.empty() ? target.sheet : r->ref.sheet, r->ref.row, sign});
    } else {
      ok = false;
    }
  };
  flatten(flatten, f.root(), 1);
  if (!ok || terms.empty()) return std::nullopt;
  RowRef left = target;
  left.sign = 1;
  return IdentitySpec{{left}, terms, Reconciliation::PerPeriod, "Regression lock: " + row_label(wb, target)};
}

}  // namespace

ModelSchema regression_lock(const Workbook& wb, const ModelSchema& schema, const Mutation& m, double tolerance,
                            const IterationPolicy& policy) {
  const Sheet& sheet = target_sheet(wb, m);
  for (int c : target_columns(schema, m)) {
    const Cell* cell = sheet.find(m.target.row, c);
    if (cell && !cell->is_formula() && std::holds_alternative<std::string>(cell->literal())) {
      throw CannotConstruct("mutation " + m.id + ": target " + to_string(m.target) + " holds text");
    }
  }
  MutatedModel mm = apply_mutation(wb, schema, m);
  const IterationPolicy mutant_policy = mm.policy.value_or(policy);
  AuditRun base = run_audit(wb, schema, tolerance, policy);
  if (caught(base)) throw BaselineDirty("baseline model fails integrity checks");
  if (caught(run_audit(mm.workbook, schema, tolerance, mutant_policy))) {
    throw NothingToDo("mutation " + m.id + " is already caught");
  }
  auto locks = [&](const ModelSchema& s2) {
    return !caught(run_audit(wb, s2, tolerance, policy)) &&
           caught(run_audit(mm.workbook, s2, tolerance, mutant_policy));
  };

  if (auto id = identity_for(wb, schema, m.target)) {
    ModelSchema s2 = schema;
    s2.identities.push_back(*id);
    if (locks(s2)) return s2;
  }

  // Pin every cell the fault moved to its baseline value.
  EvalResult before = evaluate(wb, policy);
  EvalResult after = evaluate(mm.workbook, mutant_policy);
  ModelSchema s2 = schema;
  const std::string label = "Regression lock: " + row_label(wb, m.target);
  for (int c = schema.first_column; c <= schema.last_column(); ++c) {
    CellRef ref{sheet.name(), c, m.target.row, false, false};
    CellValue bv = before.value(ref);
    const double* b = std::get_if<double>(&bv);
    if (!b) continue;
    CellValue a = after.value(ref);
    const double* ad = std::get_if<double>(&a);
    if (ad && std::fabs(*ad - *b) <= tolerance) continue;
    s2.other_checks.push_back({ref, *b, tolerance, label + " " + column_letters(c)});
  }
  if (s2.other_checks.size() > schema.other_checks.size() && locks(s2)) return s2;
  throw CannotConstruct("mutation " + m.id + ": no identity or reasonableness check separates it from the baseline");
}

std::string render_coverage_text(const CoverageReport& report) {
  std::ostringstream out;
  for (const auto& o : report.outcomes) {
    out << (o.caught ? "caught   " : "MISSED   ") << o.mutation.id << "  " << mutation_kind_name(o.mutation.kind)
        << " " << to_string(o.mutation.target) << "  categories:";
    if (o.failing_categories.empty()) out << " none";
    for (int c : o.failing_categories) out << " " << c;
    out << (o.root_flipped ? "  flag on" : "  flag off") << "\n";
  }
  if (report.kill_rate) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.3f", *report.kill_rate);
    out << "kill rate " << buf << " (" << report.outcomes.size() << " mutations)\n";
  } else {
    out << "kill rate n/a (empty suite, vacuous pass)\n";
  }
  return out.str();
}

nlohmann::json coverage_to_json(const CoverageReport& report) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& o : report.outcomes) {
    arr.push_back({{"id", o.mutation.id},
                   {"kind", mutation_kind_name(o.mutation.kind)},
                   {"target", to_string(o.mutation.target)},
                   {"failing_categories", o.failing_categories},
                   {"failing_checks", o.failing_checks},
                   {"caught", o.caught},
                   {"root_flipped", o.root_flipped}});
  }
  nlohmann::json j{{"mutations", arr}};
  j["kill_rate"] = report.kill_rate ? nlohmann::json(*report.kill_rate) : nlohmann::json(nullptr);
  j["vacuous"] = !report.kill_rate.has_value();
  return j;
}

}  // namespace auditkit
