#include "auditkit/checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "auditkit/error.hpp"
#include "auditkit/formula.hpp"

namespace auditkit {

std::string_view kind_name(CheckKind k) { return k == CheckKind::Integrity ? "integrity" : "optimisation"; }

std::string_view category_name(int category) {
  static constexpr std::string_view kNames[] = {
      "",         "balance",    "addition",  "signs",    "sources-uses", "identities",
      "clears-out", "cascade",  "ratio-inclusion", "tax-inclusion", "yield", "physical",
      "converged", "inputs",    "outputs",   "other"};
  if (category < 1 || category > 15) return "unknown";
  return kNames[category];
}

std::string free_audit_sheet_name(const Workbook& wb) {
  if (!wb.sheet("Audit")) return "Audit";
  if (!wb.sheet("AuditRun")) return "AuditRun";
  for (int i = 2;; ++i) {
    std::string name = "AuditRun" + std::to_string(i);
    if (!wb.sheet(name)) return name;
  }
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string prefix(const std::string& sheet) { return quote_sheet(sheet) + "!"; }

// "PL!C$5": column follows the period, row pinned.
std::string row_cell(const RowRef& r, int col) {
  return prefix(r.sheet) + column_letters(col) + "$" + std::to_string(r.row);
}

// "PL!$C$5:$N$5"
std::string row_span(const RowRef& r, int first, int last) {
  std::string row = std::to_string(r.row);
  return prefix(r.sheet) + "$" + column_letters(first) + "$" + row + ":$" + column_letters(last) + "$" + row;
}

std::string abs_cell(const CellRef& c) {
  CellRef a = c;
  a.col_absolute = a.row_absolute = true;
  return to_a1(a);
}

std::string local_abs(int col, int row) { return "$" + column_letters(col) + "$" + std::to_string(row); }

// "a+b-c" from signed terms rendered by `render`.
template <typename Render>
std::string signed_terms(const std::vector<RowRef>& terms, Render render) {
  std::string out;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (terms[i].sign < 0) {
      out += "-";
    } else if (i > 0) {
      out += "+";
    }
    out += render(terms[i]);
  }
  return out;
}

bool all_positive(const std::vector<RowRef>& terms) {
  return std::all_of(terms.begin(), terms.end(), [](const RowRef& r) { return r.sign > 0; });
}

// left - right for per-period rows at column `col`.
std::string difference_at(const std::vector<RowRef>& left, const std::vector<RowRef>& right, int col) {
  auto cell = [col](const RowRef& r) { return row_cell(r, col); };
  std::string l = signed_terms(left, cell);
  std::string r = signed_terms(right, cell);
  if (right.size() == 1 && right.front().sign > 0) return l + "-" + r;
  if (all_positive(right)) {
    std::string args;
    for (std::size_t i = 0; i < right.size(); ++i) args += (i ? "," : "") + cell(right[i]);
    return l + "-SUM(" + args + ")";
  }
  return l + "-(" + r + ")";
}

class Builder {
 public:
  Builder(const ModelSchema& s, std::string sheet) : s_(s), sheet_(std::move(sheet)) {}

  struct Point {
    std::string period;
    int col;  // audit column
    std::string expression;
  };

  // Row r holds the per-period measure, row r+1 its absolute value, B r the
  // worst value and B r+1 the boolean result.
  CheckSpec& banded(int category, std::string id, std::string description, const std::vector<Point>& points,
                    double own_tolerance = -1) {
    int r = next_row();
    CheckSpec spec = start(category, std::move(id), std::move(description), r);
    std::string tol = own_tolerance >= 0 ? format_number(own_tolerance) : local_abs(2, kAuditToleranceRow);
    int last_col = kAuditFirstPeriodColumn;
    for (const auto& p : points) {
      spec.formulas.push_back({at(p.col, r), "=" + p.expression});
      spec.formulas.push_back({at(p.col, r + 1), "=ABS(" + column_letters(p.col) + "$" + std::to_string(r) + ")"});
      spec.measures.push_back({p.period, at(p.col, r), p.expression});
      last_col = std::max(last_col, p.col);
    }
    spec.formulas.push_back({at(2, r), "=MAX(" + span(r + 1, last_col) + ")"});
    spec.formulas.push_back({at(2, r + 1), "=" + local_abs(2, r) + "<=" + tol});
    spec.tolerance = own_tolerance;
    specs_.push_back(std::move(spec));
    return specs_.back();
  }

  CheckSpec& wrapper(int category, std::string id, std::string description, const std::vector<CellRef>& cells) {
    int r = next_row();
    CheckSpec spec = start(category, std::move(id), std::move(description), r);
    std::string args;
    for (std::size_t i = 0; i < cells.size(); ++i) args += (i ? "," : "") + abs_cell(cells[i]);
    spec.formulas.push_back({at(2, r + 1), "=AND(" + args + ")"});
    specs_.push_back(std::move(spec));
    return specs_.back();
  }

  // One point per period; `measure` renders the expression for a model column.
  template <typename Measure>
  std::vector<Point> per_period(Measure measure) const {
    std::vector<Point> pts;
    for (int k = 0; k < s_.period_count(); ++k) {
      pts.push_back({s_.periods[k], kAuditFirstPeriodColumn + k, measure(s_.first_column + k)});
    }
    return pts;
  }

  std::vector<Point> single(std::string period, std::string expression) const {
    return {{std::move(period), kAuditFirstPeriodColumn, std::move(expression)}};
  }

  std::vector<CheckSpec> take() { return std::move(specs_); }

 private:
  int next_row() {
    int r = kAuditFirstCheckRow + kAuditCheckStride * static_cast<int>(specs_.size());
    return r;
  }

  CheckSpec start(int category, std::string id, std::string description, int r) const {
    CheckSpec spec;
    spec.id = std::move(id);
    spec.category = category;
    spec.kind = kind_for(category);
    spec.description = std::move(description);
    spec.result = at(2, r + 1);
    return spec;
  }

  CellRef at(int col, int row) const { return CellRef{sheet_, col, row, false, false}; }

  std::string span(int row, int last_col) const {
    if (last_col == kAuditFirstPeriodColumn) return local_abs(kAuditFirstPeriodColumn, row);
    return local_abs(kAuditFirstPeriodColumn, row) + ":" + local_abs(last_col, row);
  }

  const ModelSchema& s_;
  std::string sheet_;
  std::vector<CheckSpec> specs_;
};

std::string numbered(const char* stem, std::size_t i) { return std::string(stem) + "-" + std::to_string(i + 1); }

}  // namespace

std::vector<CheckSpec> generate_checks(const Workbook& wb, const ModelSchema& s, const std::string& audit_sheet,
                                       std::vector<std::string>* warnings) {
  validate_schema(wb, s);
  Builder b(s, audit_sheet);
  const int first = s.first_column;
  const int last = s.last_column();

  // 1 balance
  if (s.balance) {
    if (s.balance->balancing_item) {
      if (warnings) {
        warnings->push_back(
            "balance sheet is closed by a balancing item; the balance check would always pass and is omitted");
      }
    } else {
      const BalanceSpec& bal = *s.balance;
      b.banded(1, "balance", "Balance sheet balances", b.per_period([&](int col) {
        return row_cell(bal.assets, col) + "-" + row_cell(bal.liabilities_equity, col);
      }));
    }
  }
  // 2 addition
  for (const auto& t : s.subtotals) {
    b.banded(2, "subtotal-" + t.id, "Subtotal adds up: " + t.label,
             b.per_period([&](int col) { return difference_at({t.total}, t.components, col); }));
  }
  // 3 signs
  for (std::size_t i = 0; i < s.sign_rules.size(); ++i) {
    const SignRule& rule = s.sign_rules[i];
    const char* fn = rule.expected == SignExpectation::NonNegative ? "MIN" : "MAX";
    std::string sign = rule.expected == SignExpectation::NonNegative ? "not negative" : "not positive";
    b.banded(3, numbered("sign", i), "Sign (" + sign + "): " + rule.label, b.per_period([&](int col) {
      return std::string(fn) + "(0," + row_cell(rule.row, col) + ")";
    }));
  }
  // 4 sources and uses
  if (s.sources_uses) {
    const SourcesUsesSpec& su = *s.sources_uses;
    b.banded(4, "sources-uses", "Sources equal uses: " + su.label, b.per_period([&](int col) {
      auto cell = [col](const RowRef& r) { return row_cell(r, col); };
      return "(" + signed_terms(su.sources, cell) + ")-(" + signed_terms(su.uses, cell) + ")";
    }));
  }
  // 5 identities
  for (std::size_t i = 0; i < s.identities.size(); ++i) {
    const IdentitySpec& id = s.identities[i];
    if (id.kind == Reconciliation::PerPeriod) {
      b.banded(5, numbered("identity", i), "Identity: " + id.label,
               b.per_period([&](int col) { return difference_at(id.left, id.right, col); }));
    } else {
      auto sum = [&](const RowRef& r) { return "SUM(" + row_span(r, first, last) + ")"; };
      std::string expr = signed_terms(id.left, sum) + "-(" + signed_terms(id.right, sum) + ")";
      b.banded(5, numbered("identity", i), "Identity over the life: " + id.label, b.single("life", expr));
    }
  }
  // 6 clears out
  if (s.finite_life) {
    for (std::size_t i = 0; i < s.clears_out.size(); ++i) {
      const RowRef& r = s.clears_out[i];
      CellRef final_cell{r.sheet, last, r.row, true, true};
      b.banded(6, numbered("clears-out", i), "Clears out at the end: " + to_string(r),
               b.single(s.periods.back(), to_a1(final_cell)));
    }
  }
  // 7 cascade
  if (s.cascade) {
    const CascadeSpec& c = *s.cascade;
    b.banded(7, "cascade", "Cash cascade matches net cash flow", b.per_period([&](int col) {
      auto cell = [col](const RowRef& r) { return row_cell(r, col); };
      std::string net = cell(c.net_cash);
      return "ABS(" + signed_terms(c.tiers, cell) + "-" + net + ")+ABS(" + cell(c.residue) + "-" + net + ")";
    }));
  }
  // 8, 9 external inclusion analyses
  for (int category : {8, 9}) {
    for (std::size_t i = 0; i < s.external_checks.size(); ++i) {
      const ExternalCheck& e = s.external_checks[i];
      if (e.category != category) continue;
      b.wrapper(category, numbered(category == 8 ? "ratio-inclusion" : "tax-inclusion", i),
                std::string(category == 8 ? "Ratio inclusion: " : "Tax inclusion: ") + e.label, e.cells);
    }
  }
  // 10 yield
  for (std::size_t i = 0; i < s.loans.size(); ++i) {
    const LoanSpec& l = s.loans[i];
    std::string rate = abs_cell(l.rate);
    auto npv = [&](const RowRef& r) { return "NPV(" + rate + "," + row_span(r, first, last) + ")"; };
    std::string expr = npv(l.interest) + "+" + npv(l.repayment) + "-" + npv(l.drawdown);
    b.banded(10, "yield-" + l.id, "Loan yield equals the interest rate: " + l.id, b.single("life", expr)).loan = i;
  }
  // 11 physical
  for (std::size_t i = 0; i < s.physical_identities.size(); ++i) {
    const PhysicalIdentitySpec& p = s.physical_identities[i];
    b.banded(11, numbered("physical", i), "Physical identity: " + p.label, b.per_period([&](int col) {
      return row_cell(p.producer, col) + "-" + row_cell(p.consumer, col);
    }));
  }
  // 12 converged
  for (std::size_t i = 0; i < s.convergence.size(); ++i) {
    const ConvergenceSpec& c = s.convergence[i];
    b.banded(12, numbered("converged", i), "Iteration converged: " + c.label, b.per_period([&](int col) {
      return row_cell(c.solved, col) + "-" + row_cell(c.calculated, col);
    }));
  }
  // 13 inputs
  for (std::size_t i = 0; i < s.input_rules.size(); ++i) {
    const InputRule& rule = s.input_rules[i];
    std::string expr;
    if (rule.predicate == InputPredicate::SumsToOne) {
      std::string args;
      for (std::size_t k = 0; k < rule.cells.size(); ++k) args += (k ? "," : "") + abs_cell(rule.cells[k]);
      expr = "SUM(" + args + ")-1";
    } else {
      std::string lo = format_number(rule.min), hi = format_number(rule.max);
      for (std::size_t k = 0; k < rule.cells.size(); ++k) {
        std::string x = abs_cell(rule.cells[k]);
        if (k) expr += "+";
        expr += "MAX(0," + lo + "-" + x + ")+MAX(0," + x + "-" + hi + ")";
      }
    }
    std::string what = rule.predicate == InputPredicate::InTimeline ? "Input date within the timeline: "
                                                                    : "Input validation: ";
    b.banded(13, numbered("input", i), what + rule.label, b.single("input", expr));
  }
  // 14 outputs
  for (std::size_t i = 0; i < s.output_thresholds.size(); ++i) {
    const OutputThreshold& t = s.output_thresholds[i];
    std::string thr = abs_cell(t.threshold);
    b.banded(14, numbered("output", i), "Output threshold: " + t.label, b.per_period([&](int col) {
      std::string x = row_cell(t.row, col);
      return t.comparator == Comparator::Ge ? "MAX(0," + thr + "-" + x + ")" : "MAX(0," + x + "-" + thr + ")";
    }));
  }
  // 15 other
  for (std::size_t i = 0; i < s.other_checks.size(); ++i) {
    const OtherCheck& o = s.other_checks[i];
    std::string expr = abs_cell(o.cell) + "-" + format_number(o.expected);
    if (o.expected < 0) expr = abs_cell(o.cell) + "+" + format_number(-o.expected);
    b.banded(15, numbered("other", i), "Reasonableness: " + o.label, b.single("input", expr), o.tolerance);
  }
  return b.take();
}

std::size_t distinct_formula_count(const CheckSpec& spec) {
  std::set<std::string> seen;
  for (const auto& f : spec.formulas) seen.insert(normalize_relative(f.target, parse_formula(f.text)));
  return seen.size();
}

Workbook inject_audit_sheet(const Workbook& wb, const std::vector<CheckSpec>& specs, const AuditLayout& layout) {
  std::string name = specs.empty() ? "Audit" : specs.front().result.sheet;
  if (wb.sheet(name)) throw SheetExists("sheet '" + name + "' already exists");
  Workbook out = wb;
  Sheet& sh = out.add_sheet(name);
  sh.set(1, 1, CellValue{std::string("Model audit")});
  sh.set(kAuditToleranceRow, 1, CellValue{std::string("Tolerance")});
  sh.set(kAuditToleranceRow, 2, CellValue{layout.tolerance});
  sh.set(kAuditRootRow, 1, CellValue{std::string("All checks passed")});
  sh.set(kAuditFlagRow, 1, CellValue{std::string("Audit flag")});
  for (std::size_t k = 0; k < layout.periods.size(); ++k) {
    sh.set(kAuditHeaderRow, kAuditFirstPeriodColumn + static_cast<int>(k), CellValue{layout.periods[k]});
  }
  std::string root;
  for (const auto& spec : specs) {
    int r = spec.result.row - 1;
    sh.set(r, 1, CellValue{spec.description});
    for (const auto& f : spec.formulas) {
      std::optional<std::string> label;
      if (f.target == spec.result) label = spec.description;
      sh.set(f.target.row, f.target.col, Formula{f.text}, label);
    }
    root += (root.empty() ? "" : ",") + to_a1(spec.result, false);
  }
  sh.set(kAuditRootRow, 2, Formula{root.empty() ? "=TRUE" : "=AND(" + root + ")"}, "All checks passed");
  sh.set(kAuditFlagRow, 2, Formula{"=NOT(B" + std::to_string(kAuditRootRow) + ")"}, "Audit flag");
  return out;
}

bool AuditRun::flag_raised() const {
  auto* b = std::get_if<bool>(&root);
  return !(b && *b);
}

bool AuditRun::integrity_passed() const {
  return std::all_of(results.begin(), results.end(),
                     [](const CheckResult& r) { return r.kind != CheckKind::Integrity || r.passed; });
}

namespace {

double number_or_nan(const CellValue& v) {
  if (auto* d = std::get_if<double>(&v)) return *d;
  if (is_blank(v)) return 0.0;
  if (auto* b = std::get_if<bool>(&v)) return *b ? 1.0 : 0.0;
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

AuditRun run_audit(const Workbook& wb, const ModelSchema& schema, double tolerance, const IterationPolicy& policy) {
  AuditRun run;
  run.sheet = free_audit_sheet_name(wb);
  run.specs = generate_checks(wb, schema, run.sheet, &run.warnings);
  run.injected = inject_audit_sheet(wb, run.specs, AuditLayout{tolerance, schema.periods});
  EvalResult ev = evaluate(run.injected, policy);
  run.converged = ev.converged;
  run.root = ev.value(CellRef{run.sheet, 2, kAuditRootRow, false, false});
  run.flag = ev.value(CellRef{run.sheet, 2, kAuditFlagRow, false, false});

  auto value_at = [&](const CellRef& ref) -> CellValue {
    CellValue v = ev.value(ref);
    if (!is_blank(v)) return v;
    if (const Cell* c = run.injected.cell(ref); c && !c->is_formula()) return c->literal();
    return v;
  };

  for (const CheckSpec& spec : run.specs) {
    CheckResult res;
    res.id = spec.id;
    res.category = spec.category;
    res.kind = spec.kind;
    res.description = spec.description;
    const double tol = spec.tolerance >= 0 ? spec.tolerance : tolerance;

    if (spec.measures.empty()) {
      // wrapper around user-supplied boolean cells
      CellValue v = ev.value(spec.result);
      auto* b = std::get_if<bool>(&v);
      res.passed = b && *b;
      res.residual = res.passed ? 0.0 : kInf;
      if (!res.passed) res.failing_periods.push_back("result");
    } else if (spec.loan) {
      const LoanSpec& loan = schema.loans[*spec.loan];
      std::vector<double> flows;
      bool bad = false;
      for (int col = schema.first_column; col <= schema.last_column(); ++col) {
        auto at = [&](const RowRef& r) {
          return r.sign * number_or_nan(value_at(CellRef{r.sheet, col, r.row, false, false}));
        };
        double f = -at(loan.drawdown) + at(loan.interest) + at(loan.repayment);
        if (!std::isfinite(f)) bad = true;
        flows.push_back(f);
      }
      double rate = number_or_nan(value_at(loan.rate));
      res.residual = kInf;
      if (!bad && std::isfinite(rate)) {
        try {
          res.residual = std::fabs(solve_irr(flows) - rate);
        } catch (const NoRoot&) {
        }
      }
      res.passed = res.residual <= 1e-6;
      if (!res.passed) res.failing_periods.push_back("life");
    } else {
      for (const Measure& m : spec.measures) {
        CellValue v = ev.value(m.holder);
        double x = is_number(v) ? std::fabs(std::get<double>(v)) : kInf;
        if (std::isnan(x)) x = kInf;
        res.residual = std::max(res.residual, x);
        if (x > tol) res.failing_periods.push_back(m.period);
      }
      if (spec.category == 12 && !ev.converged) {
        res.residual = kInf;
        if (res.failing_periods.empty()) res.failing_periods.push_back("iteration");
      }
      res.passed = res.failing_periods.empty();
    }
    run.results.push_back(std::move(res));
  }
  return run;
}

std::vector<CheckResult> run_checks(const Workbook& wb, const ModelSchema& schema, double tolerance,
                                    const IterationPolicy& policy) {
  return run_audit(wb, schema, tolerance, policy).results;
}

CheckResult life_total_reconcile(const std::vector<std::vector<double>>& left,
                                 const std::vector<std::vector<double>>& right, double tolerance) {
  auto total = [](const std::vector<std::vector<double>>& rows) {
    double t = 0;
    for (const auto& r : rows) {
      for (double v : r) t += v;
    }
    return t;
  };
  CheckResult res;
  res.id = "life-total";
  res.category = 5;
  res.description = "Totals reconcile over the life";
  res.residual = std::fabs(total(left) - total(right));
  if (std::isnan(res.residual)) res.residual = kInf;
  res.passed = res.residual <= tolerance;
  if (!res.passed) res.failing_periods.push_back("life");
  return res;
}

}  // namespace auditkit
