#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "auditkit/cell.hpp"
#include "auditkit/eval.hpp"
#include "auditkit/schema.hpp"
#include "auditkit/workbook.hpp"

namespace auditkit {

enum class CheckKind { Integrity, Optimisation };

std::string_view kind_name(CheckKind k);
/// Short name of a category 1..15 ("balance", "addition", ...).
std::string_view category_name(int category);

/// Kind implied by a category: optimisation for 14, integrity otherwise.
inline CheckKind kind_for(int category) {
  return category == 14 ? CheckKind::Optimisation : CheckKind::Integrity;
}

struct GeneratedFormula {
  CellRef target;
  std::string text;  // with leading '='
};

/// Numeric discrepancy behind a check in one period ("life" or "input" for
/// single-value checks). Evaluated at `holder` to report residuals.
struct Measure {
  std::string period;
  CellRef holder;
  std::string expression;  // no leading '='
};

struct CheckSpec {
  std::string id;
  int category = 0;
  CheckKind kind = CheckKind::Integrity;
  std::string description;
  std::vector<GeneratedFormula> formulas;  // every audit cell this check writes
  CellRef result;                          // the per-check AND cell
  std::vector<Measure> measures;
  double tolerance = -1;                     // own band (category 15); < 0 means the sheet's
  std::optional<std::size_t> loan;           // index into schema.loans (category 10)
};

struct CheckResult {
  std::string id;
  int category = 0;
  CheckKind kind = CheckKind::Integrity;
  std::string description;
  bool passed = true;
  std::vector<std::string> failing_periods;
  double residual = 0.0;  // worst absolute discrepancy; infinity for error values
};

// Audit sheet layout. Column A holds descriptions, column B per-check cells,
// period columns start at C.
inline constexpr int kAuditToleranceRow = 2;
inline constexpr int kAuditRootRow = 3;
inline constexpr int kAuditFlagRow = 4;
inline constexpr int kAuditHeaderRow = 5;
inline constexpr int kAuditFirstCheckRow = 7;
inline constexpr int kAuditCheckStride = 3;
inline constexpr int kAuditFirstPeriodColumn = 3;

/// "Audit", or the first free "AuditRun", "AuditRun2", ... when taken.
std::string free_audit_sheet_name(const Workbook& wb);

/// One spec per schema entry, ordered by category then schema order.
/// Throws SchemaError (the schema is validated against `wb` first).
/// A balancing-item balance sheet yields no category-1 spec and a warning.
std::vector<CheckSpec> generate_checks(const Workbook& wb, const ModelSchema& schema,
                                       const std::string& audit_sheet = "Audit",
                                       std::vector<std::string>* warnings = nullptr);

/// Number of distinct (relative-normalised) formulas among a spec's cells.
std::size_t distinct_formula_count(const CheckSpec& spec);

struct AuditLayout {
  double tolerance = 0.005;
  std::vector<std::string> periods;  // header labels for row 5
};

/// Copy of `wb` plus the audit sheet: every spec's formulas, a root cell
/// (B3) that ANDs the per-check cells and a flag cell (B4) = NOT(root).
/// The sheet name comes from the specs' targets ("Audit" when empty).
/// Throws SheetExists.
Workbook inject_audit_sheet(const Workbook& wb, const std::vector<CheckSpec>& specs,
                            const AuditLayout& layout = {});

struct AuditRun {
  std::string sheet;
  std::vector<CheckSpec> specs;
  std::vector<CheckResult> results;
  std::vector<std::string> warnings;
  CellValue root;
  CellValue flag;
  bool converged = true;
  Workbook injected;

  bool flag_raised() const;  // anything but a TRUE root
  bool integrity_passed() const;
};

/// Generates, injects and evaluates the checks on a copy of `wb`.
AuditRun run_audit(const Workbook& wb, const ModelSchema& schema, double tolerance = 0.005,
                   const IterationPolicy& policy = {});

/// Results only, in spec order.
std::vector<CheckResult> run_checks(const Workbook& wb, const ModelSchema& schema, double tolerance = 0.005,
                                    const IterationPolicy& policy = {});

/// Passes iff the summed left rows equal the summed right rows over the
/// whole timeline within `tolerance`.
CheckResult life_total_reconcile(const std::vector<std::vector<double>>& left,
                                 const std::vector<std::vector<double>>& right, double tolerance = 0.005);

}  // namespace auditkit
