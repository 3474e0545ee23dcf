#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "auditkit/cell.hpp"
#include "auditkit/checks.hpp"
#include "auditkit/eval.hpp"
#include "auditkit/workbook.hpp"

namespace auditkit {

/// Number of distinct relative-normalised formulas over all formula cells.
std::size_t count_unique_formulae(const Workbook& wb);
/// Same, restricted to one sheet (case-insensitive name).
std::size_t count_unique_formulae(const Workbook& wb, std::string_view sheet);

struct DetectOptions {
  std::vector<std::string> check_sheets{"Audit", "Check", "Checks", "Tests", "Integrity"};
  double scattered_multiplier = 3.0;  // formulas attributed to a test outside a check sheet
};

struct TestRecord {
  CellRef root;
  std::string label;
  int category = 15;
  CheckKind kind = CheckKind::Integrity;
  std::set<CellRef> support;  // same-sheet formula cells feeding only this test
  double attributed_formula_count = 0;
  bool dedicated = false;  // lives on a check sheet
};

bool is_check_sheet(std::string_view name, const DetectOptions& options = {});

/// Finds self-test cells: boolean cells on a check sheet, boolean dependents
/// of the balance sheet footings, and boolean cells feeding an AND/OR/NOT
/// aggregator that itself qualifies. Aggregators are flattened, never
/// reported. Records come back in sheet, row, column order, classified.
std::vector<TestRecord> detect_tests(const Workbook& wb, const EvalResult& eval, const DetectOptions& options = {});

/// Category 1..15 by the first matching rule in the order
/// 1,4,7,2,6,3,10,12,9,8,11,13,14,5,15. Uses the test label, the labels of
/// the model rows the test reads, and the shape of its formulas.
int classify_test(const TestRecord& rec, const Workbook& wb);

/// Raw counts as the published survey letters them: o integrity, i optimisation.
struct SurveyCounts {
  double t = 0;
  double o = 0;
  double i = 0;
};

struct MetricsReport {
  SurveyCounts counts;
  double c = 0;
  double pct_testing = 0;             // fraction, (o+i)/t
  double calcs_per_integrity = 0;     // c/o, infinity when o = 0
  double calcs_per_test_formula = 0;  // c/(o+i), infinity when o+i = 0
  std::map<int, double> per_category;
};

/// Throws EmptyModel when t = 0 and SchemaError when o+i > t or a count is negative.
MetricsReport compute_metrics(const SurveyCounts& counts, const std::map<int, double>& per_category = {});

struct AnalysisReport {
  std::size_t formula_cells = 0;
  std::size_t unique_formulae = 0;
  std::size_t check_sheet_formulae = 0;  // distinct formulas on check sheets
  std::vector<TestRecord> tests;
  MetricsReport metrics;
  bool converged = true;
  std::vector<std::string> warnings;
};

/// Evaluates, detects and counts. o and i are the attributed formula totals
/// of integrity and optimisation tests; when they exceed t they are scaled
/// down with a warning.
AnalysisReport analyze_workbook(const Workbook& wb, const DetectOptions& options = {},
                                const IterationPolicy& policy = {});

}  // namespace auditkit
