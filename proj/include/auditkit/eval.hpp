#pragma once

#include <map>
#include <span>
#include <string_view>
#include <vector>

#include "auditkit/cell.hpp"
#include "auditkit/formula.hpp"
#include "auditkit/workbook.hpp"

namespace auditkit {

/// Fixed-point iteration settings for circular components.
struct IterationPolicy {
  int max_iterations = 100;
  double tolerance = 1e-9;
};

struct EvalResult {
  std::map<CellRef, CellValue> values;  // every graph node; canonical sheet names
  bool converged = true;
  int iterations_used = 0;
  double max_residual = 0.0;

  /// Value at `ref` (sheet matched case-insensitively, markers ignored);
  /// blank when the cell is not part of the result.
  CellValue value(const CellRef& ref) const;
};

/// Evaluates every formula. Acyclic cells are computed in dependency order.
/// Each circular component is solved by Jacobi sweeps starting from 0 until
/// the largest change is within `policy.tolerance`; a component that misses
/// the cap is set to #CYCLE! and `converged` becomes false.
EvalResult evaluate(const Workbook& wb, const IterationPolicy& policy = {});

/// Evaluates a formula that is not stored in `wb`, as if it sat at `holder`,
/// reading cell values from an earlier evaluation.
CellValue evaluate_formula(const Workbook& wb, const EvalResult& values, const CellRef& holder,
                           const FormulaAst& formula);

/// One evaluated function argument: a scalar or the cells of a range.
struct ArgValue {
  std::vector<CellValue> values;
  bool is_range = false;

  static ArgValue scalar(CellValue v) { return ArgValue{{std::move(v)}, false}; }
};

/// The supported function set: SUM MIN MAX ABS ROUND IF AND OR NOT COUNT
/// AVERAGE NPV. Anything else yields #NAME?.
CellValue builtin_call(std::string_view name, std::span<const ArgValue> args);
bool is_builtin(std::string_view name);

/// ROUND semantics: half away from zero on the value's 15-significant-digit
/// decimal rendering, so ROUND(2.675, 2) gives 2.68.
double round_half_away(double value, int digits);

/// NPV(r) = sum of flows[t] / (1+r)^t, t starting at 0.
double npv_at(double rate, std::span<const double> flows);

/// Periodic rate r in (-0.99, 10] with NPV(r) = 0. Brackets of width 1e-3
/// are scanned outward from 0 (alternating up and down) and the first sign
/// change is bisected, so the root nearest 0 wins. Throws NoRoot.
double solve_irr(std::span<const double> flows);

}  // namespace auditkit
