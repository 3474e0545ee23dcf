#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "auditkit/cell.hpp"
#include "auditkit/workbook.hpp"

namespace auditkit {

/// A model row across the timeline, written "Sheet!row". A leading '-'
/// ("-PL!6") flips the sign when the row is used as a term.
struct RowRef {
  std::string sheet;
  int row = 0;
  int sign = 1;

  bool operator==(const RowRef&) const = default;
};

std::optional<RowRef> parse_row_ref(std::string_view text);
std::string to_string(const RowRef& r);

struct SubtotalSpec {
  std::string id;
  std::string label;
  RowRef total;
  std::vector<RowRef> components;
};

struct BalanceSpec {
  RowRef assets;
  RowRef liabilities_equity;
  bool balancing_item = false;  // balance sheet closed by a plug figure
};

enum class SignExpectation { NonNegative, NonPositive };

struct SignRule {
  RowRef row;
  SignExpectation expected = SignExpectation::NonNegative;
  std::string label;
};

struct SourcesUsesSpec {
  std::vector<RowRef> sources;
  std::vector<RowRef> uses;
  std::string label;
};

enum class Reconciliation { PerPeriod, LifeTotal };

struct IdentitySpec {
  std::vector<RowRef> left;
  std::vector<RowRef> right;
  Reconciliation kind = Reconciliation::PerPeriod;
  std::string label;
};

struct CascadeSpec {
  std::vector<RowRef> tiers;
  RowRef residue;
  RowRef net_cash;
};

struct LoanSpec {
  std::string id;
  RowRef drawdown;
  RowRef interest;
  RowRef repayment;
  CellRef rate;
};

struct PhysicalIdentitySpec {
  RowRef producer;
  RowRef consumer;
  std::string label;
};

struct ConvergenceSpec {
  RowRef solved;
  RowRef calculated;
  std::string label;
};

enum class InputPredicate { Range, InTimeline, SumsToOne };

struct InputRule {
  std::vector<CellRef> cells;
  InputPredicate predicate = InputPredicate::Range;
  double min = 0.0;
  double max = 0.0;
  std::string label;
};

enum class Comparator { Ge, Le };

struct OutputThreshold {
  RowRef row;
  Comparator comparator = Comparator::Ge;
  CellRef threshold;
  std::string label;
};

/// Category 8 or 9: user-supplied boolean cells wrapped in one AND.
struct ExternalCheck {
  int category = 8;
  std::vector<CellRef> cells;
  std::string label;
};

/// Category 15: a value checked against a hard-wired expected number.
struct OtherCheck {
  CellRef cell;
  double expected = 0.0;
  double tolerance = 0.0;
  std::string label;
};

/// Declared financial structure of a model (JSON sidecar, schema_version 1).
struct ModelSchema {
  int first_column = 3;  // column of the first period
  std::vector<std::string> periods;
  std::optional<BalanceSpec> balance;
  std::vector<SubtotalSpec> subtotals;
  std::vector<SignRule> sign_rules;
  std::optional<SourcesUsesSpec> sources_uses;
  std::vector<IdentitySpec> identities;
  bool finite_life = false;
  std::vector<RowRef> clears_out;  // balances that must be zero at the end
  std::optional<CascadeSpec> cascade;
  std::vector<LoanSpec> loans;
  std::vector<PhysicalIdentitySpec> physical_identities;
  std::vector<ConvergenceSpec> convergence;
  std::vector<InputRule> input_rules;
  std::vector<OutputThreshold> output_thresholds;
  std::vector<ExternalCheck> external_checks;
  std::vector<OtherCheck> other_checks;

  int period_count() const { return static_cast<int>(periods.size()); }
  int last_column() const { return first_column + period_count() - 1; }
};

/// Throws SchemaError naming the offending entry.
ModelSchema parse_schema(std::string_view json_text);
ModelSchema load_schema(const std::filesystem::path& path);
std::string write_schema(const ModelSchema& schema);

/// Checks every referenced sheet, row and cell against `wb`. A row exists
/// when it holds at least one cell; a loan rate cell must hold a number or
/// a formula. Throws SchemaError.
void validate_schema(const Workbook& wb, const ModelSchema& schema);

}  // namespace auditkit
