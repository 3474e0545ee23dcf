#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "auditkit/checks.hpp"
#include "auditkit/eval.hpp"
#include "auditkit/schema.hpp"
#include "auditkit/workbook.hpp"

namespace auditkit {

enum class MutationKind {
  DropSubtotalTerm,
  SignFlip,
  OverRepayLoan,
  OverDepreciate,
  StaleReportLink,
  BreakIdentity,
  BreakConvergence,
  FinalBalanceResidue,
};

std::string_view mutation_kind_name(MutationKind kind);
/// Throws Error for an unknown name.
MutationKind parse_mutation_kind(std::string_view name);
/// The check category each kind of fault is built to trip.
int designed_category(MutationKind kind);

/// A seeded fault. The target is a model row; `column`, when set, restricts
/// the fault to that one cell, otherwise every period column of the row is
/// rewritten (the final period only for final-balance-residue).
struct Mutation {
  std::string id;
  MutationKind kind = MutationKind::DropSubtotalTerm;
  RowRef target;
  std::optional<int> column;
  std::string description;
};

struct MutatedModel {
  Workbook workbook;
  std::optional<IterationPolicy> policy;  // set by break-convergence only
};

/// Applies the fault to a copy of `wb`:
///   drop-subtotal-term     removes the last argument of a SUM with two or more
///   sign-flip              flips the last top-level + or -
///   over-repay-loan,
///   over-depreciate        scale the row by 1.5
///   stale-report-link      replaces the row with the constant 0
///   break-identity         moves every reference one row up
///   break-convergence      caps iteration at one sweep (workbook unchanged)
///   final-balance-residue  adds 1 to the final-period cell
/// Throws TargetMissing when the row has no cell the fault applies to.
MutatedModel apply_mutation(const Workbook& wb, const ModelSchema& schema, const Mutation& m);

/// One mutation of each kind whose subject the schema declares. Targets are
/// picked from the eligible schema rows by `seed`.
std::vector<Mutation> standard_suite(const Workbook& wb, const ModelSchema& schema, std::uint64_t seed = 0);

std::vector<Mutation> parse_mutations(const nlohmann::json& j);
std::vector<Mutation> load_mutations(const std::filesystem::path& path);
nlohmann::json mutations_to_json(const std::vector<Mutation>& suite);

struct MutationOutcome {
  Mutation mutation;
  std::set<int> failing_categories;
  std::vector<std::string> failing_checks;  // check ids
  bool caught = false;                      // an integrity check failed
  bool root_flipped = false;                // flag cell went from off to on
};

struct CoverageReport {
  std::vector<MutationOutcome> outcomes;  // ordered by mutation id
  std::optional<double> kill_rate;        // empty suite: no rate, vacuous pass

  std::map<std::string, std::set<int>> matrix() const;
  bool all_caught() const;
};

/// Throws BaselineDirty when the unmutated model fails an integrity check.
CoverageReport run_campaign(const Workbook& wb, const ModelSchema& schema, const std::vector<Mutation>& mutations,
                            double tolerance = 0.005, const IterationPolicy& policy = {});

/// Extends `schema` with a check that passes on `wb` and fails once `m` is
/// applied: an identity between the target row and the rows its formula
/// reads, else reasonableness checks pinning the cells the fault moved.
/// Throws NothingToDo when `m` is already caught and CannotConstruct when no
/// such check exists (text targets, faults that move no number).
ModelSchema regression_lock(const Workbook& wb, const ModelSchema& schema, const Mutation& m,
                            double tolerance = 0.005, const IterationPolicy& policy = {});

std::string render_coverage_text(const CoverageReport& report);
nlohmann::json coverage_to_json(const CoverageReport& report);

}  // namespace auditkit
