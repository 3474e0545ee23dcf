#include <doctest.h>

#include "auditkit/checks.hpp"
#include "auditkit/error.hpp"
#include "auditkit/fixture.hpp"
#include "auditkit/mutation.hpp"

using namespace auditkit;

namespace {

const Fixture& desk() {
  static const Fixture fx = generate_fixture({1, 4, 7});
  return fx;
}

Mutation make(MutationKind kind, const std::string& sheet, int row, std::optional<int> column = std::nullopt) {
  Mutation m;
  m.id = std::string(mutation_kind_name(kind));
  m.kind = kind;
  m.target = RowRef{sheet, row, 1};
  m.column = column;
  return m;
}

MutationOutcome run_one(const Mutation& m, const ModelSchema& schema) {
  CoverageReport rep = run_campaign(desk().model, schema, {m});
  REQUIRE(rep.outcomes.size() == 1);
  return rep.outcomes[0];
}

}  // namespace

TEST_CASE("kind names round trip") {
  for (auto k : {MutationKind::DropSubtotalTerm, MutationKind::SignFlip, MutationKind::OverRepayLoan,
                 MutationKind::OverDepreciate, MutationKind::StaleReportLink, MutationKind::BreakIdentity,
                 MutationKind::BreakConvergence, MutationKind::FinalBalanceResidue}) {
    CHECK(parse_mutation_kind(mutation_kind_name(k)) == k);
  }
  CHECK(mutation_kind_name(MutationKind::DropSubtotalTerm) == "drop-subtotal-term");
  CHECK_THROWS_AS(parse_mutation_kind("delete-everything"), Error);
}

TEST_CASE("dropping a subtotal term fails the addition check") {
  const Fixture& fx = desk();
  const SubtotalSpec* opex = nullptr;
  for (const auto& s : fx.schema.subtotals) {
    if (s.total.sheet == "Ops") opex = &s;
  }
  REQUIRE(opex);
  Mutation m = make(MutationKind::DropSubtotalTerm, "Ops", opex->total.row);
  MutatedModel mm = apply_mutation(fx.model, fx.schema, m);
  CHECK_FALSE(structurally_equal(mm.workbook, fx.model));
  CHECK_FALSE(mm.policy);
  MutationOutcome o = run_one(m, fx.schema);
  CHECK(o.caught);
  CHECK(o.failing_categories.count(2) == 1);
}

TEST_CASE("over-repaying the loan fails the sign checks") {
  const Fixture& fx = desk();
  const LoanSpec& loan = fx.schema.loans.front();
  Mutation m = make(MutationKind::OverRepayLoan, loan.repayment.sheet, loan.repayment.row);
  MutationOutcome o = run_one(m, fx.schema);
  CHECK(o.caught);
  CHECK(o.failing_categories.count(3) == 1);
}

TEST_CASE("a stale cascade link fails the cascade check") {
  const Fixture& fx = desk();
  const RowRef& tier = fx.schema.cascade->tiers.back();
  Mutation m = make(MutationKind::StaleReportLink, tier.sheet, tier.row);
  MutationOutcome o = run_one(m, fx.schema);
  CHECK(o.caught);
  CHECK(o.failing_categories.count(7) == 1);
  CHECK(o.root_flipped);
}

TEST_CASE("break-convergence changes only the policy") {
  const Fixture& fx = desk();
  const auto& conv = fx.schema.convergence.front();
  Mutation m = make(MutationKind::BreakConvergence, conv.solved.sheet, conv.solved.row);
  MutatedModel mm = apply_mutation(fx.model, fx.schema, m);
  REQUIRE(mm.policy);
  CHECK(mm.policy->max_iterations == 1);
  CHECK(run_one(m, fx.schema).failing_categories.count(12) == 1);
}

TEST_CASE("a target with nothing to change is refused") {
  const Fixture& fx = desk();
  CHECK_THROWS_AS(apply_mutation(fx.model, fx.schema, make(MutationKind::SignFlip, "PL", 500)), TargetMissing);
  CHECK_THROWS_AS(apply_mutation(fx.model, fx.schema, make(MutationKind::SignFlip, "Nowhere", 3)), TargetMissing);
  // A single-term SUM has no term to drop.
  CHECK_THROWS_AS(apply_mutation(fx.model, fx.schema, make(MutationKind::DropSubtotalTerm, "PL", 3)), TargetMissing);
}

TEST_CASE("standard suite catches everything and lights the flag") {
  for (int scale : {1, 2}) {
    Fixture fx = generate_fixture({scale, 4, 7});
    for (std::uint64_t seed : {0, 1, 2}) {
      auto suite = standard_suite(fx.model, fx.schema, seed);
      REQUIRE(suite.size() == 8);
      CoverageReport rep = run_campaign(fx.model, fx.schema, suite);
      REQUIRE(rep.kill_rate);
      CHECK(*rep.kill_rate == 1.0);
      CHECK(rep.all_caught());
      for (const auto& o : rep.outcomes) {
        INFO(o.mutation.id);
        CHECK(o.root_flipped);
        CHECK(o.failing_categories.count(designed_category(o.mutation.kind)) == 1);
      }
      auto ids = rep.matrix();
      CHECK(ids.size() == 8);
    }
  }
}

TEST_CASE("suite selection is reproducible from its seed") {
  const Fixture& fx = desk();
  auto a = mutations_to_json(standard_suite(fx.model, fx.schema, 5));
  auto b = mutations_to_json(standard_suite(fx.model, fx.schema, 5));
  CHECK(a == b);
}

TEST_CASE("an empty suite is a vacuous pass") {
  const Fixture& fx = desk();
  CoverageReport rep = run_campaign(fx.model, fx.schema, {});
  CHECK_FALSE(rep.kill_rate);
  CHECK(rep.all_caught());
  CHECK(coverage_to_json(rep)["kill_rate"].is_null());
  CHECK(coverage_to_json(rep)["vacuous"] == true);
}

TEST_CASE("a failing baseline is refused") {
  const Fixture& fx = desk();
  Workbook broken = fx.model;
  broken.sheet("PL")->set(9, 3, Formula{"=C$5-C$6-C$7"});
  auto suite = standard_suite(fx.model, fx.schema);
  CHECK_THROWS_AS(run_campaign(broken, fx.schema, suite), BaselineDirty);
}

TEST_CASE("an uncovered output row escapes until a lock is added") {
  const Fixture& fx = desk();
  auto row = find_row(*fx.model.sheet("Ratios"), "Revenue (summary)");
  REQUIRE(row);
  Mutation m = make(MutationKind::StaleReportLink, "Ratios", *row);
  m.id = "stale-summary";
  MutationOutcome before = run_one(m, fx.schema);
  CHECK_FALSE(before.caught);
  CHECK(before.failing_categories.empty());

  ModelSchema locked = regression_lock(fx.model, fx.schema, m);
  REQUIRE(locked.identities.size() == fx.schema.identities.size() + 1);
  const auto& added = locked.identities.back();
  REQUIRE(added.left.size() == 1);
  CHECK(added.left[0] == RowRef{"Ratios", *row, 1});
  CHECK(added.right.size() == 1);
  CHECK(added.right[0].sheet == "PL");

  CHECK(run_audit(fx.model, locked).integrity_passed());
  MutationOutcome after = run_one(m, locked);
  CHECK(after.caught);
  CHECK(after.failing_categories == std::set<int>{5});
}

TEST_CASE("locking an already caught mutation has nothing to do") {
  const Fixture& fx = desk();
  const LoanSpec& loan = fx.schema.loans.front();
  CHECK_THROWS_AS(
      regression_lock(fx.model, fx.schema, make(MutationKind::OverRepayLoan, loan.repayment.sheet, loan.repayment.row)),
      NothingToDo);
}

TEST_CASE("text cells cannot be locked") {
  const Fixture& fx = desk();
  Mutation m = make(MutationKind::StaleReportLink, "PL", 1, 1);
  CHECK_THROWS_AS(regression_lock(fx.model, fx.schema, m), CannotConstruct);
}

TEST_CASE("mutation lists survive JSON") {
  const Fixture& fx = desk();
  auto suite = standard_suite(fx.model, fx.schema, 3);
  suite[0].column = 5;
  auto j = mutations_to_json(suite);
  auto back = parse_mutations(j);
  CHECK(mutations_to_json(back) == j);
  CHECK(j[0]["column"] == "E");
  CHECK_THROWS_AS(parse_mutations(nlohmann::json::parse(R"([{"id": "x", "kind": "nope", "target": "PL!3"}])")), Error);

  CoverageReport rep = run_campaign(fx.model, fx.schema, suite);
  auto cj = coverage_to_json(rep);
  CHECK(cj["kill_rate"] == 1.0);
  CHECK(cj["mutations"].size() == 8);
  CHECK(render_coverage_text(rep).find("kill rate") != std::string::npos);
}
