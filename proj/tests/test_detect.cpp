#include <doctest.h>

#include <cmath>
#include <random>

#include "auditkit/detect.hpp"
#include "auditkit/error.hpp"
#include "auditkit/fixture.hpp"
#include "auditkit/survey.hpp"

using namespace auditkit;

namespace {

std::vector<TestRecord> detect(const Workbook& wb) { return detect_tests(wb, evaluate(wb)); }

const TestRecord* at(const std::vector<TestRecord>& recs, const char* a1) {
  CellRef r = *parse_a1(a1);
  for (const auto& t : recs) {
    if (t.root == r) return &t;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("five booleans and their AND on an audit sheet") {
  Workbook wb = parse_workbook(
      "sheet Model\nsheet Audit\n"
      "Model!C5 = 10\nModel!C6 = 10\n"
      "Audit!B3 = =AND(B5:B9)\n"
      "Audit!B5 = =Model!C5=Model!C6\n"
      "Audit!B6 = =Model!C5>=0\n"
      "Audit!B7 = =Model!C6>=0\n"
      "Audit!B8 = =Model!C5<100\n"
      "Audit!B9 = =Model!C6<100\n");
  auto recs = detect(wb);
  CHECK(recs.size() == 5);
  CHECK_FALSE(at(recs, "Audit!B3"));
  for (const auto& r : recs) {
    CHECK(r.dedicated);
    CHECK(r.attributed_formula_count == 1);
  }
}

TEST_CASE("a scattered comparison counts as three formulas") {
  Workbook wb = parse_workbook(
      "sheet Calc\nsheet Summary\n"
      "Calc!A40 = \"Total assets\"\n"
      "Calc!F40 = =F30+F31\nCalc!F30 = 4\nCalc!F31 = 6\n"
      "Calc!G40 = =10\n"
      "Calc!H40 = =(F40=G40)\n"
      "Summary!B2 = =IF(Calc!H40,\"ok\",\"check\")\n");
  auto recs = detect(wb);
  REQUIRE(recs.size() == 1);
  CHECK(recs[0].root == *parse_a1("Calc!H40"));
  CHECK_FALSE(recs[0].dedicated);
  CHECK(recs[0].attributed_formula_count == 3);

  DetectOptions wide;
  wide.scattered_multiplier = 5;
  CHECK(detect_tests(wb, evaluate(wb), wide)[0].attributed_formula_count == 5);
}

TEST_CASE("no booleans, no tests") {
  Workbook wb = parse_workbook("sheet Audit\nAudit!B2 = =1+1\nAudit!B3 = =B2*2\n");
  CHECK(detect(wb).empty());
  CHECK(detect(Workbook{}).empty());
}

TEST_CASE("check sheet names are configurable and case-insensitive") {
  CHECK(is_check_sheet("AUDIT"));
  CHECK(is_check_sheet("integrity"));
  CHECK_FALSE(is_check_sheet("Ops"));
  DetectOptions mine;
  mine.check_sheets = {"Controls"};
  CHECK(is_check_sheet("controls", mine));
  CHECK_FALSE(is_check_sheet("Audit", mine));

  Workbook wb = parse_workbook("sheet Controls\nControls!B2 = =1=1\n");
  CHECK(detect(wb).empty());
  CHECK(detect_tests(wb, evaluate(wb), mine).size() == 1);
}

TEST_CASE("classification examples") {
  Workbook wb = parse_workbook(
      "sheet BS\nsheet Audit\n"
      "BS!A5 = \"Total assets\"\nBS!C5 = =100\n"
      "BS!A10 = \"Total liabilities and equity\"\nBS!C10 = =100\n"
      "BS!A12 = \"Sources\"\nBS!C12 = =SUM(C5:C5)\n"
      "BS!A13 = \"Uses\"\nBS!C13 = =SUM(C10:C10)\n"
      "BS!A15 = \"DSCR\"\nBS!C15 = =1.4\n"
      "Audit!A3 = \"Balance\"\nAudit!B3 = =BS!C5=BS!C10\n"
      "Audit!A4 = \"Sources = Uses\"\nAudit!B4 = =BS!C12=BS!C13\n"
      "Audit!A5 = \"covenant\"\nAudit!B5 = =BS!C15>=1.25\n");
  auto recs = detect(wb);
  REQUIRE(recs.size() == 3);
  CHECK(at(recs, "Audit!B3")->category == 1);
  CHECK(at(recs, "Audit!B4")->category == 4);
  const TestRecord* cov = at(recs, "Audit!B5");
  CHECK(cov->category == 14);
  CHECK(cov->kind == CheckKind::Optimisation);
  for (const auto& r : recs) CHECK(classify_test(r, wb) == r.category);
}

TEST_CASE("metrics, published columns") {
  MetricsReport big = compute_metrics({5930, 25.5, 72});
  CHECK(big.c == 5832.5);
  CHECK(format_percent(big.pct_testing) == "1.6%");
  CHECK(std::floor(big.calcs_per_integrity) == 228);

  MetricsReport small = compute_metrics({3098.5, 201, 39});
  CHECK(small.c == 2858.5);
  CHECK(format_percent(small.pct_testing) == "7.7%");
  CHECK(std::floor(small.calcs_per_integrity) == 14);
}

TEST_CASE("metrics, degenerate counts") {
  MetricsReport m = compute_metrics({10, 0, 0});
  CHECK(m.c == 10);
  CHECK(m.pct_testing == 0);
  CHECK(std::isinf(m.calcs_per_integrity));
  CHECK(format_ratio(m.calcs_per_integrity) == "∞");
  CHECK_THROWS_AS(compute_metrics({0, 0, 0}), EmptyModel);
}

TEST_CASE("metric identities on random counts") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> u(0, 1);
  for (int k = 0; k < 500; ++k) {
    double t = 1 + std::floor(u(rng) * 10000);
    double o = std::floor(u(rng) * t) / 2;
    double i = std::floor(u(rng) * (t - o));
    MetricsReport m = compute_metrics({t, o, i});
    CHECK(m.c == t - o - i);
    CHECK(m.pct_testing == doctest::Approx((o + i) / t));
    if (o > 0) CHECK(m.calcs_per_integrity == doctest::Approx(m.c / o));
    if (o + i > 0) CHECK(m.calcs_per_test_formula == doctest::Approx(m.c / (o + i)));
  }
}

TEST_CASE("attributed counts match the audit sheet's unique formulas") {
  Workbook wb = parse_workbook(
      "sheet Model\nsheet Audit\n"
      "Model!C5 = 1\nModel!C6 = 1\nModel!C8 = 2\nModel!C20 = 2\nModel!D9 = 3\n"
      "Audit!C3 = =Model!C5-Model!C6\nAudit!B3 = =ABS(C3)<0.01\n"
      "Audit!C4 = =Model!C8-Model!C20\nAudit!B4 = =ABS(C4)<0.02\n"
      "Audit!B5 = =Model!D9>=0\n");
  auto recs = detect(wb);
  REQUIRE(recs.size() == 3);
  double sum = 0;
  for (const auto& r : recs) sum += r.attributed_formula_count;
  CHECK(sum == count_unique_formulae(wb, "Audit"));
  CHECK(sum == 5);
}

TEST_CASE("every injected fixture check is found with its category") {
  Fixture fx = generate_fixture({1, 4, 7});
  AuditRun run = run_audit(fx.model, fx.schema);
  AnalysisReport rep = analyze_workbook(run.injected);
  std::map<CellRef, int> found;
  for (const auto& t : rep.tests) found[t.root] = t.category;
  for (const auto& spec : run.specs) {
    INFO(spec.id);
    auto it = found.find(spec.result.position());
    REQUIRE(it != found.end());
    if (spec.category != 8 && spec.category != 9) CHECK(it->second == spec.category);
  }
  CHECK(rep.tests.size() == run.specs.size());
  for (const auto& t : rep.tests) CHECK((t.kind == CheckKind::Optimisation) == (t.category == 14));
}

TEST_CASE("full-size fixture lands near one test formula per five") {
  Fixture fx = generate_fixture();
  AuditRun run = run_audit(fx.model, fx.schema);
  AnalysisReport rep = analyze_workbook(run.injected);
  CHECK(rep.converged);
  double ratio = rep.metrics.calcs_per_test_formula;
  CHECK(ratio >= 4.5);
  CHECK(ratio <= 5.5);
  CHECK(rep.metrics.pct_testing >= 0.15);
  CHECK(rep.metrics.pct_testing <= 0.20);
}
