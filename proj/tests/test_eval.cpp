#include <doctest.h>

#include <algorithm>
#include <random>
#include <sstream>

#include "auditkit/error.hpp"
#include "auditkit/eval.hpp"
#include "auditkit/fixture.hpp"
#include "support/oracles.hpp"

using namespace auditkit;

namespace {

CellValue eval1(const std::string& formula) {
  Workbook wb = parse_workbook("sheet S\nS!B1 = 2\nS!B2 = 3\nS!B3 = \"x\"\nS!B4 = TRUE\nS!A1 = " + formula + "\n");
  return evaluate(wb).value(*parse_a1("S!A1"));
}

double num(const CellValue& v) {
  REQUIRE(std::holds_alternative<double>(v));
  return std::get<double>(v);
}

ArgValue range_of(std::vector<CellValue> v) { return ArgValue{std::move(v), true}; }

}  // namespace

TEST_CASE("cube of an input") {
  Workbook wb = parse_workbook("sheet S\nS!A1 = 2\nS!A2 = =A1^3\n");
  CHECK(num(evaluate(wb).value(*parse_a1("S!A2"))) == 8);
}

TEST_CASE("self loop converges to its fixed point") {
  Workbook wb = parse_workbook("sheet S\nS!A1 = =0.5*A1+1\n");
  EvalResult r = evaluate(wb);
  CHECK(r.converged);
  CHECK(std::fabs(num(r.value(*parse_a1("S!A1"))) - 2.0) <= 1e-9);
  // Jacobi from 0: x_k = 2 - 2^(1-k), so the change after sweep k is 2^(1-k).
  int k = 1;
  while (std::ldexp(1.0, 1 - k) > 1e-9) ++k;
  CHECK(r.iterations_used == k);
}

TEST_CASE("divergent loop is flagged") {
  Workbook wb = parse_workbook("sheet S\nS!A1 = =A1+1\nS!A2 = =A1*2\n");
  EvalResult r = evaluate(wb);
  CHECK_FALSE(r.converged);
  CHECK(r.value(*parse_a1("S!A1")) == CellValue{ErrorCode::Cycle});
  CHECK(is_error(r.value(*parse_a1("S!A2"))));
}

TEST_CASE("iteration cap of one cannot settle a loop") {
  Workbook wb = parse_workbook("sheet S\nS!A1 = =0.5*A1+1\n");
  EvalResult r = evaluate(wb, IterationPolicy{1, 1e-9});
  CHECK_FALSE(r.converged);
}

TEST_CASE("aggregators") {
  std::vector<ArgValue> args{range_of({1.0, 2.0, Blank{}, 3.0})};
  CHECK(builtin_call("SUM", args) == CellValue{6.0});
  std::vector<ArgValue> with_text{range_of({1.0, std::string("a"), true, 4.0})};
  CHECK(builtin_call("SUM", with_text) == CellValue{5.0});
  CHECK(builtin_call("COUNT", with_text) == CellValue{2.0});
  CHECK(builtin_call("AVERAGE", with_text) == CellValue{2.5});
  CHECK(builtin_call("MIN", with_text) == CellValue{1.0});
  CHECK(builtin_call("MAX", with_text) == CellValue{4.0});
  std::vector<ArgValue> none{range_of({Blank{}})};
  CHECK(builtin_call("MAX", none) == CellValue{0.0});
  CHECK(builtin_call("AVERAGE", none) == CellValue{ErrorCode::Div0});
  std::vector<ArgValue> err{range_of({1.0, ErrorCode::Ref})};
  CHECK(builtin_call("SUM", err) == CellValue{ErrorCode::Ref});
}

TEST_CASE("logic") {
  std::vector<ArgValue> tf{ArgValue::scalar(true), ArgValue::scalar(false)};
  CHECK(builtin_call("AND", tf) == CellValue{false});
  CHECK(builtin_call("OR", tf) == CellValue{true});
  std::vector<ArgValue> t{ArgValue::scalar(true)};
  CHECK(builtin_call("NOT", t) == CellValue{false});
  CHECK(eval1("=AND(B1>1,B2>2)") == CellValue{true});
  CHECK(eval1("=IF(B1>5,1/0,7)") == CellValue{7.0});
  CHECK(eval1("=IF(B1<5,\"y\",\"n\")") == CellValue{std::string("y")});
}

TEST_CASE("unknown functions and type errors") {
  CHECK(eval1("=FOO(1)") == CellValue{ErrorCode::Name});
  CHECK(!is_builtin("FOO"));
  CHECK(is_builtin("npv"));
  CHECK(eval1("=B3+1") == CellValue{ErrorCode::Value});
  CHECK(eval1("=B1/0") == CellValue{ErrorCode::Div0});
  CHECK(eval1("=Nowhere!A1+1") == CellValue{ErrorCode::Ref});
  CHECK(eval1("=B1&B2") == CellValue{std::string("23")});
  CHECK(eval1("=\"ABC\"=\"abc\"") == CellValue{true});
  CHECK(eval1("=B4+1") == CellValue{2.0});
  CHECK(eval1("=B9+1") == CellValue{1.0});
}

TEST_CASE("rounding is half away from zero on the decimal rendering") {
  CHECK(round_half_away(2.675, 2) == 2.68);
  CHECK(round_half_away(1.005, 2) == 1.01);
  CHECK(round_half_away(-2.5, 0) == -3);
  CHECK(round_half_away(0.125, 2) == 0.13);
  CHECK(round_half_away(1234.5, 0) == 1235);
  CHECK(round_half_away(15.5, -1) == 20);
  CHECK(round_half_away(-0.0049, 2) == 0);
  CHECK(num(eval1("=ROUND(2.675,2)")) == 2.68);
}

TEST_CASE("NPV discounts from the first period") {
  CHECK(num(eval1("=NPV(0.1,110,121)")) == doctest::Approx(200.0));
  std::vector<double> flows{-100, 110};
  CHECK(npv_at(0.1, flows) == doctest::Approx(0.0));
}

TEST_CASE("IRR, single and two period") {
  std::vector<double> one{-1000, 1100};
  CHECK(std::fabs(solve_irr(one) - 0.10) <= 1e-9);
  std::vector<double> two{-1000, 0, 1210};
  CHECK(std::fabs(solve_irr(two) - 0.10) <= 1e-9);
}

TEST_CASE("IRR picks the root nearest zero, as a 1e-6 grid scan does") {
  std::vector<double> flows{-100, 230, -132};
  auto grid = oracle::grid_root(flows);
  REQUIRE(grid);
  double r = solve_irr(flows);
  CHECK(std::fabs(r - *grid) <= 1e-6);
  double scale = 100 + 230 + 132;
  CHECK(std::fabs(npv_at(r, flows)) <= 1e-6 * scale);
}

TEST_CASE("IRR without a sign change") {
  std::vector<double> flows{100, 100};
  CHECK_THROWS_AS(solve_irr(flows), NoRoot);
  std::vector<double> empty;
  CHECK_THROWS_AS(solve_irr(empty), NoRoot);
}

TEST_CASE("IRR residual bound on random single-drawdown loans") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> rate(0.0, 0.3);
  for (int k = 0; k < 200; ++k) {
    double r = rate(rng);
    int n = 2 + static_cast<int>(rng() % 12);
    std::vector<double> flows{-1000};
    double balance = 1000;
    for (int t = 1; t <= n; ++t) {
      double repay = t == n ? balance : balance / (n - t + 1);
      flows.push_back(balance * r + repay);
      balance -= repay;
    }
    double got = solve_irr(flows);
    CHECK(std::fabs(got - r) <= 1e-6);
  }
}

TEST_CASE("evaluation is deterministic and independent of declaration order") {
  Fixture fx = generate_fixture({2, 3, 11});
  std::string text = write_workbook(fx.model);
  EvalResult a = evaluate(fx.model);
  EvalResult b = evaluate(fx.model);
  CHECK(a.values == b.values);

  // Shuffle every cell line while keeping sheet declarations first.
  std::istringstream in(text);
  std::vector<std::string> sheets, cells;
  for (std::string line; std::getline(in, line);) (line.rfind("sheet ", 0) == 0 ? sheets : cells).push_back(line);
  for (std::uint64_t seed : {1, 2, 3}) {
    std::shuffle(cells.begin(), cells.end(), std::mt19937_64(seed));
    std::string shuffled;
    for (const auto& l : sheets) shuffled += l + "\n";
    for (const auto& l : cells) shuffled += l + "\n";
    EvalResult c = evaluate(parse_workbook(shuffled));
    CHECK(c.values == a.values);
    CHECK(c.converged == a.converged);
  }
}

TEST_CASE("cascade tiers add up to net cash on the fixture") {
  Fixture fx = generate_fixture({1, 4, 3});
  EvalResult r = evaluate(fx.model);
  CHECK(r.converged);
  for (int c = 3; c <= 14; ++c) {
    double tiers = 0;
    for (const auto& t : fx.schema.cascade->tiers) {
      tiers += t.sign * num(r.value(CellRef{t.sheet, c, t.row, false, false}));
    }
    const RowRef& net = fx.schema.cascade->net_cash;
    CHECK(tiers == doctest::Approx(num(r.value(CellRef{net.sheet, c, net.row, false, false}))));
  }
}

TEST_CASE("formulas evaluate against an earlier result") {
  Workbook wb = parse_workbook("sheet S\nS!A1 = 4\nS!A2 = =A1*2\n");
  EvalResult r = evaluate(wb);
  CellValue v = evaluate_formula(wb, r, *parse_a1("S!C1"), parse_formula("=A2+A1"));
  CHECK(v == CellValue{12.0});
}
