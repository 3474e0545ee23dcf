#include "auditkit/fixture.hpp"

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "auditkit/error.hpp"

namespace auditkit {

namespace {

constexpr int kConstruction = 2;
constexpr int kOperating = 10;
constexpr int kPeriods = kConstruction + kOperating;
constexpr int kFirst = 3;  // column C
constexpr int kLast = kFirst + kPeriods - 1;

std::string col(int c) { return column_letters(c); }
std::string num(int n) { return std::to_string(n); }
// "C$5": period column, pinned row.
std::string pr(int c, int row) { return col(c) + "$" + num(row); }
// "$C$5"
std::string ab(int c, int row) { return "$" + col(c) + "$" + num(row); }

class Writer {
 public:
  explicit Writer(Sheet& sh) : sh_(sh) {}

  void text(int row, int c, const std::string& s) { sh_.set(row, c, CellValue{s}); }
  void label(int row, const std::string& s) { text(row, 1, s); }
  void value(int row, int c, double v) { sh_.set(row, c, CellValue{v}); }
  void formula(int row, int c, const std::string& f) { sh_.set(row, c, Formula{f}); }

  // Same formula across every period column; `f` renders it for column c.
  template <typename F>
  void across(int row, const std::string& lbl, F f) {
    label(row, lbl);
    for (int c = kFirst; c <= kLast; ++c) formula(row, c, f(c));
  }

  // Period total in column B.
  void total(int row) { formula(row, 2, "=SUM(" + col(kFirst) + num(row) + ":" + col(kLast) + num(row) + ")"); }

  // Opening balance: previous column of the closing row directly below.
  void opening(int row, const std::string& lbl) {
    across(row, lbl, [row](int c) { return "=" + col(c - 1) + num(row + 1); });
  }

 private:
  Sheet& sh_;
};

double rounded(double v, int decimals) {
  double p = std::pow(10.0, decimals);
  return std::round(v * p) / p;
}

struct SegmentInputs {
  int volume, price, capex, phasing, conversion;
  std::vector<int> lines;
};

struct SegmentRows {
  int volume, revenue, produced, consumed, opex, ebitda, margin;
  std::vector<int> line_totals;
  int capex, depreciation, nbv;
  int share, dscr;
};

}  // namespace

std::optional<int> find_row(const Sheet& sheet, std::string_view label) {
  for (const auto& [pos, cell] : sheet.cells()) {
    if (pos.second != 1 || cell.is_formula()) continue;
    if (auto* s = std::get_if<std::string>(&cell.literal()); s && iequals(*s, label)) return pos.first;
  }
  return std::nullopt;
}

Fixture generate_fixture(const FixtureOptions& options) {
  if (options.scale < 1) throw Error("fixture scale must be at least 1");
  if (options.cost_lines < 1) throw Error("fixture needs at least one cost line");
  const int S = options.scale;
  const int J = options.cost_lines;
  std::mt19937 rng(options.seed);
  auto uniform = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };

  Fixture fx;
  Workbook& wb = fx.model;
  for (const char* name : {"Inputs", "Time", "Ops", "Capex", "Fin", "PL", "CF", "BS", "Cascade", "Ratios"}) {
    wb.add_sheet(name);
  }
  Writer in(*wb.sheet("Inputs")), tm(*wb.sheet("Time")), ops(*wb.sheet("Ops")), cap(*wb.sheet("Capex")),
      fin(*wb.sheet("Fin")), pl(*wb.sheet("PL")), cf(*wb.sheet("CF")), bs(*wb.sheet("BS")),
      cas(*wb.sheet("Cascade")), rat(*wb.sheet("Ratios"));

  // Inputs ------------------------------------------------------------------
  in.label(1, "Inputs");
  const int kConstructionRow = 3, kOperatingRow = 4, kGearingRow = 5, kRateRow = 6, kFeeRow = 7, kMaturityRow = 8,
            kMinDscrRow = 9, kMinMarginRow = 10;
  in.label(kConstructionRow, "Construction periods");
  in.value(kConstructionRow, kFirst, kConstruction);
  in.label(kOperatingRow, "Operating periods");
  in.value(kOperatingRow, kFirst, kOperating);
  in.label(kGearingRow, "Gearing");
  in.value(kGearingRow, kFirst, 0.7);
  in.label(kRateRow, "Interest rate");
  in.value(kRateRow, kFirst, 0.06);
  in.label(kFeeRow, "Agency fee rate");
  in.value(kFeeRow, kFirst, 0.02);
  in.label(kMaturityRow, "Debt maturity (period)");
  in.value(kMaturityRow, kFirst, kPeriods);
  in.label(kMinDscrRow, "Minimum DSCR");
  in.value(kMinDscrRow, kFirst, 1.2);
  in.label(kMinMarginRow, "Minimum EBITDA margin");
  in.value(kMinMarginRow, kFirst, 0.05);

  std::vector<SegmentInputs> inputs(S);
  for (int k = 0; k < S; ++k) {
    const int b = 12 + k * (J + 8);
    const std::string seg = "Segment " + num(k + 1);
    SegmentInputs& si = inputs[k];
    in.label(b, seg);
    si.volume = b + 1;
    in.label(si.volume, seg + " volume");
    in.value(si.volume, kFirst, rounded(uniform(80, 120), 0));
    si.price = b + 2;
    in.label(si.price, seg + " price");
    in.value(si.price, kFirst, rounded(uniform(4.5, 5.5), 2));
    si.capex = b + 3;
    in.label(si.capex, seg + " capex");
    in.value(si.capex, kFirst, rounded(uniform(800, 1200), 0));
    si.phasing = b + 4;
    in.label(si.phasing, seg + " capex phasing");
    double first = rounded(uniform(0.4, 0.7), 2);
    in.value(si.phasing, kFirst, first);
    in.value(si.phasing, kFirst + 1, rounded(1.0 - first, 2));
    si.conversion = b + 5;
    in.label(si.conversion, seg + " conversion ratio");
    in.value(si.conversion, kFirst, rounded(uniform(1.5, 3.0), 2));
    in.label(b + 6, seg + " cost lines: unit cost, fixed cost, escalation");
    for (int j = 0; j < J; ++j) {
      int r = b + 7 + j;
      si.lines.push_back(r);
      in.label(r, seg + " cost line " + num(j + 1));
      in.value(r, kFirst, rounded(uniform(0.5, 1.5) / J, 4));
      in.value(r, kFirst + 1, rounded(uniform(50, 150) / J, 3));
      in.value(r, kFirst + 2, rounded(uniform(0.0, 0.03), 3));
    }
  }

  // Time --------------------------------------------------------------------
  const int kPeriodRow = 3, kConFlag = 4, kOpsFlag = 5, kFinalFlag = 6, kOpYear = 7, kPriceIndex = 8;
  tm.label(1, "Timeline");
  tm.label(2, "Period");
  for (int c = kFirst; c <= kLast; ++c) tm.text(2, c, "P" + num(c - kFirst + 1));
  tm.label(kPeriodRow, "Period number");
  tm.value(kPeriodRow, kFirst, 1);
  for (int c = kFirst + 1; c <= kLast; ++c) tm.formula(kPeriodRow, c, "=" + col(c - 1) + num(kPeriodRow) + "+1");
  const std::string con = "Inputs!" + ab(kFirst, kConstructionRow);
  const std::string opn = "Inputs!" + ab(kFirst, kOperatingRow);
  tm.across(kConFlag, "Construction flag",
            [&](int c) { return "=IF(" + pr(c, kPeriodRow) + "<=" + con + ",1,0)"; });
  tm.across(kOpsFlag, "Operations flag", [&](int c) { return "=1-" + pr(c, kConFlag); });
  tm.across(kFinalFlag, "Final period flag",
            [&](int c) { return "=IF(" + pr(c, kPeriodRow) + "=" + con + "+" + opn + ",1,0)"; });
  tm.across(kOpYear, "Operating year", [&](int c) { return "=MAX(0," + pr(c, kPeriodRow) + "-" + con + ")"; });
  tm.across(kPriceIndex, "Price index", [&](int c) { return "=1.02^" + pr(c, kOpYear); });
  auto time = [](int c, int row) { return "Time!" + pr(c, row); };

  // Ops ---------------------------------------------------------------------
  std::vector<SegmentRows> rows(S);
  ops.label(1, "Operations");
  for (int k = 0; k < S; ++k) {
    const SegmentInputs& si = inputs[k];
    SegmentRows& sr = rows[k];
    const std::string seg = "Segment " + num(k + 1);
    const int b = 3 + k * (4 * J + 10);
    ops.label(b, seg);
    sr.volume = b + 1;
    ops.across(sr.volume, seg + " volume",
               [&](int c) { return "=Inputs!" + ab(kFirst, si.volume) + "*" + time(c, kOpsFlag); });
    const int price = b + 2;
    ops.across(price, seg + " price",
               [&](int c) { return "=Inputs!" + ab(kFirst, si.price) + "*" + time(c, kPriceIndex); });
    sr.revenue = b + 3;
    ops.across(sr.revenue, seg + " revenue", [&](int c) { return "=" + pr(c, sr.volume) + "*" + pr(c, price); });
    sr.produced = b + 4;
    ops.across(sr.produced, seg + " feedstock produced",
               [&](int c) { return "=" + pr(c, sr.volume) + "/Inputs!" + ab(kFirst, si.conversion); });
    sr.consumed = b + 5;
    ops.across(sr.consumed, seg + " feedstock consumed", [&](int c) {
      return "=" + pr(c, sr.volume) + "*" + time(c, kOpsFlag) + "/Inputs!" + ab(kFirst, si.conversion);
    });
    for (int j = 0; j < J; ++j) {
      const int lb = b + 6 + 4 * j;
      const int li = si.lines[j];
      const std::string line = seg + " line " + num(j + 1);
      ops.across(lb, line + " cost index",
                 [&](int c) { return "=(1+Inputs!" + ab(kFirst + 2, li) + ")^" + time(c, kOpYear); });
      ops.across(lb + 1, line + " variable cost", [&](int c) {
        return "=" + pr(c, sr.volume) + "*Inputs!" + ab(kFirst, li) + "*" + pr(c, lb);
      });
      ops.across(lb + 2, line + " fixed cost", [&](int c) {
        return "=Inputs!" + ab(kFirst + 1, li) + "*" + pr(c, lb) + "*" + time(c, kOpsFlag);
      });
      ops.across(lb + 3, line + " total", [&](int c) { return "=" + pr(c, lb + 1) + "+" + pr(c, lb + 2); });
      sr.line_totals.push_back(lb + 3);
    }
    sr.opex = b + 6 + 4 * J;
    ops.across(sr.opex, seg + " total opex", [&](int c) {
      std::string args;
      for (std::size_t j = 0; j < sr.line_totals.size(); ++j) args += (j ? "," : "") + pr(c, sr.line_totals[j]);
      return "=SUM(" + args + ")";
    });
    sr.ebitda = sr.opex + 1;
    ops.across(sr.ebitda, seg + " EBITDA", [&](int c) { return "=" + pr(c, sr.revenue) + "-" + pr(c, sr.opex); });
    sr.margin = sr.opex + 2;
    ops.across(sr.margin, seg + " EBITDA margin", [&](int c) {
      return "=IF(" + pr(c, sr.revenue) + "=0,1," + pr(c, sr.ebitda) + "/" + pr(c, sr.revenue) + ")";
    });
  }

  // Capex -------------------------------------------------------------------
  cap.label(1, "Capital expenditure");
  for (int k = 0; k < S; ++k) {
    const SegmentInputs& si = inputs[k];
    SegmentRows& sr = rows[k];
    const std::string seg = "Segment " + num(k + 1);
    const int b = 3 + k * 5;
    sr.capex = b;
    cap.across(b, seg + " capex", [&](int c) {
      return "=Inputs!" + ab(kFirst, si.capex) + "*Inputs!" + pr(c, si.phasing);
    });
    cap.total(b);
    sr.depreciation = b + 1;
    cap.across(b + 1, seg + " depreciation",
               [&](int c) { return "=" + ab(2, b) + "*" + time(c, kOpsFlag) + "/" + opn; });
    cap.opening(b + 2, seg + " NBV opening");
    sr.nbv = b + 3;
    cap.across(b + 3, seg + " NBV closing",
               [&](int c) { return "=" + pr(c, b + 2) + "+" + pr(c, b) + "-" + pr(c, b + 1); });
  }
  const int kCapTotal = 3 + S * 5 + 1, kDepTotal = kCapTotal + 1, kNbvTotal = kCapTotal + 2;
  auto segment_sum = [&](int c, int SegmentRows::*field, const std::string& sheet = "") {
    std::string args;
    for (int k = 0; k < S; ++k) args += (k ? "," : "") + sheet + pr(c, rows[k].*field);
    return "=SUM(" + args + ")";
  };
  cap.across(kCapTotal, "Total capex", [&](int c) { return segment_sum(c, &SegmentRows::capex); });
  cap.total(kCapTotal);
  cap.across(kDepTotal, "Total depreciation", [&](int c) { return segment_sum(c, &SegmentRows::depreciation); });
  cap.across(kNbvTotal, "Total NBV", [&](int c) { return segment_sum(c, &SegmentRows::nbv); });

  // Fin ---------------------------------------------------------------------
  const int fCapex = 3, fFeeSolved = 4, fBase = 5, fDraw = 6, fFeeCalc = 7, fConInt = 8, fEquity = 9;
  const int fDebtOpen = 11, fDebtClose = 12, fRepay = 13, fInterest = 14;
  const int fScOpen = 16, fScClose = 17, fRedeem = 18;
  const int fReOpen = 20, fReClose = 21, fProfit = 22, fDividend = 23;
  fin.label(1, "Financing");
  fin.across(fCapex, "Capex", [&](int c) { return "=Capex!" + pr(c, kCapTotal); });
  fin.total(fCapex);
  fin.across(fFeeSolved, "Agency fee (solved)", [&](int c) { return "=" + pr(c, fFeeCalc); });
  fin.across(fBase, "Debt funding base", [&](int c) { return "=" + pr(c, fCapex) + "+" + pr(c, fFeeSolved); });
  fin.across(fDraw, "Drawdown",
             [&](int c) { return "=" + pr(c, fBase) + "*Inputs!" + ab(kFirst, kGearingRow); });
  fin.total(fDraw);
  fin.across(fFeeCalc, "Agency fee (calculated)",
             [&](int c) { return "=" + pr(c, fDraw) + "*Inputs!" + ab(kFirst, kFeeRow); });
  fin.across(fConInt, "Construction interest",
             [&](int c) { return "=" + pr(c, fInterest) + "*" + time(c, kConFlag); });
  fin.across(fEquity, "Equity injection", [&](int c) {
    return "=" + pr(c, fCapex) + "+" + pr(c, fFeeSolved) + "+" + pr(c, fConInt) + "-" + pr(c, fDraw);
  });
  fin.total(fEquity);
  fin.opening(fDebtOpen, "Debt opening");
  fin.across(fDebtClose, "Debt closing",
             [&](int c) { return "=" + pr(c, fDebtOpen) + "+" + pr(c, fDraw) + "-" + pr(c, fRepay); });
  fin.across(fRepay, "Repayment", [&](int c) {
    return "=" + ab(2, fDraw) + "*Capex!" + pr(c, kDepTotal) + "/" + ab(2, fCapex);
  });
  fin.across(fInterest, "Interest", [&](int c) { return "=" + pr(c, fDebtOpen) + "*Inputs!" + ab(kFirst, kRateRow); });
  fin.opening(fScOpen, "Share capital opening");
  fin.across(fScClose, "Share capital closing",
             [&](int c) { return "=" + pr(c, fScOpen) + "+" + pr(c, fEquity) + "-" + pr(c, fRedeem); });
  fin.across(fRedeem, "Share capital redemption",
             [&](int c) { return "=" + ab(2, fEquity) + "*" + time(c, kFinalFlag); });
  fin.opening(fReOpen, "Retained earnings opening");
  fin.across(fReClose, "Retained earnings closing", [&](int c) {
    return "=" + pr(c, fReOpen) + "+" + pr(c, fProfit) + "-" + pr(c, fDividend);
  });
  fin.across(fProfit, "Profit for the period", [&](int c) { return "=PL!" + pr(c, 9); });
  fin.across(fDividend, "Dividends",
             [&](int c) { return "=MAX(0," + pr(c, fReOpen) + "+" + pr(c, fProfit) + ")"; });

  // PL ----------------------------------------------------------------------
  pl.label(1, "Profit and loss");
  pl.across(3, "Revenue", [&](int c) { return segment_sum(c, &SegmentRows::revenue, "Ops!"); });
  pl.across(4, "Operating costs", [&](int c) { return segment_sum(c, &SegmentRows::opex, "Ops!"); });
  pl.across(5, "EBITDA", [&](int c) { return "=" + pr(c, 3) + "-" + pr(c, 4); });
  pl.across(6, "Depreciation", [&](int c) { return "=Capex!" + pr(c, kDepTotal); });
  pl.across(7, "Interest", [&](int c) { return "=Fin!" + pr(c, fInterest); });
  pl.across(8, "Financing fees", [&](int c) { return "=Fin!" + pr(c, fFeeSolved); });
  pl.across(9, "Net profit",
            [&](int c) { return "=" + pr(c, 5) + "-" + pr(c, 6) + "-" + pr(c, 7) + "-" + pr(c, 8); });

  // CF ----------------------------------------------------------------------
  cf.label(1, "Cash flow");
  cf.across(3, "EBITDA", [&](int c) { return "=PL!" + pr(c, 5); });
  cf.across(4, "Capex", [&](int c) { return "=-Fin!" + pr(c, fCapex); });
  cf.across(5, "Drawdown", [&](int c) { return "=Fin!" + pr(c, fDraw); });
  cf.across(6, "Equity injection", [&](int c) { return "=Fin!" + pr(c, fEquity); });
  cf.across(7, "Financing fees", [&](int c) { return "=-Fin!" + pr(c, fFeeSolved); });
  cf.across(8, "Interest", [&](int c) { return "=-Fin!" + pr(c, fInterest); });
  cf.across(9, "Repayment", [&](int c) { return "=-Fin!" + pr(c, fRepay); });
  cf.across(10, "Share capital redemption", [&](int c) { return "=-Fin!" + pr(c, fRedeem); });
  cf.across(11, "Dividends", [&](int c) { return "=-Fin!" + pr(c, fDividend); });
  cf.across(12, "Net cash flow", [&](int c) { return "=SUM(" + pr(c, 3) + ":" + pr(c, 11) + ")"; });
  cf.opening(14, "Cash opening");
  cf.across(15, "Cash closing", [&](int c) { return "=" + pr(c, 14) + "+" + pr(c, 12); });

  // BS ----------------------------------------------------------------------
  bs.label(1, "Balance sheet");
  bs.across(3, "Fixed assets (NBV)", [&](int c) { return "=Capex!" + pr(c, kNbvTotal); });
  bs.across(4, "Cash", [&](int c) { return "=CF!" + pr(c, 15); });
  bs.across(5, "Total assets", [&](int c) { return "=" + pr(c, 3) + "+" + pr(c, 4); });
  bs.across(7, "Debt", [&](int c) { return "=Fin!" + pr(c, fDebtClose); });
  bs.across(8, "Share capital", [&](int c) { return "=Fin!" + pr(c, fScClose); });
  bs.across(9, "Retained earnings", [&](int c) { return "=Fin!" + pr(c, fReClose); });
  bs.across(10, "Total liabilities and equity", [&](int c) { return "=SUM(" + pr(c, 7) + ":" + pr(c, 9) + ")"; });

  // Cascade -----------------------------------------------------------------
  cas.label(1, "Cash cascade");
  cas.across(3, "Cash available for debt service", [&](int c) {
    return "=CF!" + pr(c, 3) + "+CF!" + pr(c, 4) + "+CF!" + pr(c, 5) + "+CF!" + pr(c, 6) + "+CF!" + pr(c, 7);
  });
  cas.across(4, "Tier 1: interest", [&](int c) { return "=Fin!" + pr(c, fInterest); });
  cas.across(5, "Tier 2: repayment", [&](int c) { return "=Fin!" + pr(c, fRepay); });
  cas.across(6, "Tier 3: distributions",
             [&](int c) { return "=Fin!" + pr(c, fRedeem) + "+Fin!" + pr(c, fDividend); });
  cas.across(7, "Residue",
             [&](int c) { return "=" + pr(c, 3) + "-" + pr(c, 4) + "-" + pr(c, 5) + "-" + pr(c, 6); });

  // Ratios ------------------------------------------------------------------
  auto service = [&](int c) { return "(Fin!" + pr(c, fRepay) + "+Fin!" + pr(c, fInterest) + ")"; };
  rat.label(1, "Ratios");
  rat.across(3, "DSCR", [&](int c) {
    return "=IF(" + service(c) + "=0,0,PL!" + pr(c, 5) + "/" + service(c) + ")";
  });
  rat.across(4, "Revenue (summary)", [&](int c) { return "=PL!" + pr(c, 3); });
  for (int k = 0; k < S; ++k) {
    SegmentRows& sr = rows[k];
    const std::string seg = "Segment " + num(k + 1);
    sr.share = 6 + 2 * k;
    rat.label(sr.share, seg + " capex share");
    rat.formula(sr.share, kFirst, "=Capex!" + ab(2, sr.capex) + "/Capex!" + ab(2, kCapTotal));
    sr.dscr = sr.share + 1;
    rat.across(sr.dscr, seg + " DSCR", [&](int c) {
      return "=IF(" + time(c, kOpsFlag) + "=0,99,Ops!" + pr(c, sr.ebitda) + "/(" + service(c) + "*" +
             ab(kFirst, sr.share) + "))";
    });
  }

  // Schema ------------------------------------------------------------------
  ModelSchema& s = fx.schema;
  s.first_column = kFirst;
  for (int c = kFirst; c <= kLast; ++c) s.periods.push_back("P" + num(c - kFirst + 1));
  auto R = [](const char* sheet, int row, int sign = 1) { return RowRef{sheet, row, sign}; };
  auto cell = [](const char* sheet, int c, int row) { return CellRef{sheet, c, row, false, false}; };

  s.balance = BalanceSpec{R("BS", 5), R("BS", 10), false};
  s.subtotals.push_back({"pl-net-profit", "Net profit", R("PL", 9),
                         {R("PL", 5), R("PL", 6, -1), R("PL", 7, -1), R("PL", 8, -1)}});
  {
    SubtotalSpec t{"cf-net-cash", "Net cash flow", R("CF", 12), {}};
    for (int r = 3; r <= 11; ++r) t.components.push_back(R("CF", r));
    s.subtotals.push_back(std::move(t));
  }
  s.subtotals.push_back({"bs-total-assets", "Total assets", R("BS", 5), {R("BS", 3), R("BS", 4)}});
  s.subtotals.push_back(
      {"bs-total-liabilities", "Total liabilities and equity", R("BS", 10), {R("BS", 7), R("BS", 8), R("BS", 9)}});
  for (int k = 0; k < S; ++k) {
    SubtotalSpec t{"ops-opex-" + num(k + 1), "Segment " + num(k + 1) + " total opex", R("Ops", rows[k].opex), {}};
    for (int r : rows[k].line_totals) t.components.push_back(R("Ops", r));
    s.subtotals.push_back(std::move(t));
  }

  s.sign_rules.push_back({R("BS", 7), SignExpectation::NonNegative, "Debt not over-repaid"});
  s.sign_rules.push_back({R("BS", 4), SignExpectation::NonNegative, "Cash not overdrawn"});
  for (int k = 0; k < S; ++k) {
    s.sign_rules.push_back({R("Capex", rows[k].nbv), SignExpectation::NonNegative,
                            "Segment " + num(k + 1) + " not over-depreciated"});
  }

  s.sources_uses = SourcesUsesSpec{{R("Fin", fDraw), R("Fin", fEquity)},
                                   {R("Fin", fCapex), R("Fin", fFeeSolved), R("Fin", fConInt)},
                                   "Construction funding"};

  s.identities.push_back({{R("BS", 4)}, {R("CF", 15)}, Reconciliation::PerPeriod, "Balance sheet cash"});
  s.identities.push_back({{R("BS", 7)},
                          {R("Fin", fDebtOpen), R("Fin", fDraw), R("Fin", fRepay, -1)},
                          Reconciliation::PerPeriod,
                          "Debt roll-forward"});
  s.identities.push_back({{R("Fin", fReClose)},
                          {R("Fin", fReOpen), R("Fin", fProfit), R("Fin", fDividend, -1)},
                          Reconciliation::PerPeriod,
                          "Retained earnings roll-forward"});
  {
    IdentitySpec id{{R("PL", 4)}, {}, Reconciliation::PerPeriod, "Operating costs agree to the schedule"};
    for (int k = 0; k < S; ++k) id.right.push_back(R("Ops", rows[k].opex));
    s.identities.push_back(std::move(id));
  }
  for (int k = 0; k < S; ++k) {
    s.identities.push_back({{R("Capex", rows[k].capex)},
                            {R("Capex", rows[k].depreciation)},
                            Reconciliation::LifeTotal,
                            "Segment " + num(k + 1) + " capex and depreciation"});
  }

  s.finite_life = true;
  s.clears_out = {R("BS", 4), R("BS", 7), R("BS", 8), R("BS", 9)};
  for (int k = 0; k < S; ++k) s.clears_out.push_back(R("Capex", rows[k].nbv));

  s.cascade = CascadeSpec{{R("Cascade", 3), R("Cascade", 4, -1), R("Cascade", 5, -1), R("Cascade", 6, -1)},
                          R("Cascade", 7),
                          R("CF", 12)};
  s.loans.push_back({"senior", R("Fin", fDraw), R("Fin", fInterest), R("Fin", fRepay), cell("Inputs", kFirst, kRateRow)});
  for (int k = 0; k < S; ++k) {
    s.physical_identities.push_back(
        {R("Ops", rows[k].produced), R("Ops", rows[k].consumed), "Segment " + num(k + 1) + " feedstock"});
  }
  s.convergence.push_back({R("Fin", fFeeSolved), R("Fin", fFeeCalc), "Agency fee"});

  s.input_rules.push_back({{cell("Inputs", kFirst, kMaturityRow)}, InputPredicate::InTimeline, 1, kPeriods,
                           "Debt maturity"});
  for (int k = 0; k < S; ++k) {
    s.input_rules.push_back({{cell("Inputs", kFirst, inputs[k].phasing), cell("Inputs", kFirst + 1, inputs[k].phasing)},
                             InputPredicate::SumsToOne,
                             0,
                             0,
                             "Segment " + num(k + 1) + " capex phasing"});
  }
  for (int k = 0; k < S; ++k) {
    s.output_thresholds.push_back({R("Ratios", rows[k].dscr), Comparator::Ge, cell("Inputs", kFirst, kMinDscrRow),
                                   "Segment " + num(k + 1) + " DSCR covenant"});
    s.output_thresholds.push_back({R("Ops", rows[k].margin), Comparator::Ge, cell("Inputs", kFirst, kMinMarginRow),
                                   "Segment " + num(k + 1) + " EBITDA margin"});
  }
  return fx;
}

}  // namespace auditkit
