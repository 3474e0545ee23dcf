#include "auditkit/eval.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>

#include "auditkit/error.hpp"
#include "auditkit/formula.hpp"
#include "auditkit/graph.hpp"

namespace auditkit {

CellValue EvalResult::value(const CellRef& ref) const {
  auto it = values.find(ref.position());
  if (it != values.end()) return it->second;
  // Slow path for a differently-cased sheet name.
  for (const auto& [key, v] : values) {
    if (key.row == ref.row && key.col == ref.col && iequals(key.sheet, ref.sheet)) return v;
  }
  return Blank{};
}

// ---------------------------------------------------------------------------
// Coercions
// ---------------------------------------------------------------------------

namespace {

using NumOrErr = std::variant<double, ErrorCode>;
using BoolOrErr = std::variant<bool, ErrorCode>;

std::optional<double> parse_number_text(const std::string& s) {
  double d = 0;
  std::size_t b = s.find_first_not_of(' ');
  std::size_t e = s.find_last_not_of(' ');
  if (b == std::string::npos) return std::nullopt;
  auto res = std::from_chars(s.data() + b, s.data() + e + 1, d);
  if (res.ec != std::errc() || res.ptr != s.data() + e + 1) return std::nullopt;
  return d;
}

NumOrErr to_number(const CellValue& v) {
  if (auto* d = std::get_if<double>(&v)) return *d;
  if (is_blank(v)) return 0.0;
  if (auto* b = std::get_if<bool>(&v)) return *b ? 1.0 : 0.0;
  if (auto* e = std::get_if<ErrorCode>(&v)) return *e;
  if (auto d = parse_number_text(std::get<std::string>(v))) return *d;
  return ErrorCode::Value;
}

BoolOrErr to_bool(const CellValue& v) {
  if (auto* b = std::get_if<bool>(&v)) return *b;
  if (auto* d = std::get_if<double>(&v)) return *d != 0.0;
  if (is_blank(v)) return false;
  if (auto* e = std::get_if<ErrorCode>(&v)) return *e;
  const auto& s = std::get<std::string>(v);
  if (iequals(s, "TRUE")) return true;
  if (iequals(s, "FALSE")) return false;
  return ErrorCode::Value;
}

std::string to_text(const CellValue& v) {
  if (auto* b = std::get_if<bool>(&v)) return *b ? "TRUE" : "FALSE";
  return display_value(v);
}

CellValue checked(double d) {
  if (!std::isfinite(d)) return ErrorCode::Value;
  return d;
}

// Type rank used for mixed comparisons: numbers < text < booleans.
int type_rank(const CellValue& v) {
  if (is_text(v)) return 1;
  if (is_bool(v)) return 2;
  return 0;
}

CellValue compare(BinaryOp op, CellValue a, CellValue b) {
  if (auto* e = std::get_if<ErrorCode>(&a)) return *e;
  if (auto* e = std::get_if<ErrorCode>(&b)) return *e;
  // A blank takes the other side's type default.
  auto blank_as = [](const CellValue& other) -> CellValue {
    if (is_text(other)) return std::string();
    if (is_bool(other)) return false;
    return 0.0;
  };
  if (is_blank(a)) a = blank_as(b);
  if (is_blank(b)) b = blank_as(a);
  int cmp = 0;
  int ra = type_rank(a), rb = type_rank(b);
  if (ra != rb) {
    cmp = ra < rb ? -1 : 1;
  } else if (ra == 0) {
    double x = std::get<double>(a), y = std::get<double>(b);
    cmp = x < y ? -1 : (x > y ? 1 : 0);
  } else if (ra == 1) {
    std::string x = to_lower(std::get<std::string>(a)), y = to_lower(std::get<std::string>(b));
    cmp = x < y ? -1 : (x > y ? 1 : 0);
  } else {
    bool x = std::get<bool>(a), y = std::get<bool>(b);
    cmp = x == y ? 0 : (x ? 1 : -1);
  }
  switch (op) {
    case BinaryOp::Eq: return cmp == 0;
    case BinaryOp::Ne: return cmp != 0;
    case BinaryOp::Lt: return cmp < 0;
    case BinaryOp::Le: return cmp <= 0;
    case BinaryOp::Gt: return cmp > 0;
    case BinaryOp::Ge: return cmp >= 0;
    default: return ErrorCode::Value;
  }
}

CellValue arithmetic(BinaryOp op, const CellValue& a, const CellValue& b) {
  if (op == BinaryOp::Concat) {
    if (auto* e = std::get_if<ErrorCode>(&a)) return *e;
    if (auto* e = std::get_if<ErrorCode>(&b)) return *e;
    return to_text(a) + to_text(b);
  }
  if (is_comparison(op)) return compare(op, a, b);
  auto x = to_number(a);
  if (auto* e = std::get_if<ErrorCode>(&x)) return *e;
  auto y = to_number(b);
  if (auto* e = std::get_if<ErrorCode>(&y)) return *e;
  double l = std::get<double>(x), r = std::get<double>(y);
  switch (op) {
    case BinaryOp::Add: return checked(l + r);
    case BinaryOp::Sub: return checked(l - r);
    case BinaryOp::Mul: return checked(l * r);
    case BinaryOp::Div:
      if (r == 0.0) return ErrorCode::Div0;
      return checked(l / r);
    case BinaryOp::Pow:
      if (l == 0.0 && r < 0.0) return ErrorCode::Div0;
      return checked(std::pow(l, r));
    default: return ErrorCode::Value;
  }
}

// Numbers fed to an aggregate. Range cells contribute numbers only; scalar
// arguments are coerced. The first error wins.
std::variant<std::vector<double>, ErrorCode> collect_numbers(std::span<const ArgValue> args) {
  std::vector<double> out;
  for (const auto& a : args) {
    if (a.is_range) {
      for (const auto& v : a.values) {
        if (auto* e = std::get_if<ErrorCode>(&v)) return *e;
        if (auto* d = std::get_if<double>(&v)) out.push_back(*d);
      }
    } else {
      const CellValue& v = a.values.front();
      if (is_blank(v)) continue;
      auto n = to_number(v);
      if (auto* e = std::get_if<ErrorCode>(&n)) return *e;
      out.push_back(std::get<double>(n));
    }
  }
  return out;
}

std::variant<std::vector<bool>, ErrorCode> collect_bools(std::span<const ArgValue> args) {
  std::vector<bool> out;
  for (const auto& a : args) {
    if (a.is_range) {
      for (const auto& v : a.values) {
        if (auto* e = std::get_if<ErrorCode>(&v)) return *e;
        if (auto* b = std::get_if<bool>(&v)) out.push_back(*b);
        if (auto* d = std::get_if<double>(&v)) out.push_back(*d != 0.0);
      }
    } else {
      const CellValue& v = a.values.front();
      if (is_blank(v)) continue;
      auto b = to_bool(v);
      if (auto* e = std::get_if<ErrorCode>(&b)) return *e;
      out.push_back(std::get<bool>(b));
    }
  }
  return out;
}

std::optional<CellValue> scalar_arg(const ArgValue& a) {
  if (a.is_range) {
    if (a.values.size() == 1) return a.values.front();
    return std::nullopt;
  }
  return a.values.front();
}

constexpr std::array<std::string_view, 12> kBuiltins = {
    "SUM", "MIN", "MAX", "ABS", "ROUND", "IF", "AND", "OR", "NOT", "COUNT", "AVERAGE", "NPV"};

}  // namespace

bool is_builtin(std::string_view name) {
  return std::any_of(kBuiltins.begin(), kBuiltins.end(),
                     [&](std::string_view b) { return iequals(b, name); });
}

double round_half_away(double value, int digits) {
  if (!std::isfinite(value)) return value;
  double scale = std::pow(10.0, digits);
  double scaled = value * scale;
  if (std::fabs(scaled) >= 1e15) return value;
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.15g", scaled);
  double cleaned = std::strtod(buf, nullptr);
  return std::round(cleaned) / scale;
}

CellValue builtin_call(std::string_view raw_name, std::span<const ArgValue> args) {
  const std::string name = to_upper(raw_name);
  if (!is_builtin(name)) return ErrorCode::Name;

  if (name == "SUM" || name == "MIN" || name == "MAX" || name == "AVERAGE") {
    if (args.empty()) return ErrorCode::Value;
    auto nums = collect_numbers(args);
    if (auto* e = std::get_if<ErrorCode>(&nums)) return *e;
    const auto& v = std::get<std::vector<double>>(nums);
    if (name == "SUM") {
      double s = 0;
      for (double d : v) s += d;
      return checked(s);
    }
    if (name == "AVERAGE") {
      if (v.empty()) return ErrorCode::Div0;
      double s = 0;
      for (double d : v) s += d;
      return checked(s / static_cast<double>(v.size()));
    }
    if (v.empty()) return 0.0;
    return name == "MIN" ? *std::min_element(v.begin(), v.end()) : *std::max_element(v.begin(), v.end());
  }
  if (name == "COUNT") {
    double n = 0;
    for (const auto& a : args) {
      for (const auto& v : a.values) {
        if (is_number(v)) {
          n += 1;
        } else if (!a.is_range && (is_bool(v) || (is_text(v) && parse_number_text(std::get<std::string>(v))))) {
          n += 1;
        }
      }
    }
    return n;
  }
  if (name == "AND" || name == "OR") {
    if (args.empty()) return ErrorCode::Value;
    auto bools = collect_bools(args);
    if (auto* e = std::get_if<ErrorCode>(&bools)) return *e;
    const auto& v = std::get<std::vector<bool>>(bools);
    if (v.empty()) return ErrorCode::Value;
    if (name == "AND") return std::all_of(v.begin(), v.end(), [](bool b) { return b; });
    return std::any_of(v.begin(), v.end(), [](bool b) { return b; });
  }
  if (name == "NOT") {
    if (args.size() != 1) return ErrorCode::Value;
    auto s = scalar_arg(args[0]);
    if (!s) return ErrorCode::Value;
    auto b = to_bool(*s);
    if (auto* e = std::get_if<ErrorCode>(&b)) return *e;
    return !std::get<bool>(b);
  }
  if (name == "IF") {
    if (args.size() < 2 || args.size() > 3) return ErrorCode::Value;
    auto s = scalar_arg(args[0]);
    if (!s) return ErrorCode::Value;
    auto b = to_bool(*s);
    if (auto* e = std::get_if<ErrorCode>(&b)) return *e;
    if (std::get<bool>(b)) return scalar_arg(args[1]).value_or(ErrorCode::Value);
    if (args.size() == 3) return scalar_arg(args[2]).value_or(ErrorCode::Value);
    return false;
  }
  if (name == "ABS" || name == "ROUND") {
    if (args.size() != (name == "ABS" ? 1u : 2u)) return ErrorCode::Value;
    auto s = scalar_arg(args[0]);
    if (!s) return ErrorCode::Value;
    auto x = to_number(*s);
    if (auto* e = std::get_if<ErrorCode>(&x)) return *e;
    if (name == "ABS") return std::fabs(std::get<double>(x));
    auto ds = scalar_arg(args[1]);
    if (!ds) return ErrorCode::Value;
    auto d = to_number(*ds);
    if (auto* e = std::get_if<ErrorCode>(&d)) return *e;
    return checked(round_half_away(std::get<double>(x), static_cast<int>(std::trunc(std::get<double>(d)))));
  }
  // NPV
  if (args.size() < 2) return ErrorCode::Value;
  auto rs = scalar_arg(args[0]);
  if (!rs) return ErrorCode::Value;
  auto rate = to_number(*rs);
  if (auto* e = std::get_if<ErrorCode>(&rate)) return *e;
  double r = std::get<double>(rate);
  if (r == -1.0) return ErrorCode::Div0;
  auto nums = collect_numbers(args.subspan(1));
  if (auto* e = std::get_if<ErrorCode>(&nums)) return *e;
  double total = 0, factor = 1;
  for (double v : std::get<std::vector<double>>(nums)) {
    factor *= 1.0 + r;
    total += v / factor;
  }
  return checked(total);
}

// ---------------------------------------------------------------------------
// Workbook evaluation
// ---------------------------------------------------------------------------

namespace {

// Reads the current value of a cell in the graph being evaluated.
struct GraphReader {
  const DependencyGraph& g;
  const std::vector<CellValue>& vals;
  CellValue operator()(std::size_t sheet, int row, int col) const {
    if (auto i = g.index_of(sheet, row, col)) return vals[*i];
    return Blank{};
  }
};

// Reads from a finished evaluation.
struct ResultReader {
  const Workbook& wb;
  const EvalResult& result;
  CellValue operator()(std::size_t sheet, int row, int col) const {
    auto it = result.values.find(CellRef{wb.sheets()[sheet].name(), col, row, false, false});
    return it == result.values.end() ? CellValue{Blank{}} : it->second;
  }
};

template <typename Reader>
class Evaluator {
 public:
  Evaluator(const Workbook& wb, Reader reader) : wb_(wb), reader_(std::move(reader)) {}

  CellValue eval_formula(const FormulaAst& f, std::size_t sheet) {
    CellValue out = eval(f.root(), sheet);
    if (is_blank(out)) return 0.0;
    return out;
  }

 private:
  std::optional<std::size_t> resolve_sheet(const std::string& name, std::size_t holder) const {
    if (name.empty()) return holder;
    return wb_.sheet_index(name);
  }

  CellValue read(std::size_t sheet, int row, int col) const { return reader_(sheet, row, col); }

  std::optional<ArgValue> read_range(const Range& r, std::size_t holder) const {
    auto sheet = resolve_sheet(r.start.sheet, holder);
    if (!sheet) return std::nullopt;
    Range n = r.normalized();
    ArgValue out;
    out.is_range = true;
    for (int row = n.start.row; row <= n.end.row; ++row) {
      for (int col = n.start.col; col <= n.end.col; ++col) out.values.push_back(read(*sheet, row, col));
    }
    return out;
  }

  ArgValue eval_arg(const Node& n, std::size_t holder) {
    if (auto* rg = std::get_if<RangeNode>(&n.v)) {
      auto r = read_range(rg->range, holder);
      return r ? *r : ArgValue::scalar(ErrorCode::Ref);
    }
    if (auto* nm = std::get_if<NameNode>(&n.v)) {
      auto it = wb_.names().find(nm->name);
      if (it == wb_.names().end()) return ArgValue::scalar(ErrorCode::Name);
      if (!it->second.is_single_cell()) {
        auto r = read_range(it->second, holder);
        return r ? *r : ArgValue::scalar(ErrorCode::Ref);
      }
    }
    return ArgValue::scalar(eval(n, holder));
  }

  CellValue eval(const Node& n, std::size_t holder) {
    if (auto* lit = std::get_if<LiteralNode>(&n.v)) return lit->value;
    if (auto* r = std::get_if<RefNode>(&n.v)) {
      auto sheet = resolve_sheet(r->ref.sheet, holder);
      if (!sheet) return ErrorCode::Ref;
      return read(*sheet, r->ref.row, r->ref.col);
    }
    if (std::holds_alternative<RangeNode>(n.v)) return ErrorCode::Value;
    if (auto* nm = std::get_if<NameNode>(&n.v)) {
      auto it = wb_.names().find(nm->name);
      if (it == wb_.names().end()) return ErrorCode::Name;
      if (!it->second.is_single_cell()) return ErrorCode::Value;
      auto sheet = wb_.sheet_index(it->second.start.sheet);
      if (!sheet) return ErrorCode::Ref;
      return read(*sheet, it->second.start.row, it->second.start.col);
    }
    if (auto* u = std::get_if<UnaryNode>(&n.v)) {
      auto x = to_number(eval(*u->child, holder));
      if (auto* e = std::get_if<ErrorCode>(&x)) return *e;
      return u->op == UnaryOp::Neg ? -std::get<double>(x) : std::get<double>(x);
    }
    if (auto* b = std::get_if<BinaryNode>(&n.v)) {
      CellValue l = eval(*b->lhs, holder);
      CellValue r = eval(*b->rhs, holder);
      return arithmetic(b->op, l, r);
    }
    const auto& c = std::get<CallNode>(n.v);
    if (c.name == "IF") {
      if (c.args.size() < 2 || c.args.size() > 3) return ErrorCode::Value;
      auto cond = to_bool(eval(*c.args[0], holder));
      if (auto* e = std::get_if<ErrorCode>(&cond)) return *e;
      if (std::get<bool>(cond)) return eval(*c.args[1], holder);
      return c.args.size() == 3 ? eval(*c.args[2], holder) : CellValue{false};
    }
    if (!is_builtin(c.name)) return ErrorCode::Name;
    std::vector<ArgValue> args;
    args.reserve(c.args.size());
    for (const auto& a : c.args) args.push_back(eval_arg(*a, holder));
    return builtin_call(c.name, args);
  }

  const Workbook& wb_;
  Reader reader_;
};

double change_between(const CellValue& a, const CellValue& b) {
  if (is_number(a) && is_number(b)) {
    double d = std::fabs(std::get<double>(a) - std::get<double>(b));
    return std::isfinite(d) ? d : std::numeric_limits<double>::infinity();
  }
  return a == b ? 0.0 : std::numeric_limits<double>::infinity();
}

}  // namespace

EvalResult evaluate(const Workbook& wb, const IterationPolicy& policy) {
  DependencyGraph g = build_graph(wb);
  std::vector<CellValue> vals(g.size());
  Evaluator<GraphReader> ev(wb, GraphReader{g, vals});
  auto eval_cell = [&](std::size_t v) -> CellValue {
    if (const FormulaAst* f = g.formula(v)) return ev.eval_formula(*f, g.sheet_of(v));
    const Cell* c = wb.cell(g.node(v));
    return c ? c->literal() : CellValue{Blank{}};
  };
  EvalResult result;

  for (const Scc& scc : topo_order(g)) {
    if (!scc.cyclic) {
      vals[scc.nodes.front()] = eval_cell(scc.nodes.front());
      continue;
    }
    for (std::size_t v : scc.nodes) vals[v] = 0.0;
    std::vector<CellValue> next(scc.nodes.size());
    bool done = false;
    double change = 0.0;
    int iter = 0;
    while (iter < std::max(1, policy.max_iterations)) {
      ++iter;
      for (std::size_t k = 0; k < scc.nodes.size(); ++k) next[k] = eval_cell(scc.nodes[k]);
      change = 0.0;
      for (std::size_t k = 0; k < scc.nodes.size(); ++k) {
        change = std::max(change, change_between(vals[scc.nodes[k]], next[k]));
        vals[scc.nodes[k]] = next[k];
      }
      if (change <= policy.tolerance) {
        done = true;
        break;
      }
    }
    result.iterations_used = std::max(result.iterations_used, iter);
    result.max_residual = std::max(result.max_residual, change);
    if (!done) {
      result.converged = false;
      for (std::size_t v : scc.nodes) vals[v] = ErrorCode::Cycle;
    }
  }

  for (std::size_t i = 0; i < g.size(); ++i) result.values.emplace(g.node(i), std::move(vals[i]));
  return result;
}

CellValue evaluate_formula(const Workbook& wb, const EvalResult& values, const CellRef& holder,
                           const FormulaAst& formula) {
  auto sheet = wb.sheet_index(holder.sheet);
  if (!sheet) throw UnknownSheet(holder.sheet);
  Evaluator<ResultReader> ev(wb, ResultReader{wb, values});
  return ev.eval_formula(formula, *sheet);
}

double npv_at(double rate, std::span<const double> flows) {
  double total = 0, factor = 1;
  for (double f : flows) {
    total += f / factor;
    factor *= 1.0 + rate;
  }
  return total;
}

double solve_irr(std::span<const double> flows) {
  bool pos = std::any_of(flows.begin(), flows.end(), [](double f) { return f > 0; });
  bool neg = std::any_of(flows.begin(), flows.end(), [](double f) { return f < 0; });
  if (!pos || !neg) throw NoRoot("cash flows need at least one positive and one negative value");

  constexpr double kStep = 1e-3;
  constexpr double kLow = -0.99;
  constexpr double kHigh = 10.0;
  auto f = [&](double r) { return npv_at(r, flows); };

  auto bisect = [&](double lo, double hi, double flo) {
    for (int i = 0; i < 200 && hi - lo > 1e-15 * (1.0 + std::fabs(lo)); ++i) {
      double mid = 0.5 * (lo + hi);
      double fm = f(mid);
      if (fm == 0.0) return mid;
      if ((fm < 0) == (flo < 0)) {
        lo = mid;
        flo = fm;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  };
  // Returns the root in [lo, hi] if NPV changes sign there.
  auto try_bracket = [&](double lo, double hi) -> std::optional<double> {
    double flo = f(lo), fhi = f(hi);
    if (flo == 0.0) return lo;
    if (fhi == 0.0) return hi;
    if ((flo < 0) != (fhi < 0)) return bisect(lo, hi, flo);
    return std::nullopt;
  };

  for (int k = 0;; ++k) {
    double up_lo = k * kStep;
    double dn_hi = -k * kStep;
    bool up_ok = up_lo < kHigh;
    bool dn_ok = dn_hi > kLow;
    if (!up_ok && !dn_ok) break;
    if (up_ok) {
      if (auto r = try_bracket(up_lo, std::min(kHigh, (k + 1) * kStep))) return *r;
    }
    if (dn_ok) {
      double lo = std::max(kLow + 1e-12, -(k + 1) * kStep);
      if (auto r = try_bracket(lo, dn_hi)) return *r;
    }
  }
  throw NoRoot("NPV does not change sign in (-0.99, 10]");
}

}  // namespace auditkit
