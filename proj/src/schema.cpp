#include "auditkit/schema.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "auditkit/error.hpp"

namespace auditkit {

using nlohmann::json;

std::optional<RowRef> parse_row_ref(std::string_view text) {
  RowRef r;
  if (!text.empty() && text.front() == '-') {
    r.sign = -1;
    text.remove_prefix(1);
  }
  auto bang = text.rfind('!');
  if (bang == std::string_view::npos || bang == 0 || bang + 1 >= text.size()) return std::nullopt;
  std::string_view sheet = text.substr(0, bang);
  if (sheet.size() >= 2 && sheet.front() == '\'' && sheet.back() == '\'') {
    sheet = sheet.substr(1, sheet.size() - 2);
  }
  std::string_view digits = text.substr(bang + 1);
  if (!digits.empty() && digits.front() == '$') digits.remove_prefix(1);
  int row = 0;
  for (char c : digits) {
    if (c < '0' || c > '9') return std::nullopt;
    row = row * 10 + (c - '0');
    if (row > kMaxRow) return std::nullopt;
  }
  if (digits.empty() || row < 1) return std::nullopt;
  r.sheet = std::string(sheet);
  r.row = row;
  return r;
}

std::string to_string(const RowRef& r) {
  std::string out = r.sign < 0 ? "-" : "";
  out += sheet_needs_quotes(r.sheet) ? quote_sheet(r.sheet) : r.sheet;
  return out + "!" + std::to_string(r.row);
}

namespace {

// Entry-scoped reader: every failure becomes a SchemaError naming `where`.
struct Reader {
  std::string where;

  [[noreturn]] void fail(const std::string& what) const { throw SchemaError(where + ": " + what); }

  const json& field(const json& j, const char* key) const {
    if (!j.is_object()) fail("expected an object");
    auto it = j.find(key);
    if (it == j.end()) fail(std::string("missing field '") + key + "'");
    return *it;
  }

  std::string text(const json& j, const char* key, const std::string& fallback = {}) const {
    if (!j.contains(key)) return fallback;
    const json& v = j.at(key);
    if (!v.is_string()) fail(std::string("field '") + key + "' must be a string");
    return v.get<std::string>();
  }

  double number(const json& j, const char* key) const {
    const json& v = field(j, key);
    if (!v.is_number()) fail(std::string("field '") + key + "' must be a number");
    return v.get<double>();
  }

  RowRef row(const json& v) const {
    if (!v.is_string()) fail("row reference must be a string like \"BS!5\"");
    auto r = parse_row_ref(v.get<std::string>());
    if (!r) fail("bad row reference '" + v.get<std::string>() + "'");
    return *r;
  }

  RowRef row(const json& j, const char* key) const { return row(field(j, key)); }

  std::vector<RowRef> rows(const json& j, const char* key) const {
    const json& v = field(j, key);
    if (!v.is_array()) fail(std::string("field '") + key + "' must be an array");
    std::vector<RowRef> out;
    for (const auto& e : v) out.push_back(row(e));
    return out;
  }

  CellRef cell(const json& v) const {
    if (!v.is_string()) fail("cell reference must be a string like \"Inputs!C8\"");
    auto c = parse_a1(v.get<std::string>());
    if (!c || c->sheet.empty()) fail("bad cell reference '" + v.get<std::string>() + "'");
    return *c;
  }

  CellRef cell(const json& j, const char* key) const { return cell(field(j, key)); }

  std::vector<CellRef> cells(const json& j, const char* key) const {
    const json& v = field(j, key);
    if (!v.is_array()) fail(std::string("field '") + key + "' must be an array");
    std::vector<CellRef> out;
    for (const auto& e : v) out.push_back(cell(e));
    return out;
  }
};

const json& array_field(const json& root, const char* key) {
  static const json empty = json::array();
  auto it = root.find(key);
  if (it == root.end()) return empty;
  if (!it->is_array()) throw SchemaError(std::string(key) + ": must be an array");
  return *it;
}

std::string entry_name(const char* section, std::size_t i, const json& e) {
  std::string name = std::string(section) + "[" + std::to_string(i) + "]";
  if (e.is_object()) {
    for (const char* key : {"id", "label"}) {
      auto it = e.find(key);
      if (it != e.end() && it->is_string()) return name + " '" + it->get<std::string>() + "'";
    }
  }
  return name;
}

}  // namespace

ModelSchema parse_schema(std::string_view json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw SchemaError(std::string("invalid JSON: ") + e.what());
  }
  if (!root.is_object()) throw SchemaError("schema: top level must be an object");

  ModelSchema s;
  {
    Reader rd{"schema_version"};
    const json& v = rd.field(root, "schema_version");
    if (!v.is_number_integer() || v.get<int>() != 1) rd.fail("only version 1 is supported");
  }
  {
    Reader rd{"timeline"};
    const json& t = rd.field(root, "timeline");
    std::string first = rd.text(t, "first_column", "C");
    s.first_column = column_index(first);
    if (s.first_column == 0) rd.fail("bad first_column '" + first + "'");
    const json& periods = rd.field(t, "periods");
    if (!periods.is_array() || periods.empty()) rd.fail("periods must be a non-empty array");
    for (const auto& p : periods) {
      if (!p.is_string()) rd.fail("period labels must be strings");
      s.periods.push_back(p.get<std::string>());
    }
    if (s.last_column() > kMaxColumn) rd.fail("timeline runs past the last column");
  }
  if (root.contains("balance")) {
    Reader rd{"balance"};
    const json& b = root.at("balance");
    BalanceSpec spec;
    spec.assets = rd.row(b, "assets");
    spec.liabilities_equity = rd.row(b, "liabilities_equity");
    if (b.contains("balancing_item")) {
      if (!b.at("balancing_item").is_boolean()) rd.fail("balancing_item must be a boolean");
      spec.balancing_item = b.at("balancing_item").get<bool>();
    }
    s.balance = spec;
  }
  const json& subtotals = array_field(root, "subtotals");
  for (std::size_t i = 0; i < subtotals.size(); ++i) {
    Reader rd{entry_name("subtotals", i, subtotals[i])};
    SubtotalSpec spec;
    spec.id = rd.text(subtotals[i], "id", "subtotal-" + std::to_string(i + 1));
    spec.label = rd.text(subtotals[i], "label", spec.id);
    spec.total = rd.row(subtotals[i], "total");
    spec.components = rd.rows(subtotals[i], "components");
    if (spec.components.empty()) rd.fail("components must not be empty");
    s.subtotals.push_back(std::move(spec));
  }
  const json& signs = array_field(root, "sign_rules");
  for (std::size_t i = 0; i < signs.size(); ++i) {
    Reader rd{entry_name("sign_rules", i, signs[i])};
    SignRule rule;
    rule.row = rd.row(signs[i], "row");
    std::string e = rd.text(signs[i], "expected");
    if (e == ">=0") {
      rule.expected = SignExpectation::NonNegative;
    } else if (e == "<=0") {
      rule.expected = SignExpectation::NonPositive;
    } else {
      rd.fail("expected must be \">=0\" or \"<=0\"");
    }
    rule.label = rd.text(signs[i], "label", to_string(rule.row));
    s.sign_rules.push_back(std::move(rule));
  }
  if (root.contains("sources_uses")) {
    Reader rd{"sources_uses"};
    const json& su = root.at("sources_uses");
    SourcesUsesSpec spec;
    spec.sources = rd.rows(su, "sources");
    spec.uses = rd.rows(su, "uses");
    spec.label = rd.text(su, "label", "Sources equal uses");
    if (spec.sources.empty() || spec.uses.empty()) rd.fail("sources and uses must not be empty");
    s.sources_uses = std::move(spec);
  }
  const json& identities = array_field(root, "identities");
  for (std::size_t i = 0; i < identities.size(); ++i) {
    Reader rd{entry_name("identities", i, identities[i])};
    IdentitySpec spec;
    spec.left = rd.rows(identities[i], "left");
    spec.right = rd.rows(identities[i], "right");
    if (spec.left.empty() || spec.right.empty()) rd.fail("left and right must not be empty");
    std::string kind = rd.text(identities[i], "kind", "per-period");
    if (kind == "per-period") {
      spec.kind = Reconciliation::PerPeriod;
    } else if (kind == "life-total") {
      spec.kind = Reconciliation::LifeTotal;
    } else {
      rd.fail("kind must be \"per-period\" or \"life-total\"");
    }
    spec.label = rd.text(identities[i], "label", "Identity " + std::to_string(i + 1));
    s.identities.push_back(std::move(spec));
  }
  if (root.contains("finite_life")) {
    if (!root.at("finite_life").is_boolean()) throw SchemaError("finite_life: must be a boolean");
    s.finite_life = root.at("finite_life").get<bool>();
  }
  if (root.contains("clears_out")) {
    Reader rd{"clears_out"};
    s.clears_out = rd.rows(root, "clears_out");
  }
  if (root.contains("cascade")) {
    Reader rd{"cascade"};
    const json& c = root.at("cascade");
    CascadeSpec spec;
    spec.tiers = rd.rows(c, "tiers");
    if (spec.tiers.empty()) rd.fail("tiers must not be empty");
    spec.residue = rd.row(c, "residue");
    spec.net_cash = rd.row(c, "net_cash");
    s.cascade = std::move(spec);
  }
  const json& loans = array_field(root, "loans");
  for (std::size_t i = 0; i < loans.size(); ++i) {
    Reader rd{entry_name("loans", i, loans[i])};
    LoanSpec spec;
    spec.id = rd.text(loans[i], "id", "loan-" + std::to_string(i + 1));
    spec.drawdown = rd.row(loans[i], "drawdown");
    spec.interest = rd.row(loans[i], "interest");
    spec.repayment = rd.row(loans[i], "repayment");
    spec.rate = rd.cell(loans[i], "rate");
    s.loans.push_back(std::move(spec));
  }
  const json& physical = array_field(root, "physical_identities");
  for (std::size_t i = 0; i < physical.size(); ++i) {
    Reader rd{entry_name("physical_identities", i, physical[i])};
    PhysicalIdentitySpec spec;
    spec.producer = rd.row(physical[i], "producer");
    spec.consumer = rd.row(physical[i], "consumer");
    spec.label = rd.text(physical[i], "label", "Physical identity " + std::to_string(i + 1));
    s.physical_identities.push_back(std::move(spec));
  }
  const json& convergence = array_field(root, "convergence");
  for (std::size_t i = 0; i < convergence.size(); ++i) {
    Reader rd{entry_name("convergence", i, convergence[i])};
    ConvergenceSpec spec;
    spec.solved = rd.row(convergence[i], "solved");
    spec.calculated = rd.row(convergence[i], "calculated");
    spec.label = rd.text(convergence[i], "label", "Iteration converged");
    s.convergence.push_back(std::move(spec));
  }
  const json& inputs = array_field(root, "input_rules");
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    Reader rd{entry_name("input_rules", i, inputs[i])};
    InputRule rule;
    rule.cells = rd.cells(inputs[i], "cells");
    if (rule.cells.empty()) rd.fail("cells must not be empty");
    std::string p = rd.text(inputs[i], "predicate");
    if (p == "range") {
      rule.predicate = InputPredicate::Range;
      rule.min = rd.number(inputs[i], "min");
      rule.max = rd.number(inputs[i], "max");
      if (rule.min > rule.max) rd.fail("min exceeds max");
    } else if (p == "in-timeline") {
      rule.predicate = InputPredicate::InTimeline;
      rule.min = 1;
      rule.max = s.period_count();
    } else if (p == "sums-to-one") {
      rule.predicate = InputPredicate::SumsToOne;
    } else {
      rd.fail("predicate must be \"range\", \"in-timeline\" or \"sums-to-one\"");
    }
    rule.label = rd.text(inputs[i], "label", "Input rule " + std::to_string(i + 1));
    s.input_rules.push_back(std::move(rule));
  }
  const json& outputs = array_field(root, "output_thresholds");
  for (std::size_t i = 0; i < outputs.size(); ++i) {
    Reader rd{entry_name("output_thresholds", i, outputs[i])};
    OutputThreshold t;
    t.row = rd.row(outputs[i], "row");
    std::string c = rd.text(outputs[i], "comparator", ">=");
    if (c == ">=") {
      t.comparator = Comparator::Ge;
    } else if (c == "<=") {
      t.comparator = Comparator::Le;
    } else {
      rd.fail("comparator must be \">=\" or \"<=\"");
    }
    t.threshold = rd.cell(outputs[i], "threshold");
    t.label = rd.text(outputs[i], "label", "Output threshold " + std::to_string(i + 1));
    if (outputs[i].contains("kind") && rd.text(outputs[i], "kind") != "optimisation") {
      rd.fail("output thresholds are optimisation checks");
    }
    s.output_thresholds.push_back(std::move(t));
  }
  const json& external = array_field(root, "external_checks");
  for (std::size_t i = 0; i < external.size(); ++i) {
    Reader rd{entry_name("external_checks", i, external[i])};
    ExternalCheck e;
    const json& cat = rd.field(external[i], "category");
    if (!cat.is_number_integer() || (cat.get<int>() != 8 && cat.get<int>() != 9)) {
      rd.fail("category must be 8 or 9");
    }
    e.category = cat.get<int>();
    e.cells = rd.cells(external[i], "cells");
    if (e.cells.empty()) rd.fail("cells must not be empty");
    e.label = rd.text(external[i], "label", "External check " + std::to_string(i + 1));
    s.external_checks.push_back(std::move(e));
  }
  const json& other = array_field(root, "other_checks");
  for (std::size_t i = 0; i < other.size(); ++i) {
    Reader rd{entry_name("other_checks", i, other[i])};
    OtherCheck o;
    o.cell = rd.cell(other[i], "cell");
    o.expected = rd.number(other[i], "expected");
    o.tolerance = rd.number(other[i], "tolerance");
    if (o.tolerance < 0) rd.fail("tolerance must not be negative");
    o.label = rd.text(other[i], "label", "Reasonableness " + std::to_string(i + 1));
    s.other_checks.push_back(std::move(o));
  }
  return s;
}

ModelSchema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot read schema file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_schema(buf.str());
}

std::string write_schema(const ModelSchema& s) {
  auto rows = [](const std::vector<RowRef>& v) {
    json a = json::array();
    for (const auto& r : v) a.push_back(to_string(r));
    return a;
  };
  auto cells = [](const std::vector<CellRef>& v) {
    json a = json::array();
    for (const auto& c : v) a.push_back(to_a1(c));
    return a;
  };
  json root;
  root["schema_version"] = 1;
  root["timeline"] = {{"first_column", column_letters(s.first_column)}, {"periods", s.periods}};
  if (s.balance) {
    root["balance"] = {{"assets", to_string(s.balance->assets)},
                       {"liabilities_equity", to_string(s.balance->liabilities_equity)},
                       {"balancing_item", s.balance->balancing_item}};
  }
  for (const auto& t : s.subtotals) {
    root["subtotals"].push_back(
        {{"id", t.id}, {"label", t.label}, {"total", to_string(t.total)}, {"components", rows(t.components)}});
  }
  for (const auto& r : s.sign_rules) {
    root["sign_rules"].push_back({{"row", to_string(r.row)},
                                  {"expected", r.expected == SignExpectation::NonNegative ? ">=0" : "<=0"},
                                  {"label", r.label}});
  }
  if (s.sources_uses) {
    root["sources_uses"] = {{"sources", rows(s.sources_uses->sources)},
                            {"uses", rows(s.sources_uses->uses)},
                            {"label", s.sources_uses->label}};
  }
  for (const auto& i : s.identities) {
    root["identities"].push_back({{"left", rows(i.left)},
                                  {"right", rows(i.right)},
                                  {"kind", i.kind == Reconciliation::PerPeriod ? "per-period" : "life-total"},
                                  {"label", i.label}});
  }
  root["finite_life"] = s.finite_life;
  if (!s.clears_out.empty()) root["clears_out"] = rows(s.clears_out);
  if (s.cascade) {
    root["cascade"] = {{"tiers", rows(s.cascade->tiers)},
                       {"residue", to_string(s.cascade->residue)},
                       {"net_cash", to_string(s.cascade->net_cash)}};
  }
  for (const auto& l : s.loans) {
    root["loans"].push_back({{"id", l.id},
                             {"drawdown", to_string(l.drawdown)},
                             {"interest", to_string(l.interest)},
                             {"repayment", to_string(l.repayment)},
                             {"rate", to_a1(l.rate)}});
  }
  for (const auto& p : s.physical_identities) {
    root["physical_identities"].push_back(
        {{"producer", to_string(p.producer)}, {"consumer", to_string(p.consumer)}, {"label", p.label}});
  }
  for (const auto& c : s.convergence) {
    root["convergence"].push_back(
        {{"solved", to_string(c.solved)}, {"calculated", to_string(c.calculated)}, {"label", c.label}});
  }
  for (const auto& r : s.input_rules) {
    json e = {{"cells", cells(r.cells)}, {"label", r.label}};
    switch (r.predicate) {
      case InputPredicate::Range:
        e["predicate"] = "range";
        e["min"] = r.min;
        e["max"] = r.max;
        break;
      case InputPredicate::InTimeline: e["predicate"] = "in-timeline"; break;
      case InputPredicate::SumsToOne: e["predicate"] = "sums-to-one"; break;
    }
    root["input_rules"].push_back(std::move(e));
  }
  for (const auto& t : s.output_thresholds) {
    root["output_thresholds"].push_back({{"row", to_string(t.row)},
                                         {"comparator", t.comparator == Comparator::Ge ? ">=" : "<="},
                                         {"threshold", to_a1(t.threshold)},
                                         {"label", t.label},
                                         {"kind", "optimisation"}});
  }
  for (const auto& e : s.external_checks) {
    root["external_checks"].push_back({{"category", e.category}, {"cells", cells(e.cells)}, {"label", e.label}});
  }
  for (const auto& o : s.other_checks) {
    root["other_checks"].push_back(
        {{"cell", to_a1(o.cell)}, {"expected", o.expected}, {"tolerance", o.tolerance}, {"label", o.label}});
  }
  return root.dump(2) + "\n";
}

namespace {

struct Validator {
  const Workbook& wb;
  const ModelSchema& s;

  const Sheet& sheet(const std::string& where, const std::string& name) const {
    const Sheet* sh = wb.sheet(name);
    if (!sh) throw SchemaError(where + ": unknown sheet '" + name + "'");
    return *sh;
  }

  void row(const std::string& where, const RowRef& r) const {
    const Sheet& sh = sheet(where, r.sheet);
    auto it = sh.cells().lower_bound({r.row, 0});
    if (it == sh.cells().end() || it->first.first != r.row) {
      throw SchemaError(where + ": row " + to_string(r) + " is empty");
    }
  }

  void rows(const std::string& where, const std::vector<RowRef>& v) const {
    for (const auto& r : v) row(where, r);
  }

  const Cell& cell(const std::string& where, const CellRef& c) const {
    const Sheet& sh = sheet(where, c.sheet);
    const Cell* found = sh.find(c.row, c.col);
    if (!found) throw SchemaError(where + ": cell " + to_a1(c) + " is empty");
    return *found;
  }
};

}  // namespace

void validate_schema(const Workbook& wb, const ModelSchema& s) {
  Validator v{wb, s};
  if (s.balance) {
    v.row("balance", s.balance->assets);
    v.row("balance", s.balance->liabilities_equity);
  }
  for (std::size_t i = 0; i < s.subtotals.size(); ++i) {
    std::string where = "subtotals[" + std::to_string(i) + "] '" + s.subtotals[i].id + "'";
    v.row(where, s.subtotals[i].total);
    v.rows(where, s.subtotals[i].components);
  }
  for (std::size_t i = 0; i < s.sign_rules.size(); ++i) {
    v.row("sign_rules[" + std::to_string(i) + "]", s.sign_rules[i].row);
  }
  if (s.sources_uses) {
    v.rows("sources_uses", s.sources_uses->sources);
    v.rows("sources_uses", s.sources_uses->uses);
  }
  for (std::size_t i = 0; i < s.identities.size(); ++i) {
    std::string where = "identities[" + std::to_string(i) + "]";
    v.rows(where, s.identities[i].left);
    v.rows(where, s.identities[i].right);
  }
  v.rows("clears_out", s.clears_out);
  if (s.cascade) {
    v.rows("cascade", s.cascade->tiers);
    v.row("cascade", s.cascade->residue);
    v.row("cascade", s.cascade->net_cash);
  }
  for (std::size_t i = 0; i < s.loans.size(); ++i) {
    const LoanSpec& l = s.loans[i];
    std::string where = "loans[" + std::to_string(i) + "] '" + l.id + "'";
    v.row(where, l.drawdown);
    v.row(where, l.interest);
    v.row(where, l.repayment);
    const Cell& rate = v.cell(where, l.rate);
    if (!rate.is_formula() && !is_number(rate.literal())) {
      throw SchemaError(where + ": rate cell " + to_a1(l.rate) + " does not hold a number");
    }
  }
  for (std::size_t i = 0; i < s.physical_identities.size(); ++i) {
    std::string where = "physical_identities[" + std::to_string(i) + "]";
    v.row(where, s.physical_identities[i].producer);
    v.row(where, s.physical_identities[i].consumer);
  }
  for (std::size_t i = 0; i < s.convergence.size(); ++i) {
    std::string where = "convergence[" + std::to_string(i) + "]";
    v.row(where, s.convergence[i].solved);
    v.row(where, s.convergence[i].calculated);
  }
  for (std::size_t i = 0; i < s.input_rules.size(); ++i) {
    for (const auto& c : s.input_rules[i].cells) v.cell("input_rules[" + std::to_string(i) + "]", c);
  }
  for (std::size_t i = 0; i < s.output_thresholds.size(); ++i) {
    std::string where = "output_thresholds[" + std::to_string(i) + "]";
    v.row(where, s.output_thresholds[i].row);
    v.cell(where, s.output_thresholds[i].threshold);
  }
  for (std::size_t i = 0; i < s.external_checks.size(); ++i) {
    for (const auto& c : s.external_checks[i].cells) v.cell("external_checks[" + std::to_string(i) + "]", c);
  }
  for (std::size_t i = 0; i < s.other_checks.size(); ++i) {
    v.cell("other_checks[" + std::to_string(i) + "]", s.other_checks[i].cell);
  }
}

}  // namespace auditkit
