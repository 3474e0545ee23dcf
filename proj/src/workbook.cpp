#include "auditkit/workbook.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include "auditkit/error.hpp"
#include "auditkit/formula.hpp"

namespace auditkit {

// ---------------------------------------------------------------------------
// Sheet / Workbook
// ---------------------------------------------------------------------------

const Cell* Sheet::find(int row, int col) const {
  auto it = cells_.find({row, col});
  return it == cells_.end() ? nullptr : &it->second;
}

void Sheet::set(int row, int col, CellContent content, std::optional<std::string> label) {
  Cell cell{CellRef{name_, col, row, false, false}, std::move(content), std::move(label)};
  cells_.insert_or_assign(Key{row, col}, std::move(cell));
}

std::optional<std::string> Sheet::label_for(int row, int col) const {
  if (const Cell* c = find(row, col); c && c->label) return c->label;
  auto it = cells_.lower_bound({row, col});
  while (it != cells_.begin()) {
    --it;
    if (it->first.first != row) break;
    const Cell& c = it->second;
    if (!c.is_formula() && is_text(c.literal())) return std::get<std::string>(c.literal());
  }
  return std::nullopt;
}

int Sheet::max_column() const {
  int m = 0;
  for (const auto& [key, cell] : cells_) m = std::max(m, key.second);
  return m;
}

Sheet& Workbook::add_sheet(const std::string& name) {
  if (sheet_index(name)) throw SheetExists("sheet already exists: " + name);
  sheets_.emplace_back(name);
  return sheets_.back();
}

std::optional<std::size_t> Workbook::sheet_index(std::string_view name) const {
  for (std::size_t i = 0; i < sheets_.size(); ++i) {
    if (iequals(sheets_[i].name(), name)) return i;
  }
  return std::nullopt;
}

const Sheet* Workbook::sheet(std::string_view name) const {
  auto i = sheet_index(name);
  return i ? &sheets_[*i] : nullptr;
}

Sheet* Workbook::sheet(std::string_view name) {
  auto i = sheet_index(name);
  return i ? &sheets_[*i] : nullptr;
}

const Cell* Workbook::cell(const CellRef& ref) const {
  const Sheet* s = sheet(ref.sheet);
  return s ? s->find(ref.row, ref.col) : nullptr;
}

void Workbook::set_cell(const CellRef& ref, CellContent content, std::optional<std::string> label) {
  Sheet* s = sheet(ref.sheet);
  if (!s) throw UnknownSheet("unknown sheet: " + ref.sheet);
  s->set(ref.row, ref.col, std::move(content), std::move(label));
}

void Workbook::add_name(const std::string& name, Range target) {
  const Sheet* s = sheet(target.start.sheet);
  if (!s) throw UnknownSheet("named range " + name + " targets unknown sheet '" + target.start.sheet + "'");
  target.start.sheet = s->name();
  target.end.sheet = s->name();
  names_.insert_or_assign(name, target);
}

std::size_t Workbook::formula_count() const {
  std::size_t n = 0;
  for (const auto& s : sheets_) {
    for (const auto& [key, c] : s.cells()) n += c.is_formula() ? 1 : 0;
  }
  return n;
}

// ---------------------------------------------------------------------------
// Interchange format
// ---------------------------------------------------------------------------

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool starts_with_keyword(std::string_view line, std::string_view kw) {
  return line.size() > kw.size() && line.substr(0, kw.size()) == kw &&
         std::isspace(static_cast<unsigned char>(line[kw.size()]));
}

std::string quote_text(std::string_view s) {
  std::string out = "\"";
  for (char c : s) {
    out += c;
    if (c == '"') out += '"';
  }
  out += '"';
  return out;
}

// Reads a double-quoted string starting at s[pos]; advances pos past it.
std::optional<std::string> read_quoted(std::string_view s, std::size_t& pos) {
  if (pos >= s.size() || s[pos] != '"') return std::nullopt;
  std::string out;
  std::size_t i = pos + 1;
  while (i < s.size()) {
    if (s[i] == '"') {
      if (i + 1 < s.size() && s[i + 1] == '"') {
        out += '"';
        i += 2;
        continue;
      }
      pos = i + 1;
      return out;
    }
    out += s[i++];
  }
  return std::nullopt;
}

std::optional<CellValue> parse_literal(std::string_view text) {
  if (text.empty()) return std::nullopt;
  if (text.front() == '"') {
    std::size_t pos = 0;
    auto s = read_quoted(text, pos);
    if (!s || pos != text.size()) return std::nullopt;
    return CellValue{*s};
  }
  if (iequals(text, "TRUE")) return CellValue{true};
  if (iequals(text, "FALSE")) return CellValue{false};
  if (auto e = parse_error_code(text)) return CellValue{*e};
  double d = 0;
  const char* first = text.data();
  if (*first == '+') ++first;
  auto res = std::from_chars(first, text.data() + text.size(), d);
  if (res.ec == std::errc() && res.ptr == text.data() + text.size()) return CellValue{d};
  return std::nullopt;
}

// Splits "<content> label="..."" into content and optional label. Formula
// content is scanned so that string literals and quoted sheet names are
// skipped.
std::pair<std::string_view, std::optional<std::string>> split_label(std::string_view rhs,
                                                                    std::size_t line_no) {
  constexpr std::string_view kLabel = "label=\"";
  bool in_string = false;
  bool in_sheet = false;
  std::size_t i = 0;
  if (!rhs.empty() && rhs.front() == '"') {
    std::size_t pos = 0;
    if (!read_quoted(rhs, pos)) throw ParseError(line_no, "unterminated text literal");
    i = pos;
  }
  for (; i < rhs.size(); ++i) {
    char c = rhs[i];
    if (in_string) {
      if (c == '"') in_string = false;  // a doubled quote re-enters on the next char
      continue;
    }
    if (in_sheet) {
      if (c == '\'') in_sheet = false;
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '\'') {
      in_sheet = true;
    } else if (std::isspace(static_cast<unsigned char>(c))) {
      std::string_view tail = trim(rhs.substr(i));
      if (tail.substr(0, kLabel.size()) == kLabel) {
        std::size_t pos = kLabel.size() - 1;
        auto label = read_quoted(tail, pos);
        if (!label || trim(tail.substr(pos)).size() != 0) {
          throw ParseError(line_no, "malformed label attribute");
        }
        return {trim(rhs.substr(0, i)), std::move(label)};
      }
    }
  }
  return {rhs, std::nullopt};
}

}  // namespace

std::string literal_text(const CellValue& v) {
  if (is_text(v)) return quote_text(std::get<std::string>(v));
  return display_value(v);
}

Workbook parse_workbook(std::string_view text) {
  Workbook wb;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = trim(text.substr(start, end - start));
    ++line_no;
    start = end + 1;

    if (line.empty() || line.front() == '#') {
      if (end == text.size()) break;
      continue;
    }

    if (starts_with_keyword(line, "sheet")) {
      std::string name(trim(line.substr(5)));
      if (name.size() >= 2 && name.front() == '\'' && name.back() == '\'') {
        name = name.substr(1, name.size() - 2);
      }
      if (name.empty()) throw ParseError(line_no, "sheet name missing");
      if (wb.sheet_index(name)) throw ParseError(line_no, "duplicate sheet '" + name + "'");
      wb.add_sheet(name);
    } else if (starts_with_keyword(line, "name")) {
      std::string_view rest = trim(line.substr(4));
      auto eq = rest.find('=');
      if (eq == std::string_view::npos) throw ParseError(line_no, "expected '=' in name declaration");
      std::string name(trim(rest.substr(0, eq)));
      auto target = parse_range(trim(rest.substr(eq + 1)));
      if (name.empty() || !target || target->start.sheet.empty()) {
        throw ParseError(line_no, "malformed named range");
      }
      if (!wb.sheet(target->start.sheet)) {
        throw UnknownSheet("line " + std::to_string(line_no) + ": named range " + name +
                           " targets unknown sheet '" + target->start.sheet + "'");
      }
      wb.add_name(name, target->normalized());
    } else {
      // Address ends at the first '=' outside a quoted sheet name.
      std::size_t i = 0;
      if (line.front() == '\'') {
        i = 1;
        while (i < line.size()) {
          if (line[i] == '\'' && i + 1 < line.size() && line[i + 1] == '\'') {
            i += 2;
          } else if (line[i] == '\'') {
            break;
          } else {
            ++i;
          }
        }
      }
      auto eq = line.find('=', i);
      if (eq == std::string_view::npos) throw ParseError(line_no, "expected '<Sheet>!<cell> = <value>'");
      auto ref = parse_a1(trim(line.substr(0, eq)));
      if (!ref || ref->sheet.empty()) throw ParseError(line_no, "malformed cell address");
      Sheet* sheet = wb.sheet(ref->sheet);
      if (!sheet) throw ParseError(line_no, "cell on undeclared sheet '" + ref->sheet + "'");
      if (sheet->find(ref->row, ref->col)) {
        throw DuplicateCell("line " + std::to_string(line_no) + ": duplicate cell " +
                            to_a1(ref->position().with_sheet(sheet->name())));
      }
      auto [content, label] = split_label(trim(line.substr(eq + 1)), line_no);
      if (content.empty()) throw ParseError(line_no, "missing cell content");
      if (content.front() == '=') {
        sheet->set(ref->row, ref->col, Formula{std::string(content)}, std::move(label));
      } else {
        auto lit = parse_literal(content);
        if (!lit) throw ParseError(line_no, "malformed literal '" + std::string(content) + "'");
        sheet->set(ref->row, ref->col, std::move(*lit), std::move(label));
      }
    }
    if (end == text.size()) break;
  }
  return wb;
}

Workbook load_workbook(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_workbook(buf.str());
}

std::string write_workbook(const Workbook& wb) {
  std::ostringstream out;
  for (const auto& sheet : wb.sheets()) {
    out << "sheet " << sheet.name() << "\n";
    for (const auto& [key, cell] : sheet.cells()) {
      out << to_a1(cell.ref) << " = ";
      if (cell.is_formula()) {
        out << cell.formula();
      } else {
        out << literal_text(cell.literal());
      }
      if (cell.label) out << " label=" << quote_text(*cell.label);
      out << "\n";
    }
  }
  for (const auto& [name, range] : wb.names()) {
    out << "name " << name << " = "
        << (range.is_single_cell() ? to_a1(range.start) : to_a1(range)) << "\n";
  }
  return out.str();
}

void save_workbook(const Workbook& wb, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << write_workbook(wb);
  if (!out) throw Error("write failed: " + path.string());
}

namespace {

std::string canonical_formula(const std::string& src) {
  try {
    return print_formula(parse_formula(src));
  } catch (const SyntaxError&) {
    return src;
  }
}

}  // namespace

bool structurally_equal(const Workbook& a, const Workbook& b) {
  if (a.sheets().size() != b.sheets().size()) return false;
  for (std::size_t i = 0; i < a.sheets().size(); ++i) {
    const Sheet& sa = a.sheets()[i];
    const Sheet& sb = b.sheets()[i];
    if (sa.name() != sb.name() || sa.cells().size() != sb.cells().size()) return false;
    auto ia = sa.cells().begin();
    auto ib = sb.cells().begin();
    for (; ia != sa.cells().end(); ++ia, ++ib) {
      if (ia->first != ib->first || ia->second.label != ib->second.label) return false;
      const Cell& ca = ia->second;
      const Cell& cb = ib->second;
      if (ca.is_formula() != cb.is_formula()) return false;
      if (ca.is_formula()) {
        if (canonical_formula(ca.formula()) != canonical_formula(cb.formula())) return false;
      } else if (ca.literal() != cb.literal()) {
        return false;
      }
    }
  }
  return a.names() == b.names();
}

}  // namespace auditkit
