#include "auditkit/cell.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

namespace auditkit {

std::string_view error_text(ErrorCode code) {
  switch (code) {
    case ErrorCode::Div0: return "#DIV/0!";
    case ErrorCode::Value: return "#VALUE!";
    case ErrorCode::Ref: return "#REF!";
    case ErrorCode::Name: return "#NAME?";
    case ErrorCode::Cycle: return "#CYCLE!";
  }
  return "#VALUE!";
}

std::optional<ErrorCode> parse_error_code(std::string_view text) {
  for (auto code : {ErrorCode::Div0, ErrorCode::Value, ErrorCode::Ref, ErrorCode::Name,
                    ErrorCode::Cycle}) {
    if (iequals(text, error_text(code))) return code;
  }
  return std::nullopt;
}

std::string format_number(double value) {
  if (value == 0.0) return "0";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string display_value(const CellValue& v) {
  struct Visitor {
    std::string operator()(Blank) const { return ""; }
    std::string operator()(double d) const { return format_number(d); }
    std::string operator()(bool b) const { return b ? "TRUE" : "FALSE"; }
    std::string operator()(const std::string& s) const { return s; }
    std::string operator()(ErrorCode e) const { return std::string(error_text(e)); }
  };
  return std::visit(Visitor{}, v);
}

std::string column_letters(int col) {
  std::string out;
  while (col > 0) {
    int rem = (col - 1) % 26;
    out.insert(out.begin(), static_cast<char>('A' + rem));
    col = (col - 1) / 26;
  }
  return out;
}

int column_index(std::string_view letters) {
  if (letters.empty() || letters.size() > 3) return 0;
  int col = 0;
  for (char ch : letters) {
    if (!std::isalpha(static_cast<unsigned char>(ch))) return 0;
    col = col * 26 + (std::toupper(static_cast<unsigned char>(ch)) - 'A' + 1);
  }
  return col <= kMaxColumn ? col : 0;
}

Range Range::normalized() const {
  Range r = *this;
  if (r.start.col > r.end.col) {
    std::swap(r.start.col, r.end.col);
    std::swap(r.start.col_absolute, r.end.col_absolute);
  }
  if (r.start.row > r.end.row) {
    std::swap(r.start.row, r.end.row);
    std::swap(r.start.row_absolute, r.end.row_absolute);
  }
  return r;
}

bool Range::contains(int row, int col) const {
  Range n = normalized();
  return row >= n.start.row && row <= n.end.row && col >= n.start.col && col <= n.end.col;
}

bool sheet_needs_quotes(std::string_view name) {
  if (name.empty()) return true;
  auto first = static_cast<unsigned char>(name.front());
  if (!std::isalpha(first) && first != '_') return true;
  for (char ch : name) {
    auto c = static_cast<unsigned char>(ch);
    if (!std::isalnum(c) && c != '_' && c != '.') return true;
  }
  // A bare name that reads like a cell address ("AB12") would be ambiguous.
  std::size_t i = 0;
  while (i < name.size() && std::isalpha(static_cast<unsigned char>(name[i]))) ++i;
  if (i > 0 && i < name.size() &&
      std::all_of(name.begin() + i, name.end(),
                  [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }) &&
      column_index(name.substr(0, i)) != 0) {
    return true;
  }
  return iequals(name, "TRUE") || iequals(name, "FALSE");
}

std::string quote_sheet(std::string_view name) {
  if (!sheet_needs_quotes(name)) return std::string(name);
  std::string out = "'";
  for (char ch : name) {
    out += ch;
    if (ch == '\'') out += '\'';
  }
  out += "'";
  return out;
}

std::string to_a1(const CellRef& ref, bool with_sheet) {
  std::string out;
  if (with_sheet && !ref.sheet.empty()) out = quote_sheet(ref.sheet) + "!";
  if (ref.col_absolute) out += '$';
  out += column_letters(ref.col);
  if (ref.row_absolute) out += '$';
  out += std::to_string(ref.row);
  return out;
}

std::string to_a1(const Range& range, bool with_sheet) {
  return to_a1(range.start, with_sheet) + ":" + to_a1(range.end, false);
}

namespace {

// Splits an optional sheet prefix off `text`. Returns false on a malformed
// quoted prefix.
bool split_sheet(std::string_view text, std::string& sheet, std::string_view& rest) {
  sheet.clear();
  rest = text;
  if (!text.empty() && text.front() == '\'') {
    std::size_t i = 1;
    while (i < text.size()) {
      if (text[i] == '\'') {
        if (i + 1 < text.size() && text[i + 1] == '\'') {
          sheet += '\'';
          i += 2;
          continue;
        }
        break;
      }
      sheet += text[i++];
    }
    if (i >= text.size() || i + 1 >= text.size() || text[i + 1] != '!') return false;
    rest = text.substr(i + 2);
    return true;
  }
  auto bang = text.rfind('!');
  if (bang != std::string_view::npos) {
    sheet = std::string(text.substr(0, bang));
    rest = text.substr(bang + 1);
    if (sheet.empty()) return false;
  }
  return true;
}

std::optional<CellRef> parse_bare_a1(std::string_view s) {
  CellRef ref;
  std::size_t i = 0;
  if (i < s.size() && s[i] == '$') {
    ref.col_absolute = true;
    ++i;
  }
  std::size_t letters_start = i;
  while (i < s.size() && std::isalpha(static_cast<unsigned char>(s[i]))) ++i;
  int col = column_index(s.substr(letters_start, i - letters_start));
  if (col == 0) return std::nullopt;
  if (i < s.size() && s[i] == '$') {
    ref.row_absolute = true;
    ++i;
  }
  std::size_t digits_start = i;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  if (i != s.size() || i == digits_start || i - digits_start > 7) return std::nullopt;
  int row = 0;
  std::from_chars(s.data() + digits_start, s.data() + i, row);
  if (row < 1 || row > kMaxRow) return std::nullopt;
  ref.col = col;
  ref.row = row;
  return ref;
}

}  // namespace

std::optional<CellRef> parse_a1(std::string_view text) {
  std::string sheet;
  std::string_view rest;
  if (!split_sheet(text, sheet, rest)) return std::nullopt;
  auto ref = parse_bare_a1(rest);
  if (!ref) return std::nullopt;
  ref->sheet = std::move(sheet);
  return ref;
}

std::optional<Range> parse_range(std::string_view text) {
  std::string sheet;
  std::string_view rest;
  if (!split_sheet(text, sheet, rest)) return std::nullopt;
  auto colon = rest.find(':');
  if (colon == std::string_view::npos) {
    auto ref = parse_bare_a1(rest);
    if (!ref) return std::nullopt;
    ref->sheet = sheet;
    return Range{*ref, *ref};
  }
  auto a = parse_bare_a1(rest.substr(0, colon));
  auto b = parse_bare_a1(rest.substr(colon + 1));
  if (!a || !b) return std::nullopt;
  a->sheet = sheet;
  b->sheet = sheet;
  return Range{*a, *b};
}

std::string to_upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

std::string to_lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

bool CaseInsensitiveLess::operator()(std::string_view a, std::string_view b) const {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end(), [](char x, char y) {
    return std::tolower(static_cast<unsigned char>(x)) < std::tolower(static_cast<unsigned char>(y));
  });
}

}  // namespace auditkit
