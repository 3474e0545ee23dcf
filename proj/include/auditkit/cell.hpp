#pragma once

#include <compare>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace auditkit {

// ---------------------------------------------------------------------------
// Values
// ---------------------------------------------------------------------------

enum class ErrorCode { Div0, Value, Ref, Name, Cycle };

struct Blank {
  bool operator==(const Blank&) const = default;
};

/// A cell value: blank, number, boolean, text or error.
using CellValue = std::variant<Blank, double, bool, std::string, ErrorCode>;

std::string_view error_text(ErrorCode code);
std::optional<ErrorCode> parse_error_code(std::string_view text);

inline bool is_blank(const CellValue& v) { return std::holds_alternative<Blank>(v); }
inline bool is_number(const CellValue& v) { return std::holds_alternative<double>(v); }
inline bool is_bool(const CellValue& v) { return std::holds_alternative<bool>(v); }
inline bool is_text(const CellValue& v) { return std::holds_alternative<std::string>(v); }
inline bool is_error(const CellValue& v) { return std::holds_alternative<ErrorCode>(v); }

/// Shortest decimal text that parses back to the same double.
std::string format_number(double value);

/// Display form: numbers via format_number, TRUE/FALSE, text verbatim,
/// error codes, empty string for blank.
std::string display_value(const CellValue& v);

// ---------------------------------------------------------------------------
// Addresses
// ---------------------------------------------------------------------------

/// 1-based column index to letters ("A", "Z", "AA", ...).
std::string column_letters(int col);
/// Letters to 1-based column index; 0 when `letters` is not a column name.
int column_index(std::string_view letters);

inline constexpr int kMaxColumn = 16384;
inline constexpr int kMaxRow = 1048576;

/// A cell address. An empty `sheet` means "the sheet holding the formula".
struct CellRef {
  std::string sheet;
  int col = 1;
  int row = 1;
  bool col_absolute = false;
  bool row_absolute = false;

  /// Same address with the absolute markers cleared.
  CellRef position() const { return CellRef{sheet, col, row, false, false}; }
  CellRef with_sheet(std::string s) const {
    CellRef r = *this;
    r.sheet = std::move(s);
    return r;
  }

  bool operator==(const CellRef&) const = default;
  std::strong_ordering operator<=>(const CellRef& o) const {
    if (auto c = sheet <=> o.sheet; c != 0) return c;
    if (auto c = row <=> o.row; c != 0) return c;
    if (auto c = col <=> o.col; c != 0) return c;
    if (auto c = col_absolute <=> o.col_absolute; c != 0) return c;
    return row_absolute <=> o.row_absolute;
  }
};

struct Range {
  CellRef start;
  CellRef end;

  /// Orders corners so that start is top-left; keeps each corner's markers.
  Range normalized() const;
  bool is_single_cell() const { return start.row == end.row && start.col == end.col; }
  bool contains(int row, int col) const;

  bool operator==(const Range&) const = default;
};

/// True when `name` must be quoted ('My Sheet') in a reference.
bool sheet_needs_quotes(std::string_view name);
std::string quote_sheet(std::string_view name);

/// Renders "Sheet!$B$3" (sheet omitted when empty or `with_sheet` is false).
std::string to_a1(const CellRef& ref, bool with_sheet = true);
std::string to_a1(const Range& range, bool with_sheet = true);

/// Parses an A1 reference with optional sheet prefix and `$` markers.
/// Returns nullopt when the text is not a single cell address.
std::optional<CellRef> parse_a1(std::string_view text);
/// Parses "A1", "Sheet!A1" or "Sheet!A1:B5". Single cells become one-cell ranges.
std::optional<Range> parse_range(std::string_view text);

// ---------------------------------------------------------------------------
// Case-insensitive helpers (sheet names, named ranges, function names)
// ---------------------------------------------------------------------------

std::string to_upper(std::string_view s);
std::string to_lower(std::string_view s);
bool iequals(std::string_view a, std::string_view b);

struct CaseInsensitiveLess {
  using is_transparent = void;
  bool operator()(std::string_view a, std::string_view b) const;
};

using NamedRanges = std::map<std::string, Range, CaseInsensitiveLess>;

}  // namespace auditkit
