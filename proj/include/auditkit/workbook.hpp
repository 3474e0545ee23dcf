#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "auditkit/cell.hpp"

namespace auditkit {

/// Formula source text, stored unparsed (leading '=' included).
struct Formula {
  std::string source;
  bool operator==(const Formula&) const = default;
};

using CellContent = std::variant<CellValue, Formula>;

struct Cell {
  CellRef ref;  // canonical sheet name, no absolute markers
  CellContent content;
  std::optional<std::string> label;

  bool operator==(const Cell&) const = default;

  bool is_formula() const { return std::holds_alternative<Formula>(content); }
  const std::string& formula() const { return std::get<Formula>(content).source; }
  const CellValue& literal() const { return std::get<CellValue>(content); }
};

class Sheet {
 public:
  using Key = std::pair<int, int>;  // (row, col)

  explicit Sheet(std::string name) : name_(std::move(name)) {}

  const std::string& name() const { return name_; }
  const std::map<Key, Cell>& cells() const { return cells_; }

  const Cell* find(int row, int col) const;
  /// Inserts or replaces a cell.
  void set(int row, int col, CellContent content, std::optional<std::string> label = {});
  bool erase(int row, int col) { return cells_.erase({row, col}) > 0; }

  /// Text used to classify the cell: its label attribute, else the nearest
  /// text literal to its left on the same row.
  std::optional<std::string> label_for(int row, int col) const;

  /// Highest column holding any cell (0 for an empty sheet).
  int max_column() const;

  bool operator==(const Sheet&) const = default;

 private:
  std::string name_;
  std::map<Key, Cell> cells_;
};

/// Sheets in declaration order plus workbook-level named ranges. Sheet and
/// name lookup is case-insensitive.
class Workbook {
 public:
  Sheet& add_sheet(const std::string& name);
  const std::vector<Sheet>& sheets() const { return sheets_; }

  std::optional<std::size_t> sheet_index(std::string_view name) const;
  const Sheet* sheet(std::string_view name) const;
  Sheet* sheet(std::string_view name);
  Sheet& sheet_at(std::size_t i) { return sheets_.at(i); }

  /// Cell at `ref` (absolute markers ignored); nullptr when absent.
  const Cell* cell(const CellRef& ref) const;
  void set_cell(const CellRef& ref, CellContent content, std::optional<std::string> label = {});

  const NamedRanges& names() const { return names_; }
  /// Targets must name an existing sheet; the stored target uses the
  /// canonical sheet spelling.
  void add_name(const std::string& name, Range target);

  std::size_t formula_count() const;

 private:
  std::vector<Sheet> sheets_;
  NamedRanges names_;
};

/// Reads the line-oriented `.wbk` interchange format.
Workbook parse_workbook(std::string_view text);
Workbook load_workbook(const std::filesystem::path& path);

/// Writes the interchange format: sheets in order, cells by row then column,
/// named ranges last.
std::string write_workbook(const Workbook& wb);
void save_workbook(const Workbook& wb, const std::filesystem::path& path);

/// Same sheets, cells, labels and named ranges; formula text compared after
/// parse/print canonicalization (unparseable formulas compare verbatim).
bool structurally_equal(const Workbook& a, const Workbook& b);

/// Renders a literal as it appears in the interchange format.
std::string literal_text(const CellValue& v);

}  // namespace auditkit
