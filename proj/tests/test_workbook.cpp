#include <doctest.h>

#include <filesystem>

#include "auditkit/checks.hpp"
#include "auditkit/error.hpp"
#include "auditkit/fixture.hpp"
#include "auditkit/workbook.hpp"

using namespace auditkit;

TEST_CASE("A1 addresses render back to the text they were parsed from") {
  for (const char* s : {"Audit!$B$3", "A1", "$A1", "A$1", "Inputs!XFD1048576", "'My Sheet'!C7", "AA10"}) {
    auto r = parse_a1(s);
    REQUIRE(r);
    CHECK(to_a1(*r) == s);
  }
  CHECK_FALSE(parse_a1("A0"));
  CHECK_FALSE(parse_a1("1A"));
  CHECK_FALSE(parse_a1("XFE1"));
  CHECK(column_letters(28) == "AB");
  CHECK(column_index("ab") == 28);
}

TEST_CASE("ranges normalize to top-left first") {
  auto r = parse_range("Data!C5:A1");
  REQUIRE(r);
  Range n = r->normalized();
  CHECK(n.start.col == 1);
  CHECK(n.start.row == 1);
  CHECK(n.end.col == 3);
  CHECK(n.end.row == 5);
  CHECK(n.contains(2, 2));
  CHECK_FALSE(n.contains(6, 1));
}

TEST_CASE("loading a sheet with an AND cell") {
  Workbook wb = parse_workbook("sheet Audit\nAudit!B3 = =AND(B5,B6)\n");
  REQUIRE(wb.sheets().size() == 1);
  CHECK(wb.formula_count() == 1);
  const Cell* c = wb.cell(*parse_a1("Audit!B3"));
  REQUIRE(c);
  CHECK(c->formula() == "=AND(B5,B6)");
}

TEST_CASE("empty file gives an empty workbook") {
  Workbook wb = parse_workbook("");
  CHECK(wb.sheets().empty());
  wb = parse_workbook("# nothing here\n\n");
  CHECK(wb.sheets().empty());
}

TEST_CASE("duplicate cell records are rejected") {
  CHECK_THROWS_AS(parse_workbook("sheet Inputs\nInputs!A1 = 1\nInputs!A1 = 2\n"), DuplicateCell);
  // Case-insensitive sheet match makes these the same cell.
  CHECK_THROWS_AS(parse_workbook("sheet Inputs\nInputs!A1 = 1\ninputs!a1 = 2\n"), DuplicateCell);
}

TEST_CASE("malformed lines report their line number") {
  try {
    parse_workbook("sheet S\nS!A1 = 1\nthis is not a record\n");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
  CHECK_THROWS_AS(parse_workbook("sheet S\nS!A1 = \"unterminated\n"), ParseError);
  CHECK_THROWS_AS(parse_workbook("Nowhere!A1 = 1\n"), ParseError);
  CHECK_THROWS_AS(parse_workbook("sheet S\nname X = Other!A1\n"), UnknownSheet);
  CHECK_THROWS_AS(parse_workbook("sheet S\nsheet s\n"), ParseError);
}

TEST_CASE("literals, labels and named ranges survive a round trip") {
  const char* text =
      "sheet Flow\n"
      "sheet 'Q1 Data'\n"
      "Flow!A40 = \"Net cash\"\n"
      "Flow!C40 = =SUM(C30:C39) label=\"Net cash flow\"\n"
      "Flow!D40 = 12.5\n"
      "Flow!E40 = TRUE\n"
      "Flow!F40 = #DIV/0!\n"
      "Flow!G40 = \"say \"\"hi\"\"\"\n"
      "'Q1 Data'!B2 = =Flow!C40*2\n"
      "name NetCash = Flow!C40\n"
      "name Block = Flow!C30:C39\n";
  Workbook wb = parse_workbook(text);
  CHECK(wb.names().size() == 2);
  CHECK(wb.names().count("netcash") == 1);
  const Cell* c = wb.cell(*parse_a1("Flow!C40"));
  REQUIRE(c);
  REQUIRE(c->label);
  CHECK(*c->label == "Net cash flow");
  CHECK(std::get<std::string>(wb.cell(*parse_a1("Flow!G40"))->literal()) == "say \"hi\"");

  std::string saved = write_workbook(wb);
  CHECK(saved.find("name NetCash = Flow!C40") != std::string::npos);
  Workbook back = parse_workbook(saved);
  CHECK(structurally_equal(wb, back));
  CHECK(write_workbook(back) == saved);
}

TEST_CASE("structural equality compares formulas after canonical printing") {
  Workbook a = parse_workbook("sheet S\nS!A1 = =a2 + b2\n");
  Workbook b = parse_workbook("sheet S\nS!A1 = =A2+B2\n");
  Workbook c = parse_workbook("sheet S\nS!A1 = =A2-B2\n");
  CHECK(structurally_equal(a, b));
  CHECK_FALSE(structurally_equal(a, c));
}

TEST_CASE("labels fall back to the nearest text on the left") {
  Workbook wb = parse_workbook(
      "sheet S\nS!A3 = \"Total assets\"\nS!C3 = =1\nS!D3 = =2 label=\"own\"\nS!C4 = =3\n");
  const Sheet& s = *wb.sheet("s");
  CHECK(s.label_for(3, 3) == std::optional<std::string>("Total assets"));
  CHECK(s.label_for(3, 4) == std::optional<std::string>("own"));
  CHECK_FALSE(s.label_for(4, 3));
}

TEST_CASE("an injected audit workbook saves and reloads unchanged") {
  Fixture fx = generate_fixture({1, 4, 7});
  AuditRun run = run_audit(fx.model, fx.schema);
  auto path = std::filesystem::temp_directory_path() / "auditkit_roundtrip.wbk";
  save_workbook(run.injected, path);
  Workbook back = load_workbook(path);
  std::filesystem::remove(path);
  CHECK(structurally_equal(run.injected, back));
  CHECK(back.sheet("Audit") != nullptr);
}
