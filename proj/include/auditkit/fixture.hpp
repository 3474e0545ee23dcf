#pragma once

#include <optional>
#include <string_view>

#include "auditkit/schema.hpp"
#include "auditkit/workbook.hpp"

namespace auditkit {

struct FixtureOptions {
  int scale = 10;        // business segments
  int cost_lines = 48;   // operating cost lines per segment
  unsigned seed = 2008;  // drives input values only; layout is fixed
};

/// A finite-life project finance model: Inputs, Time, Ops, Capex, Fin, PL,
/// CF, BS, Cascade and Ratios sheets over 12 periods (2 construction, 10
/// operating), a circular agency-fee calculation, and a schema declaring
/// 20 + 8 * scale checks (20 + 6 * scale integrity, 2 * scale optimisation).
struct Fixture {
  Workbook model;
  ModelSchema schema;
};

Fixture generate_fixture(const FixtureOptions& options = {});

/// Row whose column-A label equals `label` (case-insensitive).
std::optional<int> find_row(const Sheet& sheet, std::string_view label);

}  // namespace auditkit
