// audit: command-line front end for the workbook audit toolkit.
//
// Exit codes: 0 success, 1 integrity failure or uncaught mutation,
// 2 usage, parse or schema error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "auditkit/checks.hpp"
#include "auditkit/detect.hpp"
#include "auditkit/error.hpp"
#include "auditkit/eval.hpp"
#include "auditkit/fixture.hpp"
#include "auditkit/graph.hpp"
#include "auditkit/mutation.hpp"
#include "auditkit/schema.hpp"
#include "auditkit/survey.hpp"
#include "auditkit/workbook.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace auditkit;

namespace {

constexpr const char* kToolVersion = "1.0.0";
constexpr int kWorkbookFormatVersion = 1;
constexpr int kSchemaVersion = 1;

constexpr int kExitOk = 0;
constexpr int kExitFailed = 1;
constexpr int kExitUsage = 2;

struct RunConfig {
  std::string command;
  std::vector<std::string> inputs;
  std::string schema;
  double tolerance = 0.005;
  int max_iterations = IterationPolicy{}.max_iterations;
  double iteration_tolerance = IterationPolicy{}.tolerance;
  std::vector<std::string> check_sheets = DetectOptions{}.check_sheets;
  std::string report = "text";
  bool strict_inputs = true;
  std::uint64_t seed = 0;
  std::string suite = "standard";
  int scale = FixtureOptions{}.scale;
  int cost_lines = FixtureOptions{}.cost_lines;
  std::string out = ".";
  std::string name;
  bool dot = false;
  bool published = false;
  std::string write_audit;

  IterationPolicy policy() const { return {max_iterations, iteration_tolerance}; }
  DetectOptions detect() const {
    DetectOptions o;
    o.check_sheets = check_sheets;
    return o;
  }
  bool json_report() const { return report == "json"; }
};

json config_json(const RunConfig& c) {
  return {{"command", c.command},
          {"inputs", c.inputs},
          {"schema", c.schema},
          {"tolerance", c.tolerance},
          {"max_iterations", c.max_iterations},
          {"iteration_tolerance", c.iteration_tolerance},
          {"check_sheets", c.check_sheets},
          {"report", c.report},
          {"strict_inputs", c.strict_inputs},
          {"seed", c.seed}};
}

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

void emit_json(json j, const RunConfig& c) {
  j["config"] = config_json(c);
  std::cout << j.dump(2) << "\n";
}

// ---- analyze / detect -------------------------------------------------------

json test_json(const TestRecord& t) {
  return {{"cell", to_a1(t.root)},
          {"label", t.label},
          {"category", t.category},
          {"category_name", category_name(t.category)},
          {"kind", kind_name(t.kind)},
          {"dedicated", t.dedicated},
          {"support_cells", t.support.size()},
          {"attributed_formulae", t.attributed_formula_count}};
}

json metrics_json(const MetricsReport& m) {
  json per = json::object();
  for (const auto& [cat, n] : m.per_category) per[std::to_string(cat)] = n;
  return {{"t", m.counts.t},
          {"o", m.counts.o},
          {"i", m.counts.i},
          {"c", m.c},
          {"pct_testing", m.pct_testing},
          {"pct_testing_display", format_percent(m.pct_testing)},
          {"calcs_per_integrity", finite_or_null(m.calcs_per_integrity)},
          {"calcs_per_integrity_display", format_ratio(m.calcs_per_integrity)},
          {"calcs_per_test_formula", finite_or_null(m.calcs_per_test_formula)},
          {"calcs_per_test_formula_display", format_ratio(m.calcs_per_test_formula)},
          {"per_category", per}};
}

void print_metrics(const MetricsReport& m) {
  std::cout << "distinct formulae (t)        " << format_count(m.counts.t) << "\n"
            << "integrity checks (o)         " << format_count(m.counts.o) << "\n"
            << "optimisation checks (i)      " << format_count(m.counts.i) << "\n"
            << "calculations (c)             " << format_count(m.c) << "\n"
            << "% testing                    " << format_percent(m.pct_testing) << "\n"
            << "calcs per integrity check    " << format_ratio(m.calcs_per_integrity) << "\n"
            << "calcs per test formula       " << format_ratio(m.calcs_per_test_formula) << "\n";
  if (!m.per_category.empty()) {
    std::cout << "tests by category\n";
    for (const auto& [cat, n] : m.per_category) {
      std::printf("  %2d %-18s %s\n", cat, std::string(category_name(cat)).c_str(), format_count(n).c_str());
    }
  }
}

int cmd_analyze(const RunConfig& c) {
  Workbook wb = load_workbook(c.inputs.at(0));
  AnalysisReport rep = analyze_workbook(wb, c.detect(), c.policy());
  for (const auto& w : rep.warnings) std::cerr << "warning: " << w << "\n";
  if (c.json_report()) {
    emit_json({{"formula_cells", rep.formula_cells},
               {"unique_formulae", rep.unique_formulae},
               {"check_sheet_formulae", rep.check_sheet_formulae},
               {"tests", rep.tests.size()},
               {"converged", rep.converged},
               {"metrics", metrics_json(rep.metrics)},
               {"warnings", rep.warnings}},
              c);
    return kExitOk;
  }
  std::cout << "formula cells                " << rep.formula_cells << "\n"
            << "unique formulae              " << rep.unique_formulae << "\n"
            << "check-sheet formulae         " << rep.check_sheet_formulae << "\n"
            << "tests                        " << rep.tests.size() << "\n"
            << "converged                    " << (rep.converged ? "yes" : "no") << "\n";
  print_metrics(rep.metrics);
  return kExitOk;
}

int cmd_detect(const RunConfig& c) {
  Workbook wb = load_workbook(c.inputs.at(0));
  EvalResult ev = evaluate(wb, c.policy());
  std::vector<TestRecord> tests = detect_tests(wb, ev, c.detect());
  if (c.json_report()) {
    json arr = json::array();
    for (const auto& t : tests) arr.push_back(test_json(t));
    emit_json({{"tests", arr}}, c);
    return kExitOk;
  }
  for (const auto& t : tests) {
    std::printf("%-16s %2d %-16s %-12s %5s  %s\n", to_a1(t.root).c_str(), t.category,
                std::string(category_name(t.category)).c_str(), std::string(kind_name(t.kind)).c_str(),
                format_count(t.attributed_formula_count).c_str(), t.label.c_str());
  }
  std::cout << tests.size() << " tests\n";
  return kExitOk;
}

// ---- check ------------------------------------------------------------------

bool blocks(const CheckResult& r, bool strict_inputs) {
  if (r.passed || r.kind != CheckKind::Integrity) return false;
  return r.category != 13 || strict_inputs;
}

int cmd_check(const RunConfig& c) {
  Workbook wb = load_workbook(c.inputs.at(0));
  ModelSchema schema = load_schema(c.schema);
  AuditRun run = run_audit(wb, schema, c.tolerance, c.policy());
  for (const auto& w : run.warnings) std::cerr << "warning: " << w << "\n";
  if (!c.write_audit.empty()) save_workbook(run.injected, c.write_audit);

  bool blocking = false;
  int optimisation_failures = 0;
  for (const auto& r : run.results) {
    blocking = blocking || blocks(r, c.strict_inputs);
    if (!r.passed && r.kind == CheckKind::Optimisation) ++optimisation_failures;
  }
  if (optimisation_failures > 0) {
    std::cerr << "warning: " << optimisation_failures
              << " optimisation check(s) failed; results are computed correctly but commercially unattractive\n";
  }

  if (c.json_report()) {
    json arr = json::array();
    for (const auto& r : run.results) {
      arr.push_back({{"id", r.id},
                     {"category", r.category},
                     {"category_name", category_name(r.category)},
                     {"kind", kind_name(r.kind)},
                     {"description", r.description},
                     {"passed", r.passed},
                     {"failing_periods", r.failing_periods},
                     {"residual", finite_or_null(r.residual)}});
    }
    emit_json({{"audit_sheet", run.sheet},
               {"root", display_value(run.root)},
               {"flag", display_value(run.flag)},
               {"converged", run.converged},
               {"checks", arr},
               {"integrity_passed", !blocking},
               {"optimisation_failures", optimisation_failures},
               {"warnings", run.warnings}},
              c);
  } else {
    for (const auto& r : run.results) {
      std::printf("%-4s %2d %-16s %-26s %s", r.passed ? "ok" : "FAIL", r.category,
                  std::string(category_name(r.category)).c_str(), r.id.c_str(), r.description.c_str());
      if (!r.passed) {
        std::string periods;
        for (const auto& p : r.failing_periods) periods += (periods.empty() ? "" : ",") + p;
        std::printf("  [%s] residual %s", periods.c_str(),
                    std::isfinite(r.residual) ? format_number(r.residual).c_str() : "error");
      }
      std::printf("\n");
    }
    std::cout << run.sheet << "!B3 (all checks) = " << display_value(run.root) << "; " << run.results.size()
              << " checks, " << (blocking ? "integrity FAILED" : "integrity passed") << "\n";
  }
  return blocking ? kExitFailed : kExitOk;
}

// ---- eval / graph -------------------------------------------------------------

int cmd_eval(const RunConfig& c) {
  Workbook wb = load_workbook(c.inputs.at(0));
  EvalResult ev = evaluate(wb, c.policy());
  std::vector<std::pair<std::string, CellValue>> rows;
  auto add_sheet_cells = [&](const Sheet& sh, const Range* within) {
    for (const auto& [pos, cell] : sh.cells()) {
      if (within && !within->contains(pos.first, pos.second)) continue;
      CellRef ref{sh.name(), pos.second, pos.first, false, false};
      rows.emplace_back(to_a1(ref), cell.is_formula() ? ev.value(ref) : cell.literal());
    }
  };
  if (!c.name.empty()) {
    auto it = wb.names().find(c.name);
    if (it == wb.names().end()) throw UnknownName("no named range '" + c.name + "'");
    Range r = it->second.normalized();
    add_sheet_cells(*wb.sheet(r.start.sheet), &r);
  } else {
    for (const auto& sh : wb.sheets()) add_sheet_cells(sh, nullptr);
  }
  if (c.json_report()) {
    json values = json::object();
    for (const auto& [addr, v] : rows) values[addr] = display_value(v);
    emit_json({{"converged", ev.converged},
               {"iterations_used", ev.iterations_used},
               {"max_residual", ev.max_residual},
               {"values", values}},
              c);
  } else {
    for (const auto& [addr, v] : rows) std::cout << addr << " = " << display_value(v) << "\n";
    if (!ev.converged) std::cerr << "warning: circular references did not converge\n";
  }
  return kExitOk;
}

int cmd_graph(const RunConfig& c) {
  Workbook wb = load_workbook(c.inputs.at(0));
  DependencyGraph g = build_graph(wb);
  if (c.dot) {
    std::cout << g.to_dot();
    return kExitOk;
  }
  std::size_t cyclic = 0;
  for (const auto& scc : topo_order(g)) cyclic += scc.cyclic;
  std::cout << g.size() << " formula cells, " << g.edge_count() << " edges, " << cyclic
            << " circular component(s)\n";
  return kExitOk;
}

// ---- mutate / gen-fixture -----------------------------------------------------

int cmd_mutate(const RunConfig& c) {
  Workbook wb = load_workbook(c.inputs.at(0));
  ModelSchema schema = load_schema(c.schema);
  std::vector<Mutation> suite =
      c.suite == "standard" ? standard_suite(wb, schema, c.seed) : load_mutations(c.suite);
  CoverageReport rep = run_campaign(wb, schema, suite, c.tolerance, c.policy());
  if (c.json_report()) {
    json j = coverage_to_json(rep);
    for (std::size_t k = 0; k < rep.outcomes.size(); ++k) {
      j["mutations"][k]["designed_category"] = designed_category(rep.outcomes[k].mutation.kind);
    }
    emit_json(j, c);
  } else {
    std::cout << render_coverage_text(rep);
  }
  return rep.all_caught() ? kExitOk : kExitFailed;
}

int cmd_gen_fixture(const RunConfig& c) {
  FixtureOptions opt;
  opt.scale = c.scale;
  opt.cost_lines = c.cost_lines;
  opt.seed = static_cast<unsigned>(c.seed == 0 ? FixtureOptions{}.seed : c.seed);
  Fixture fx = generate_fixture(opt);
  fs::create_directories(c.out);
  fs::path dir(c.out);
  save_workbook(fx.model, dir / "model.wbk");
  {
    std::ofstream out(dir / "schema.json");
    out << write_schema(fx.schema);
  }
  AuditRun run = run_audit(fx.model, fx.schema, c.tolerance, c.policy());
  save_workbook(run.injected, dir / "model_audit.wbk");
  std::cout << "wrote " << (dir / "model.wbk").string() << ", " << (dir / "model_audit.wbk").string() << ", "
            << (dir / "schema.json").string() << " (" << run.specs.size() << " checks)\n";
  return kExitOk;
}

// ---- survey -------------------------------------------------------------------

int cmd_survey(const RunConfig& c) {
  if (c.published) {
    auto rows = reconcile_published();
    if (c.json_report()) {
      json arr = json::array();
      for (const auto& r : rows) {
        arr.push_back({{"author", r.published.author},
                       {"computed", metrics_json(r.computed)},
                       {"printed_pct", r.published.printed_pct},
                       {"printed_calcs_per_integrity", r.published.printed_ratio},
                       {"consistent", r.consistent()},
                       {"pct_consistent", r.pct_consistent},
                       {"ratio_consistent", r.ratio_consistent}});
      }
      emit_json({{"published", arr}}, c);
    } else {
      std::cout << render_reconciliation(rows);
    }
    return kExitOk;
  }
  if (c.inputs.empty()) throw Error("survey needs a directory or --published");
  auto columns = survey_directory(c.inputs.at(0), c.detect(), c.policy());
  if (c.json_report()) {
    emit_json(json::parse(render_survey_json(columns)), c);
  } else {
    std::cout << render_survey_report(columns);
  }
  return kExitOk;
}

void add_report(CLI::App* sub, RunConfig& c) {
  sub->add_option("--report", c.report, "Report format")->check(CLI::IsMember({"text", "json"}));
}

void add_policy(CLI::App* sub, RunConfig& c, const std::string& tol_flag) {
  sub->add_option("--max-iter", c.max_iterations, "Iteration cap for circular components")
      ->check(CLI::PositiveNumber);
  sub->add_option(tol_flag, c.iteration_tolerance, "Convergence tolerance for circular components")
      ->check(CLI::NonNegativeNumber);
}

std::vector<std::string> split_names(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : s + ",") {
    if (ch == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur += ch;
    }
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig c;
  CLI::App app{"Spreadsheet model audit toolkit"};
  app.require_subcommand(0, 1);
  bool version = false;
  app.add_flag("--version", version, "Print tool and format versions");

  std::string check_sheets;
  auto input = [&](CLI::App* sub, const char* what) {
    sub->add_option("file", c.inputs, what)->required()->expected(1);
  };

  auto* analyze = app.add_subcommand("analyze", "Count unique formulae and classify tests");
  input(analyze, "Workbook (.wbk)");
  analyze->add_option("--check-sheets", check_sheets, "Comma-separated check sheet names");
  add_report(analyze, c);
  add_policy(analyze, c, "--iter-tol");

  auto* detect = app.add_subcommand("detect", "List detected self-tests");
  input(detect, "Workbook (.wbk)");
  detect->add_option("--check-sheets", check_sheets, "Comma-separated check sheet names");
  add_report(detect, c);
  add_policy(detect, c, "--iter-tol");

  auto* check = app.add_subcommand("check", "Generate, inject and evaluate the schema's checks");
  input(check, "Model workbook (.wbk)");
  check->add_option("--schema", c.schema, "Schema (JSON)")->required();
  check->add_option("--tol", c.tolerance, "Check tolerance")->check(CLI::NonNegativeNumber);
  check->add_flag("--strict-inputs,!--no-strict-inputs", c.strict_inputs,
                  "Input-validation failures block (default) or only warn");
  check->add_option("--write-audit", c.write_audit, "Save the workbook with its audit sheet");
  add_report(check, c);
  add_policy(check, c, "--iter-tol");

  auto* eval = app.add_subcommand("eval", "Evaluate a workbook");
  input(eval, "Workbook (.wbk)");
  eval->add_option("--name", c.name, "Only the cells of this named range");
  add_report(eval, c);
  add_policy(eval, c, "--tol");

  auto* graph = app.add_subcommand("graph", "Dependency graph summary");
  input(graph, "Workbook (.wbk)");
  graph->add_flag("--dot", c.dot, "Emit Graphviz DOT");

  auto* mutate = app.add_subcommand("mutate", "Run a seeded-fault campaign");
  input(mutate, "Model workbook (.wbk)");
  mutate->add_option("--schema", c.schema, "Schema (JSON)")->required();
  mutate->add_option("--suite", c.suite, "'standard' or a JSON file of mutations");
  mutate->add_option("--seed", c.seed, "Target selection seed");
  mutate->add_option("--tol", c.tolerance, "Check tolerance")->check(CLI::NonNegativeNumber);
  add_report(mutate, c);
  add_policy(mutate, c, "--iter-tol");

  auto* gen = app.add_subcommand("gen-fixture", "Write the reference project finance model");
  gen->add_option("--scale", c.scale, "Business segments")->check(CLI::PositiveNumber);
  gen->add_option("--cost-lines", c.cost_lines, "Cost lines per segment")->check(CLI::PositiveNumber);
  gen->add_option("--seed", c.seed, "Input value seed (0 = default)");
  gen->add_option("--out", c.out, "Output directory");

  auto* survey = app.add_subcommand("survey", "Survey table over author-category folders");
  survey->add_option("dir", c.inputs, "Directory of author folders")->expected(0, 1);
  survey->add_flag("--published", c.published, "Reconcile the published survey table");
  survey->add_option("--check-sheets", check_sheets, "Comma-separated check sheet names");
  add_report(survey, c);
  add_policy(survey, c, "--iter-tol");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  if (version) {
    std::cout << "audit " << kToolVersion << " (workbook format " << kWorkbookFormatVersion << ", schema version "
              << kSchemaVersion << ")\n";
    return kExitOk;
  }
  if (app.get_subcommands().empty()) {
    std::cerr << app.help();
    return kExitUsage;
  }
  CLI::App* sub = app.get_subcommands().front();
  c.command = sub->get_name();
  if (!check_sheets.empty()) c.check_sheets = split_names(check_sheets);

  try {
    if (sub == analyze) return cmd_analyze(c);
    if (sub == detect) return cmd_detect(c);
    if (sub == check) return cmd_check(c);
    if (sub == eval) return cmd_eval(c);
    if (sub == graph) return cmd_graph(c);
    if (sub == mutate) return cmd_mutate(c);
    if (sub == gen) return cmd_gen_fixture(c);
    if (sub == survey) return cmd_survey(c);
  } catch (const BaselineDirty& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailed;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
