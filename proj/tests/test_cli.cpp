#include <doctest.h>

#include <sys/wait.h>

#include <filesystem>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "auditkit/fixture.hpp"
#include "auditkit/mutation.hpp"
#include "auditkit/survey.hpp"

using namespace auditkit;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code = -1;
  std::string out;
};

const fs::path& workdir() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "auditkit_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    Fixture fx = generate_fixture({1, 4, 7});
    save_workbook(fx.model, d / "model.wbk");
    std::ofstream(d / "schema.json") << write_schema(fx.schema);

    SubtotalSpec opex = fx.schema.subtotals.back();
    Mutation m;
    m.id = "drop";
    m.kind = MutationKind::DropSubtotalTerm;
    m.target = opex.total;
    save_workbook(apply_mutation(fx.model, fx.schema, m).workbook, d / "dropped.wbk");

    Workbook bad_input = fx.model;
    auto row = find_row(*bad_input.sheet("Inputs"), "Debt maturity (period)");
    bad_input.sheet("Inputs")->set(*row, 3, CellValue{13.0});
    save_workbook(bad_input, d / "bad_input.wbk");
    return d;
  }();
  return dir;
}

Run audit(const std::string& args) {
  fs::path out = workdir() / "stdout.txt";
  std::string cmd = std::string(AUDIT_BIN) + " " + args + " > " + out.string() + " 2>/dev/null";
  int status = std::system(cmd.c_str());
  Run r;
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  std::ifstream in(out);
  std::stringstream ss;
  ss << in.rdbuf();
  r.out = ss.str();
  return r;
}

std::string p(const char* name) { return (workdir() / name).string(); }

}  // namespace

TEST_CASE("clean model exits 0") {
  Run r = audit("check " + p("model.wbk") + " --schema " + p("schema.json"));
  CHECK(r.code == 0);
  CHECK(r.out.find("FAIL") == std::string::npos);
}

TEST_CASE("a dropped subtotal term exits 1 and names the addition category") {
  Run r = audit("check " + p("dropped.wbk") + " --schema " + p("schema.json") + " --report json");
  CHECK(r.code == 1);
  auto j = nlohmann::json::parse(r.out);
  bool named = false;
  for (const auto& c : j["checks"]) {
    if (!c["passed"].get<bool>()) named = named || c["category"] == 2;
  }
  CHECK(named);
  CHECK(j["config"]["command"] == "check");
  CHECK(j["config"]["tolerance"] == 0.005);
}

TEST_CASE("missing files and bad usage exit 2") {
  CHECK(audit("analyze " + p("missing.wbk")).code == 2);
  CHECK(audit("check " + p("model.wbk")).code == 2);
  CHECK(audit("frobnicate").code == 2);
  CHECK(audit("check " + p("model.wbk") + " --schema " + p("model.wbk")).code == 2);
}

TEST_CASE("input rule failures block only in strict mode") {
  CHECK(audit("check " + p("bad_input.wbk") + " --schema " + p("schema.json")).code == 1);
  CHECK(audit("check " + p("bad_input.wbk") + " --schema " + p("schema.json") + " --no-strict-inputs").code == 0);
}

TEST_CASE("mutation campaigns exit 0 when everything is caught") {
  Run r = audit("mutate " + p("model.wbk") + " --schema " + p("schema.json") + " --report json");
  CHECK(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["kill_rate"] == 1.0);
}

TEST_CASE("text and JSON analyses report the same numbers") {
  std::string args = "analyze " + p("dropped.wbk");
  Run text = audit(args);
  Run json = audit(args + " --report json");
  REQUIRE(text.code == 0);
  REQUIRE(json.code == 0);
  auto j = nlohmann::json::parse(json.out);
  const auto& m = j["metrics"];
  for (const std::string& v :
       {std::to_string(j["formula_cells"].get<long>()), std::to_string(j["unique_formulae"].get<long>()),
        format_count(m["t"].get<double>()), format_count(m["o"].get<double>()), format_count(m["i"].get<double>()),
        format_count(m["c"].get<double>()), m["pct_testing_display"].get<std::string>(),
        m["calcs_per_integrity_display"].get<std::string>()}) {
    INFO(v);
    CHECK(text.out.find(" " + v) != std::string::npos);
  }
}

TEST_CASE("version names the tool and formats") {
  Run r = audit("--version");
  CHECK(r.code == 0);
  CHECK(r.out.find("workbook format 1") != std::string::npos);
}

TEST_CASE("a generated fixture analyzes to one test formula per five") {
  fs::path out = workdir() / "gen";
  REQUIRE(audit("gen-fixture --scale 10 --out " + out.string()).code == 0);
  Run r = audit("analyze " + (out / "model_audit.wbk").string() + " --report json");
  REQUIRE(r.code == 0);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["tests"] == 100);
  CHECK(j["metrics"]["t"].get<double>() == doctest::Approx(2500).epsilon(0.05));
  CHECK(j["metrics"]["calcs_per_test_formula"].get<double>() == doctest::Approx(5.25).epsilon(0.1));
  CHECK(audit("check " + (out / "model.wbk").string() + " --schema " + (out / "schema.json").string()).code == 0);
}
