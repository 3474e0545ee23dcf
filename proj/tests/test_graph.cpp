#include <doctest.h>

#include "auditkit/checks.hpp"
#include "auditkit/error.hpp"
#include "auditkit/fixture.hpp"
#include "auditkit/graph.hpp"
#include "support/oracles.hpp"

using namespace auditkit;

namespace {

CellRef at(const char* a1) { return *parse_a1(a1); }

}  // namespace

TEST_CASE("a chain has two edges and singleton components in order") {
  Workbook wb = parse_workbook("sheet S\nS!A1 = 1\nS!A2 = =A1+1\nS!A3 = =A2+1\n");
  DependencyGraph g = build_graph(wb);
  CHECK(g.edge_count() == 2);
  auto order = topo_order(g);
  std::vector<CellRef> seq;
  for (const auto& scc : order) {
    CHECK_FALSE(scc.cyclic);
    REQUIRE(scc.nodes.size() == 1);
    seq.push_back(g.node(scc.nodes[0]));
  }
  auto pos = [&](const char* a1) { return std::find(seq.begin(), seq.end(), at(a1)) - seq.begin(); };
  CHECK(pos("S!A1") < pos("S!A2"));
  CHECK(pos("S!A2") < pos("S!A3"));

  CHECK(transitive_dependents(g, {at("S!A1")}) == std::set<CellRef>{at("S!A2"), at("S!A3")});
  CHECK(transitive_dependents(g, {at("S!A3")}).empty());
  CHECK(transitive_dependents(g, {at("S!Z99")}).empty());
}

TEST_CASE("a two-cell loop is one component") {
  Workbook wb = parse_workbook("sheet S\nS!A1 = =B1\nS!B1 = =A1\n");
  DependencyGraph g = build_graph(wb);
  auto order = topo_order(g);
  REQUIRE(order.size() == 1);
  CHECK(order[0].cyclic);
  CHECK(order[0].nodes.size() == 2);
  CHECK(g.scc_of(*g.index_of(at("S!A1"))) == g.scc_of(*g.index_of(at("S!B1"))));
}

TEST_CASE("self loops are cyclic singletons") {
  Workbook wb = parse_workbook("sheet S\nS!A1 = =0.5*A1+1\n");
  DependencyGraph g = build_graph(wb);
  auto order = topo_order(g);
  REQUIRE(order.size() == 1);
  CHECK(order[0].cyclic);
  CHECK(g.has_self_loop(0));
}

TEST_CASE("empty workbook, empty graph") {
  DependencyGraph g = build_graph(Workbook{});
  CHECK(g.size() == 0);
  CHECK(topo_order(g).empty());
}

TEST_CASE("unparseable formulas name their cell") {
  Workbook wb = parse_workbook("sheet S\nS!C7 = =1+\n");
  try {
    build_graph(wb);
    FAIL("expected SyntaxError");
  } catch (const SyntaxError& e) {
    CHECK(std::string(e.what()).find("S!C7") != std::string::npos);
  }
}

TEST_CASE("undefined referenced cells become blank nodes") {
  Workbook wb = parse_workbook("sheet S\nS!A1 = =B7*2\n");
  DependencyGraph g = build_graph(wb);
  CHECK(g.index_of(at("S!B7")).has_value());
  CHECK(g.size() == 2);
}

TEST_CASE("node order is sheet order, then row, then column") {
  Workbook wb = parse_workbook("sheet Z\nsheet A\nA!A1 = =1\nZ!B2 = =1\nZ!A2 = =1\nZ!C1 = =1\n");
  DependencyGraph g = build_graph(wb);
  std::vector<std::string> names;
  for (const auto& n : g.nodes()) names.push_back(to_a1(n));
  CHECK(names == std::vector<std::string>{"Z!C1", "Z!A2", "Z!B2", "A!A1"});
}

TEST_CASE("reachability agrees with breadth-first search on random graphs") {
  for (std::uint64_t seed = 1; seed <= 40; ++seed) {
    int n = 20 + static_cast<int>(seed * 4);  // up to 180 cells
    Workbook wb = oracle::random_graph_workbook(seed, n);
    DependencyGraph g = build_graph(wb);
    for (int pick : {1, n / 2, n}) {
      std::set<CellRef> seeds{CellRef{"G", 1, pick, false, false}, CellRef{"G", 1, 1 + (pick * 7) % n, false, false}};
      INFO("seed " << seed << " pick " << pick);
      CHECK(transitive_dependents(g, seeds) == oracle::bfs_dependents(wb, seeds));
    }
  }
}

TEST_CASE("condensation order puts every precedent component first") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Workbook wb = oracle::random_graph_workbook(seed * 31, 150);
    DependencyGraph g = build_graph(wb);
    auto order = topo_order(g);
    std::vector<std::size_t> rank(g.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
      for (auto v : order[k].nodes) rank[v] = k;
    }
    for (std::size_t v = 0; v < g.size(); ++v) {
      for (auto d : g.dependents(v)) {
        if (g.scc_of(v) != g.scc_of(d)) CHECK(rank[v] < rank[d]);
      }
    }
  }
}

TEST_CASE("fixture footings reach the balance check and the root") {
  Fixture fx = generate_fixture({1, 4, 7});
  AuditRun run = run_audit(fx.model, fx.schema);
  DependencyGraph g = build_graph(run.injected);
  std::set<CellRef> footings;
  for (int c = 3; c <= 14; ++c) {
    footings.insert(CellRef{"BS", c, 5, false, false});
    footings.insert(CellRef{"BS", c, 10, false, false});
  }
  auto reach = transitive_dependents(g, footings);
  CHECK(reach == oracle::bfs_dependents(run.injected, footings));
  const CheckSpec& balance = run.specs.front();
  REQUIRE(balance.category == 1);
  CHECK(reach.count(balance.result.position()) == 1);
  CHECK(reach.count(CellRef{"Audit", 2, kAuditRootRow, false, false}) == 1);
}

TEST_CASE("circular fee sits in one component after its inputs") {
  Fixture fx = generate_fixture({1, 4, 7});
  DependencyGraph g = build_graph(fx.model);
  auto order = topo_order(g);
  auto fee = g.index_of(CellRef{"Fin", 3, 4, false, false});
  auto capex = g.index_of(CellRef{"Fin", 3, 3, false, false});
  REQUIRE(fee);
  REQUIRE(capex);
  std::size_t fee_rank = 0, capex_rank = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    for (auto v : order[k].nodes) {
      if (v == *fee) {
        fee_rank = k;
        CHECK(order[k].cyclic);
        CHECK(order[k].nodes.size() > 1);
      }
      if (v == *capex) capex_rank = k;
    }
  }
  CHECK(capex_rank < fee_rank);
}

TEST_CASE("DOT output names every node") {
  Workbook wb = parse_workbook("sheet S\nS!A1 = 1\nS!A2 = =A1+1\n");
  std::string dot = build_graph(wb).to_dot();
  CHECK(dot.find("digraph") != std::string::npos);
  CHECK(dot.find("S!A1") != std::string::npos);
  CHECK(dot.find("S!A2") != std::string::npos);
}
