#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <vector>

#include "sybilwall/errors.hpp"
#include "sybilwall/rng.hpp"
#include "sybilwall/topology.hpp"

using namespace sybilwall;

namespace {

Topology from_edges(std::size_t n, const std::vector<std::pair<NodeId, NodeId>>& edges,
                    std::size_t bound = kUnboundedDegree) {
  Topology g(n, bound);
  for (auto [a, b] : edges) g.add_edge(a, b);
  return g;
}

Topology cycle(std::size_t n) {
  Topology g(n);
  for (NodeId v = 0; v < n; ++v) g.add_edge(v, static_cast<NodeId>((v + 1) % n));
  return g;
}

std::vector<std::vector<std::size_t>> floyd_warshall(const Topology& g) {
  const std::size_t n = g.node_count();
  const std::size_t inf = kUnreachable / 4;
  std::vector<std::vector<std::size_t>> d(n, std::vector<std::size_t>(n, inf));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 0;
  for (auto [a, b] : g.edges()) d[a][b] = d[b][a] = 1;
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
  for (auto& row : d)
    for (auto& x : row)
      if (x >= inf) x = kUnreachable;
  return d;
}

double best_cost_brute_force(const std::vector<std::vector<double>>& dist, std::size_t k) {
  const std::size_t n = dist.size();
  double best = std::numeric_limits<double>::infinity();
  std::vector<char> pick(n, 0);
  std::fill(pick.end() - static_cast<std::ptrdiff_t>(k), pick.end(), 1);
  do {
    std::vector<std::size_t> m;
    for (std::size_t i = 0; i < n; ++i)
      if (pick[i]) m.push_back(i);
    best = std::min(best, medoid_cost(dist, m));
  } while (std::next_permutation(pick.begin(), pick.end()));
  return best;
}

void check_plan(const Topology& honest, const SSPPlan& plan, double phi) {
  const std::size_t n = honest.honest_count();
  CHECK(plan.attack_edges.size() == static_cast<std::size_t>(std::ceil(n * phi - 1e-9)));
  const auto [lo, hi] = std::minmax_element(plan.per_node.begin(), plan.per_node.end());
  CHECK(*hi - *lo <= 1);
  std::set<AttackEdge> unique(plan.attack_edges.begin(), plan.attack_edges.end());
  CHECK(unique.size() == plan.attack_edges.size());
}

}  // namespace

TEST_SUITE("topology") {

TEST_CASE("graph basics") {
  Topology g(3);
  CHECK(g.add_edge(0, 1));
  CHECK_FALSE(g.add_edge(1, 0));
  CHECK_THROWS_AS(g.add_edge(2, 2), TopologyError);
  CHECK(g.edge_count() == 1);
  CHECK(g.has_edge(1, 0));
  g.remove_edge(0, 1);
  CHECK(g.edge_count() == 0);
  const NodeId s = g.add_sybils(2);
  CHECK(s == 3);
  CHECK(g.is_sybil(4));
  CHECK(g.sybil_count() == 2);
}

TEST_CASE("validator names each violated invariant") {
  CHECK_NOTHROW(validate_topology(cycle(5)));
  CHECK_THROWS_AS(validate_topology(from_edges(4, {{0, 1}, {2, 3}})), TopologyError);
  auto over = from_edges(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}}, 2);
  CHECK_THROWS_AS(validate_topology(over), TopologyError);
  auto lonely_sybil = cycle(3);
  lonely_sybil.add_sybils(2);
  lonely_sybil.add_edge(3, 0);
  lonely_sybil.add_edge(3, 4);
  CHECK_THROWS_AS(validate_topology(lonely_sybil), TopologyError);
}

TEST_CASE("random geometric graph") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) CHECK(random_geometric_graph(2, 1.5, seed).edge_count() == 1);
  CHECK_THROWS_AS(random_geometric_graph(50, 0.0001, 1), TopologyError);
  CHECK(random_geometric_graph(30, 0.35, 4) == random_geometric_graph(30, 0.35, 4));
  CHECK(honest_subgraph_connected(random_geometric_graph(30, 0.35, 4)));
  CHECK_THROWS_AS(random_geometric_graph(1, 0.5, 1), InvalidInput);
  CHECK_THROWS_AS(random_geometric_graph(5, 0.0, 1), InvalidInput);
  CHECK(random_geometric_graph(5, 1.5, 1).edge_count() == 10);
}

TEST_CASE("degree capping") {
  const auto c6 = cycle(6);
  auto capped = cap_degrees(c6, 2, 1);
  CHECK(capped.edges() == c6.edges());
  CHECK(capped.degree_bound() == 2);

  const auto star = from_edges(6, {{0, 1}, {0, 2}, {0, 3}, {0, 4}, {0, 5}});
  CHECK_THROWS_AS(cap_degrees(star, 3, 1), TopologyError);

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto g = random_geometric_graph(40, 0.4, seed);
    const auto c = cap_degrees(g, 4, seed);
    CHECK_NOTHROW(validate_topology(c));
    for (auto [a, b] : c.edges()) CHECK(g.has_edge(a, b));
  }
}

TEST_CASE("bfs distances") {
  const auto path = from_edges(3, {{0, 1}, {1, 2}});
  const auto d = bfs_distances(path, {0});
  CHECK(d[0] == 0);
  CHECK(d[2] == 2);

  Rng rng(11);
  for (int trial = 0; trial < 50; ++trial) {
    Topology g(10);
    for (NodeId a = 0; a < 10; ++a)
      for (NodeId b = a + 1; b < 10; ++b)
        if (uniform01(rng) < 0.2) g.add_edge(a, b);
    const auto fw = floyd_warshall(g);
    for (NodeId s = 0; s < 10; ++s) CHECK(bfs_distances(g, {s}) == fw[s]);
    const auto multi = bfs_distances(g, {1, 7});
    for (NodeId v = 0; v < 10; ++v) CHECK(multi[v] == std::min(fw[1][v], fw[7][v]));
  }
}

TEST_CASE("k-medoids") {
  const std::vector<double> pos{0, 1, 10, 11};
  std::vector<std::vector<double>> line(4, std::vector<double>(4));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) line[i][j] = std::abs(pos[i] - pos[j]);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = kmedoids(line, 2, seed);
    CHECK(r.cost == best_cost_brute_force(line, 2));
    CHECK(r.medoids[0] < 2);
    CHECK(r.medoids[1] >= 2);

    const auto all = kmedoids(line, 4, seed);
    CHECK(all.cost == 0.0);
    CHECK(all.medoids == std::vector<std::size_t>{0, 1, 2, 3});
  }
  const std::vector<std::vector<double>> p3{{0, 1, 2}, {1, 0, 1}, {2, 1, 0}};
  CHECK(kmedoids(p3, 1, 3).medoids == std::vector<std::size_t>{1});

  Rng rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const auto g = random_geometric_graph(12, 0.5, rng());
    const auto hops = honest_hop_matrix(g);
    const std::size_t k = 1 + rng() % 4;
    const auto r = kmedoids(hops, k, rng());
    CHECK(r.cost <= r.initial_cost);
    CHECK(r.cost == medoid_cost(hops, r.medoids));
    CHECK(r.medoids.size() == k);
  }
  CHECK_THROWS_AS(kmedoids(p3, 4, 1), InvalidInput);
  CHECK_THROWS_AS(kmedoids({{0, 1}, {2, 0}}, 1, 1), InvalidInput);
}

TEST_CASE("k-medoids is deterministic per seed") {
  const auto hops = honest_hop_matrix(random_geometric_graph(20, 0.4, 3));
  const auto a = kmedoids(hops, 3, 8);
  const auto b = kmedoids(hops, 3, 8);
  CHECK(a.medoids == b.medoids);
  CHECK(a.assignment == b.assignment);
}

TEST_CASE("scenario labels") {
  CHECK(classify_scenario(4.0) == AttackScenario::dense);
  CHECK(classify_scenario(2.0) == AttackScenario::dense);
  CHECK(classify_scenario(1.0) == AttackScenario::distributed);
  CHECK(classify_scenario(0.25) == AttackScenario::sparse);
  CHECK(classify_scenario(0.1) == AttackScenario::sparse);
  CHECK(to_string(AttackScenario::distributed) == "distributed");
}

TEST_CASE("ssp with phi 1 on 99 nodes puts one edge on every node") {
  SSPPlan plan;
  const auto g = build_attacked_network(99, 0.2, 8, 1.0, 7, &plan);
  CHECK(plan.attack_edges.size() == 99);
  CHECK(std::all_of(plan.per_node.begin(), plan.per_node.end(), [](std::size_t c) { return c == 1; }));
  CHECK(g.sybil_count() == plan.sybil_count);
  CHECK_NOTHROW(validate_topology(g));
}

TEST_CASE("ssp remainder edges sit on k-medoids of the hop metric") {
  const auto honest = cap_degrees(random_geometric_graph(10, 0.5, 2), 8, 2);
  const auto plan = plan_ssp_attack(honest, 0.2, 4);
  REQUIRE(plan.attack_edges.size() == 2);
  const auto hops = honest_hop_matrix(honest);
  std::vector<std::size_t> m(plan.medoids.begin(), plan.medoids.end());
  CHECK(medoid_cost(hops, m) == best_cost_brute_force(hops, 2));
  for (const auto& e : plan.attack_edges) CHECK(std::find(m.begin(), m.end(), e.honest) != m.end());
}

TEST_CASE("dense ssp gives every node two distinct Sybils") {
  SSPPlan plan;
  const auto g = build_attacked_network(20, 0.4, 8, 2.0, 3, &plan);
  CHECK(plan.scenario == AttackScenario::dense);
  for (NodeId v = 0; v < 20; ++v) {
    std::set<NodeId> sybils;
    for (NodeId w : g.neighbors(v))
      if (g.is_sybil(w)) sybils.insert(w);
    CHECK(sybils.size() == 2);
  }
}

TEST_CASE("ssp edge-count identity over random inputs") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 5 + rng() % 26;
    const double phi = 0.05 + 3.9 * uniform01(rng);
    SSPPlan plan;
    const auto g = build_attacked_network(n, 0.5, 8, phi, rng(), &plan);
    Topology honest(n, 8);
    for (auto [a, b] : g.edges())
      if (!g.is_sybil(a) && !g.is_sybil(b)) honest.add_edge(a, b);
    check_plan(honest, plan, phi);
    CHECK_NOTHROW(validate_topology(g));
  }
}

TEST_CASE("ssp planning is deterministic") {
  const auto honest = cap_degrees(random_geometric_graph(25, 0.4, 6), 7, 6);
  const auto a = plan_ssp_attack(honest, 1.3, 5);
  const auto b = plan_ssp_attack(honest, 1.3, 5);
  CHECK(a.attack_edges == b.attack_edges);
  CHECK(a.medoids == b.medoids);
  CHECK_THROWS_AS(plan_ssp_attack(honest, 0.0, 5), InvalidInput);
}

TEST_CASE("attaching sybils") {
  const auto c5 = from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}}, 3);
  CHECK(attach_sybils(c5, SSPPlan{}) == c5);

  SSPPlan one;
  one.sybil_count = 1;
  one.attack_edges = {{5, 2}};
  const auto g = attach_sybils(c5, one);
  CHECK(g.edge_count() == c5.edge_count() + 1);
  CHECK(g.sybil_count() == 1);

  const auto full = from_edges(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 0}}, 2);
  CHECK_THROWS_AS(attach_sybils(full, one), TopologyError);
}

TEST_CASE("topology JSON round trip") {
  SSPPlan plan;
  const auto g = build_attacked_network(12, 0.5, 6, 1.5, 2, &plan);
  const auto j = topology_to_json(g);
  CHECK(j.at("sybils").size() == g.sybil_count());
  CHECK(topology_from_json(j) == g);
  const auto pj = plan_to_json(plan);
  CHECK(pj.at("attack_edges").size() == plan.attack_edges.size());
  CHECK(pj.at("scenario") == "distributed");
}

}  // TEST_SUITE
