#include "sybilwall/topology.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <string>

#include "sybilwall/errors.hpp"
#include "sybilwall/rng.hpp"

namespace sybilwall {

Topology::Topology(std::size_t honest_count, std::size_t degree_bound)
    : honest_count_(honest_count), degree_bound_(degree_bound), adjacency_(honest_count) {}

std::size_t Topology::edge_count() const noexcept {
  std::size_t twice = 0;
  for (const auto& adj : adjacency_) twice += adj.size();
  return twice / 2;
}

NodeId Topology::add_sybils(std::size_t count) {
  const auto first = static_cast<NodeId>(adjacency_.size());
  adjacency_.resize(adjacency_.size() + count);
  return first;
}

bool Topology::add_edge(NodeId a, NodeId b) {
  if (a == b) throw TopologyError("self-loop on node " + std::to_string(a));
  if (a >= node_count() || b >= node_count()) {
    throw TopologyError("edge (" + std::to_string(a) + ", " + std::to_string(b) +
                        ") references an unknown node");
  }
  auto& na = adjacency_[a];
  const auto pos = std::lower_bound(na.begin(), na.end(), b);
  if (pos != na.end() && *pos == b) return false;
  na.insert(pos, b);
  auto& nb = adjacency_[b];
  nb.insert(std::lower_bound(nb.begin(), nb.end(), a), a);
  return true;
}

void Topology::remove_edge(NodeId a, NodeId b) {
  auto erase = [](std::vector<NodeId>& v, NodeId x) {
    const auto pos = std::lower_bound(v.begin(), v.end(), x);
    if (pos != v.end() && *pos == x) v.erase(pos);
  };
  erase(adjacency_.at(a), b);
  erase(adjacency_.at(b), a);
}

bool Topology::has_edge(NodeId a, NodeId b) const {
  const auto& na = adjacency_.at(a);
  return std::binary_search(na.begin(), na.end(), b);
}

std::vector<std::pair<NodeId, NodeId>> Topology::edges() const {
  std::vector<std::pair<NodeId, NodeId>> out;
  for (NodeId a = 0; a < adjacency_.size(); ++a) {
    for (NodeId b : adjacency_[a]) {
      if (a < b) out.emplace_back(a, b);
    }
  }
  return out;
}

namespace {

// Connectivity of the nodes accepted by `include`, walking only their edges.
template <typename Pred>
bool connected_over(const Topology& g, Pred include) {
  std::vector<char> seen(g.node_count(), 0);
  std::size_t total = 0;
  NodeId start = 0;
  bool found = false;
  for (NodeId v = 0; v < g.node_count(); ++v) {
    if (!include(v)) continue;
    ++total;
    if (!found) {
      start = v;
      found = true;
    }
  }
  if (total <= 1) return true;
  std::deque<NodeId> queue{start};
  seen[start] = 1;
  std::size_t reached = 1;
  while (!queue.empty()) {
    const NodeId v = queue.front();
    queue.pop_front();
    for (NodeId w : g.neighbors(v)) {
      if (!seen[w] && include(w)) {
        seen[w] = 1;
        ++reached;
        queue.push_back(w);
      }
    }
  }
  return reached == total;
}

bool fully_connected(const Topology& g) {
  return connected_over(g, [](NodeId) { return true; });
}

}  // namespace

bool honest_subgraph_connected(const Topology& g) {
  return connected_over(g, [&](NodeId v) { return !g.is_sybil(v); });
}

void validate_topology(const Topology& g) {
  for (NodeId v = 0; v < g.node_count(); ++v) {
    if (g.degree(v) > g.degree_bound()) {
      throw TopologyError("node " + std::to_string(v) + " has degree " + std::to_string(g.degree(v)) +
                          " above bound " + std::to_string(g.degree_bound()));
    }
  }
  if (!honest_subgraph_connected(g)) throw TopologyError("honest subgraph is disconnected");
  if (g.honest_count() + g.sybil_count() < 2) return;
  for (NodeId v = 0; v < g.node_count(); ++v) {
    const auto& nb = g.neighbors(v);
    const bool has_honest =
        std::any_of(nb.begin(), nb.end(), [&](NodeId w) { return !g.is_sybil(w); });
    if (!has_honest) throw TopologyError("node " + std::to_string(v) + " has no honest neighbour");
  }
}

Topology random_geometric_graph(std::size_t n, double radius, std::uint64_t seed) {
  if (n < 2) throw InvalidInput("random_geometric_graph: n must be >= 2");
  if (!(radius > 0.0) || !std::isfinite(radius)) {
    throw InvalidInput("random_geometric_graph: radius must be positive and finite");
  }
  for (std::size_t attempt = 0; attempt < kRggRetryBudget; ++attempt) {
    Rng rng = make_rng({seed, tag(Stream::topology), attempt});
    std::vector<std::pair<double, double>> pts(n);
    for (auto& p : pts) {
      p.first = uniform01(rng);
      p.second = uniform01(rng);
    }
    Topology g(n);
    for (NodeId a = 0; a < n; ++a) {
      for (NodeId b = a + 1; b < n; ++b) {
        const double dx = pts[a].first - pts[b].first;
        const double dy = pts[a].second - pts[b].second;
        if (std::sqrt(dx * dx + dy * dy) < radius) g.add_edge(a, b);
      }
    }
    if (fully_connected(g)) return g;
  }
  throw TopologyError("random_geometric_graph: no connected graph within the retry budget of " +
                      std::to_string(kRggRetryBudget) + " attempts");
}

Topology cap_degrees(const Topology& g, std::size_t bound, std::uint64_t seed) {
  if (bound < 2) throw InvalidInput("cap_degrees: bound must be >= 2");
  Topology out = g;
  Rng rng = make_rng({seed, tag(Stream::topology), 0xcafe});
  for (;;) {
    std::vector<std::pair<NodeId, NodeId>> removable;
    bool over = false;
    for (const auto& [a, b] : out.edges()) {
      if (out.degree(a) <= bound && out.degree(b) <= bound) continue;
      over = true;
      out.remove_edge(a, b);
      if (fully_connected(out)) removable.emplace_back(a, b);
      out.add_edge(a, b);
    }
    if (!over) break;
    if (removable.empty()) {
      throw TopologyError("cap_degrees: a node exceeds degree " + std::to_string(bound) +
                          " but every incident edge is a bridge");
    }
    const auto& [a, b] = removable[static_cast<std::size_t>(uniform01(rng) * removable.size())];
    out.remove_edge(a, b);
  }
  out.set_degree_bound(bound);
  return out;
}

std::vector<std::size_t> bfs_distances(const Topology& g, const std::vector<NodeId>& sources) {
  if (sources.empty()) throw InvalidInput("bfs_distances: no sources");
  std::vector<std::size_t> dist(g.node_count(), kUnreachable);
  std::deque<NodeId> queue;
  for (NodeId s : sources) {
    if (dist.at(s) != 0) {
      dist[s] = 0;
      queue.push_back(s);
    }
  }
  while (!queue.empty()) {
    const NodeId v = queue.front();
    queue.pop_front();
    for (NodeId w : g.neighbors(v)) {
      if (dist[w] == kUnreachable) {
        dist[w] = dist[v] + 1;
        queue.push_back(w);
      }
    }
  }
  return dist;
}

std::vector<std::vector<double>> honest_hop_matrix(const Topology& g) {
  Topology honest(g.honest_count());
  for (const auto& [a, b] : g.edges()) {
    if (!g.is_sybil(a) && !g.is_sybil(b)) honest.add_edge(a, b);
  }
  const std::size_t n = g.honest_count();
  std::vector<std::vector<double>> m(n, std::vector<double>(n));
  for (NodeId s = 0; s < n; ++s) {
    const auto d = bfs_distances(honest, {s});
    for (std::size_t t = 0; t < n; ++t) {
      m[s][t] = d[t] == kUnreachable ? std::numeric_limits<double>::infinity()
                                     : static_cast<double>(d[t]);
    }
  }
  return m;
}

AttackScenario classify_scenario(double phi, double sparse_threshold) {
  if (phi >= 2.0) return AttackScenario::dense;
  if (phi > sparse_threshold) return AttackScenario::distributed;
  return AttackScenario::sparse;
}

std::string to_string(AttackScenario s) {
  switch (s) {
    case AttackScenario::dense:
      return "dense";
    case AttackScenario::distributed:
      return "distributed";
    case AttackScenario::sparse:
      return "sparse";
  }
  return "unknown";
}

nlohmann::json topology_to_json(const Topology& g) {
  std::vector<NodeId> nodes;
  std::vector<NodeId> sybils;
  for (NodeId v = 0; v < g.node_count(); ++v) (g.is_sybil(v) ? sybils : nodes).push_back(v);
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [a, b] : g.edges()) edges.push_back({a, b});
  nlohmann::json j = {{"nodes", nodes}, {"sybils", sybils}, {"edges", std::move(edges)}};
  if (g.degree_bound() == kUnboundedDegree) {
    j["degree_bound"] = nullptr;
  } else {
    j["degree_bound"] = g.degree_bound();
  }
  return j;
}

Topology topology_from_json(const nlohmann::json& j) {
  const auto nodes = j.at("nodes").get<std::vector<NodeId>>();
  const auto sybils = j.at("sybils").get<std::vector<NodeId>>();
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    if (nodes[i] != i) throw InvalidInput("topology_from_json: honest ids must be 0..n-1");
  }
  for (std::size_t i = 0; i < sybils.size(); ++i) {
    if (sybils[i] != nodes.size() + i) {
      throw InvalidInput("topology_from_json: sybil ids must follow the honest ids");
    }
  }
  const auto& bound = j.at("degree_bound");
  Topology g(nodes.size(), bound.is_null() ? kUnboundedDegree : bound.get<std::size_t>());
  g.add_sybils(sybils.size());
  for (const auto& e : j.at("edges")) {
    const auto pair = e.get<std::vector<NodeId>>();
    if (pair.size() != 2) throw InvalidInput("topology_from_json: edges must be pairs");
    if (!g.add_edge(pair[0], pair[1])) throw InvalidInput("topology_from_json: duplicate edge");
  }
  return g;
}

nlohmann::json plan_to_json(const SSPPlan& plan) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& e : plan.attack_edges) edges.push_back({e.sybil, e.honest});
  return {{"phi", plan.phi},
          {"scenario", to_string(plan.scenario)},
          {"sybil_count", plan.sybil_count},
          {"attack_edges", std::move(edges)},
          {"per_node", plan.per_node},
          {"medoids", plan.medoids}};
}

}  // namespace sybilwall
