#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sybilwall/errors.hpp"
#include "sybilwall/rng.hpp"
#include "sybilwall/topology.hpp"

namespace sybilwall {

std::size_t total_attack_edges(std::size_t honest_count, double phi) {
  const double exact = static_cast<double>(honest_count) * phi;
  return static_cast<std::size_t>(std::ceil(exact - 1e-9 * std::max(1.0, exact)));
}

namespace {

std::size_t room_on(const Topology& g, NodeId v) {
  if (g.degree_bound() == kUnboundedDegree) return std::numeric_limits<std::size_t>::max();
  return g.degree_bound() > g.degree(v) ? g.degree_bound() - g.degree(v) : 0;
}

}  // namespace

SSPPlan plan_ssp_attack(const Topology& honest, double phi, std::uint64_t seed) {
  if (!(phi > 0.0) || !std::isfinite(phi)) throw InvalidInput("plan_ssp_attack: phi must be > 0");
  if (honest.sybil_count() != 0) throw InvalidInput("plan_ssp_attack: graph already has Sybils");
  if (!honest_subgraph_connected(honest)) throw InvalidInput("plan_ssp_attack: graph is disconnected");

  const std::size_t n = honest.honest_count();
  SSPPlan plan;
  plan.phi = phi;
  plan.scenario = classify_scenario(phi);

  const std::size_t total = total_attack_edges(n, phi);
  const auto base = static_cast<std::size_t>(std::floor(phi));
  const std::size_t remainder = total - n * base;

  plan.per_node.assign(n, base);
  const auto hops = honest_hop_matrix(honest);
  if (remainder > 0) {
    const auto km = kmedoids(hops, remainder, derive_seed({seed, tag(Stream::attack)}));
    for (std::size_t m : km.medoids) {
      ++plan.per_node[m];
      plan.medoids.push_back(static_cast<NodeId>(m));
    }
  }

  // Push edges that would break an honest node's degree bound to the
  // nearest node with room left (hop distance, then id).
  for (NodeId v = 0; v < n; ++v) {
    while (plan.per_node[v] > room_on(honest, v)) {
      NodeId target = v;
      double best = std::numeric_limits<double>::infinity();
      for (NodeId w = 0; w < n; ++w) {
        if (plan.per_node[w] < room_on(honest, w) && hops[v][w] < best) {
          best = hops[v][w];
          target = w;
        }
      }
      if (target == v) {
        throw TopologyError("plan_ssp_attack: no honest node has room for another attack edge");
      }
      --plan.per_node[v];
      ++plan.per_node[target];
    }
  }

  const std::size_t max_per_node = *std::max_element(plan.per_node.begin(), plan.per_node.end());
  const std::size_t capacity = honest.degree_bound() == kUnboundedDegree ? total : honest.degree_bound();
  plan.sybil_count = std::max((total + capacity - 1) / capacity, max_per_node);

  // Endpoints of one honest node are consecutive and at most sybil_count
  // long, so round-robin never repeats a (sybil, honest) pair.
  std::size_t k = 0;
  for (NodeId v = 0; v < n; ++v) {
    for (std::size_t e = 0; e < plan.per_node[v]; ++e, ++k) {
      plan.attack_edges.push_back({static_cast<NodeId>(n + k % plan.sybil_count), v});
    }
  }
  std::sort(plan.attack_edges.begin(), plan.attack_edges.end());
  return plan;
}

Topology attach_sybils(const Topology& g, const SSPPlan& plan) {
  Topology out = g;
  if (plan.attack_edges.empty()) return out;
  const NodeId first = out.add_sybils(plan.sybil_count);
  for (const auto& e : plan.attack_edges) {
    if (e.sybil < first || e.sybil >= out.node_count()) {
      throw TopologyError("attach_sybils: attack edge names unknown Sybil " + std::to_string(e.sybil));
    }
    if (out.is_sybil(e.honest)) {
      throw TopologyError("attach_sybils: attack edge endpoint " + std::to_string(e.honest) +
                          " is not honest");
    }
    if (out.degree(e.honest) + 1 > out.degree_bound()) {
      throw TopologyError("attach_sybils: honest node " + std::to_string(e.honest) +
                          " would exceed degree bound " + std::to_string(out.degree_bound()));
    }
    if (!out.add_edge(e.sybil, e.honest)) {
      throw TopologyError("attach_sybils: duplicate attack edge (" + std::to_string(e.sybil) + ", " +
                          std::to_string(e.honest) + ")");
    }
  }
  validate_topology(out);
  return out;
}

Topology build_attacked_network(std::size_t honest_count, double radius, std::size_t degree_bound,
                                double phi, std::uint64_t seed, SSPPlan* plan_out) {
  const auto reserved = phi > 0.0 ? static_cast<std::size_t>(std::ceil(phi - 1e-9)) : 0;
  if (degree_bound < reserved + 2) {
    throw InvalidInput("degree bound " + std::to_string(degree_bound) + " leaves no room for " +
                       std::to_string(reserved) + " attack edges per node");
  }
  const Topology rgg = random_geometric_graph(honest_count, radius, derive_seed({seed, 1}));
  Topology honest = cap_degrees(rgg, degree_bound - reserved, derive_seed({seed, 2}));
  honest.set_degree_bound(degree_bound);
  validate_topology(honest);
  if (phi <= 0.0) {
    if (plan_out != nullptr) *plan_out = SSPPlan{};
    return honest;
  }
  SSPPlan plan = plan_ssp_attack(honest, phi, derive_seed({seed, 3}));
  Topology full = attach_sybils(honest, plan);
  if (plan_out != nullptr) *plan_out = std::move(plan);
  return full;
}

}  // namespace sybilwall
