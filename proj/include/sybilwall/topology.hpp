#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

namespace sybilwall {

using NodeId = std::uint32_t;

inline constexpr std::size_t kUnboundedDegree = std::numeric_limits<std::size_t>::max();

/// Undirected simple graph. Honest nodes occupy ids [0, honest_count);
/// Sybils are appended after them.
class Topology {
 public:
  Topology() = default;
  explicit Topology(std::size_t honest_count, std::size_t degree_bound = kUnboundedDegree);

  std::size_t node_count() const noexcept { return adjacency_.size(); }
  std::size_t honest_count() const noexcept { return honest_count_; }
  std::size_t sybil_count() const noexcept { return adjacency_.size() - honest_count_; }
  std::size_t degree_bound() const noexcept { return degree_bound_; }
  void set_degree_bound(std::size_t bound) noexcept { degree_bound_ = bound; }

  bool is_sybil(NodeId id) const noexcept { return id >= honest_count_; }
  std::size_t degree(NodeId id) const { return adjacency_.at(id).size(); }
  const std::vector<NodeId>& neighbors(NodeId id) const { return adjacency_.at(id); }
  std::size_t edge_count() const noexcept;

  // Appends `count` Sybil nodes and returns the first new id.
  NodeId add_sybils(std::size_t count);

  // Returns false when the edge already exists. Self-loops throw.
  bool add_edge(NodeId a, NodeId b);
  void remove_edge(NodeId a, NodeId b);
  bool has_edge(NodeId a, NodeId b) const;

  // Sorted (low, high) pairs.
  std::vector<std::pair<NodeId, NodeId>> edges() const;

  friend bool operator==(const Topology&, const Topology&) = default;

 private:
  std::size_t honest_count_ = 0;
  std::size_t degree_bound_ = kUnboundedDegree;
  std::vector<std::vector<NodeId>> adjacency_;
};

// Throws TopologyError naming the first violated invariant.
void validate_topology(const Topology& g);

bool honest_subgraph_connected(const Topology& g);

inline constexpr std::size_t kRggRetryBudget = 100;

// Points uniform on the unit square, edge iff distance < radius. Regenerates
// up to kRggRetryBudget times until connected.
Topology random_geometric_graph(std::size_t n, double radius, std::uint64_t seed);

// Removes random non-bridge edges incident to over-degree nodes until every
// degree is <= bound. Sets the graph's degree_bound.
Topology cap_degrees(const Topology& g, std::size_t bound, std::uint64_t seed);

inline constexpr std::size_t kUnreachable = std::numeric_limits<std::size_t>::max();

// Multi-source hop distances; kUnreachable where no path exists.
std::vector<std::size_t> bfs_distances(const Topology& g, const std::vector<NodeId>& sources);

// All-pairs hop distances over the honest subgraph.
std::vector<std::vector<double>> honest_hop_matrix(const Topology& g);

struct KMedoidsResult {
  std::vector<std::size_t> medoids;  // sorted
  std::vector<std::size_t> assignment;
  double initial_cost = 0.0;
  double cost = 0.0;
};

// PAM: seeded random initial medoids, then best-improvement swaps until no
// swap lowers total distance to the nearest medoid.
KMedoidsResult kmedoids(const std::vector<std::vector<double>>& dist, std::size_t k,
                        std::uint64_t seed);

double medoid_cost(const std::vector<std::vector<double>>& dist,
                   const std::vector<std::size_t>& medoids);

enum class AttackScenario { dense, distributed, sparse };

inline constexpr double kSparseThreshold = 0.25;

AttackScenario classify_scenario(double phi, double sparse_threshold = kSparseThreshold);
std::string to_string(AttackScenario s);

struct AttackEdge {
  NodeId sybil = 0;
  NodeId honest = 0;
  friend bool operator==(const AttackEdge&, const AttackEdge&) = default;
  friend auto operator<=>(const AttackEdge&, const AttackEdge&) = default;
};

struct SSPPlan {
  double phi = 0.0;
  std::size_t sybil_count = 0;
  std::vector<AttackEdge> attack_edges;  // sorted
  std::vector<std::size_t> per_node;     // attack edges per honest node
  std::vector<NodeId> medoids;           // nodes that received the fractional remainder
  AttackScenario scenario = AttackScenario::sparse;
};

// ceil(n * phi) with tolerance for products like 100 * 0.07.
std::size_t total_attack_edges(std::size_t honest_count, double phi);

// Spread Sybil poisoning placement on an honest, degree-bounded graph.
SSPPlan plan_ssp_attack(const Topology& honest, double phi, std::uint64_t seed);

// Adds the plan's Sybils and attack edges. No Sybil-Sybil edges.
Topology attach_sybils(const Topology& g, const SSPPlan& plan);

// Honest graph capped so attack edges fit: degree <= bound - ceil(phi).
Topology build_attacked_network(std::size_t honest_count, double radius, std::size_t degree_bound,
                                double phi, std::uint64_t seed, SSPPlan* plan_out = nullptr);

nlohmann::json topology_to_json(const Topology& g);
Topology topology_from_json(const nlohmann::json& j);
nlohmann::json plan_to_json(const SSPPlan& plan);

}  // namespace sybilwall
