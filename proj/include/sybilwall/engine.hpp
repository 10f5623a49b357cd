#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "sybilwall/aggregation.hpp"
#include "sybilwall/data.hpp"
#include "sybilwall/gossip.hpp"
#include "sybilwall/numerics.hpp"
#include "sybilwall/signing.hpp"
#include "sybilwall/topology.hpp"

namespace sybilwall {

struct BlobsSource {
  std::size_t classes = 10;
  std::size_t per_class = 100;       // training rows per class
  std::size_t test_per_class = 50;   // held-out rows per class
  std::size_t dim = 64;
  double spread = 0.15;
};

struct IdxSource {
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
  std::optional<std::size_t> train_limit;  // keep only the first rows
};

using DataSource = std::variant<BlobsSource, IdxSource>;

struct AttackConfig {
  std::optional<AttackSpec> spec;     // none: no adversary, no attack score
  double phi = 1.0;                   // attack edges per honest node
  std::optional<std::size_t> samples; // adversary dataset size; default mean honest size
  std::optional<int> epochs;          // default: honest local epochs
  bool sybils_gossip = true;
};

// Node `node` is offline for rounds [start, start + length).
struct DowntimeWindow {
  NodeId node = 0;
  std::uint32_t start = 0;
  std::uint32_t length = 1;
};

struct SimulationConfig {
  std::uint64_t seed = 1;
  std::uint32_t rounds = 100;
  std::size_t workers = 1;
  std::string signature = "ed25519";

  DataSource dataset = BlobsSource{};
  double alpha = 0.1;

  std::size_t hidden = 0;
  double init_scale = 0.01;
  double learning_rate = 0.05;
  int local_epochs = 10;
  int batch_size = 8;

  std::size_t honest_nodes = 16;
  std::size_t degree_bound = 8;
  double radius = 0.4;

  AggregatorKind aggregator = AggregatorKind::sybilwall;
  AggregatorParams aggregator_params;
  double lambda = 0.8;
  std::optional<std::size_t> db_capacity;

  AttackConfig attack;
  std::vector<DowntimeWindow> downtime;

  bool has_attack() const noexcept { return attack.spec.has_value(); }
  bool has_sybils() const noexcept { return attack.spec.has_value() && attack.phi > 0.0; }
};

// Throws ConfigError with the offending field path.
void validate_config(const SimulationConfig& cfg);

struct RoundMetrics {
  std::uint32_t round = 0;
  double mean_accuracy = 0.0;
  std::optional<double> mean_attack_score;
  std::size_t messages = 0;
};

/// Optional record of internals, used for exactness and protocol checks.
struct SimulationTrace {
  struct Inference {
    std::uint32_t round;          // receiving round
    NodeId receiver;
    NodeId sender;
    std::uint32_t history_round;  // round of the sender's latest history
    ParamVector model;
  };
  struct Aggregation {
    std::uint32_t round;
    NodeId node;
    std::size_t direct;
    bool degenerate;
  };
  struct Header {
    std::uint32_t round;
    NodeId from;
    NodeId to;
    NodeId own_origin;
    std::optional<NodeId> gossip_origin;
    std::optional<NodeId> gossip_forwarder;  // forwarder field of the selected record
    std::uint32_t gossip_distance;
  };

  std::vector<Inference> inferences;
  // (node, round) -> the trained model that node's history advanced by.
  std::map<std::pair<NodeId, std::uint32_t>, ParamVector> trained;
  std::vector<Aggregation> aggregations;
  std::vector<Header> headers;
  std::size_t rejected = 0;
};

// Runs fn(0..count-1) on up to `workers` threads; returns after all finish.
// The first exception thrown by any call is rethrown.
void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn);

class Simulation {
 public:
  // Validates the config and builds the initial state.
  explicit Simulation(SimulationConfig cfg, SimulationTrace* trace = nullptr);
  ~Simulation();
  Simulation(const Simulation&) = delete;
  Simulation& operator=(const Simulation&) = delete;

  RoundMetrics step();
  std::vector<RoundMetrics> run();

  std::uint32_t round() const noexcept { return round_; }
  const SimulationConfig& config() const noexcept { return cfg_; }
  const Topology& topology() const noexcept { return topology_; }
  const SSPPlan& plan() const noexcept { return plan_; }
  const LabeledDataset& test_set() const noexcept { return test_; }
  const LabeledDataset& honest_data(NodeId id) const;
  const Model& model(NodeId id) const;
  const ParamVector& history(NodeId id) const;
  const HistoryDB& database(NodeId id) const;

 private:
  struct Node;
  struct Adversary;
  struct Envelope {
    NodeId from;
    NodeId to;
    RoundMessage msg;
    std::optional<NodeId> forwarder;  // of the selected gossip record
  };
  struct NodeOutput;

  bool offline(NodeId id, std::uint32_t t) const;
  bool reconnecting(NodeId id, std::uint32_t t) const;
  double sample_count(NodeId id) const;
  NodeOutput step_honest(Node& node, const std::vector<const Envelope*>& inbox, std::uint32_t t);
  void step_adversary(const std::vector<std::vector<const Envelope*>>& inbox, std::uint32_t t,
                      std::vector<Envelope>& out);

  SimulationConfig cfg_;
  SimulationTrace* trace_;
  std::unique_ptr<SignatureScheme> scheme_;
  Topology topology_;
  SSPPlan plan_;
  LabeledDataset test_;
  std::optional<LabeledDataset> attack_segment_;
  Architecture arch_;
  std::vector<Node> nodes_;
  std::unique_ptr<Adversary> adversary_;
  std::vector<Envelope> outbox_;
  std::uint32_t round_ = 0;
};

std::vector<RoundMetrics> run_simulation(const SimulationConfig& cfg, SimulationTrace* trace = nullptr);

// Mean accuracy and attack score over the given honest models.
RoundMetrics collect_metrics(const std::vector<const Model*>& models, const LabeledDataset& test,
                             const std::optional<AttackSpec>& attack);

// Header "round,mean_accuracy,mean_attack_score"; six decimals, "nan" when
// there is no attack.
void write_metrics_csv(std::ostream& os, const std::vector<RoundMetrics>& metrics);
std::string metrics_csv_line(const RoundMetrics& m);

}  // namespace sybilwall
