#include "sybilwall/engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <numeric>
#include <thread>

#include "sybilwall/errors.hpp"
#include "sybilwall/rng.hpp"

namespace sybilwall {

namespace {

void require(bool ok, const std::string& path, const std::string& message) {
  if (!ok) throw ConfigError(path, message);
}

bool finite(double x) { return std::isfinite(x); }

}  // namespace

void validate_config(const SimulationConfig& cfg) {
  require(cfg.rounds >= 1, "rounds", "must be >= 1");
  require(cfg.workers >= 1, "workers", "must be >= 1");
  require(cfg.signature == "ed25519" || cfg.signature == "mac", "signature",
          "must be \"ed25519\" or \"mac\"");

  if (const auto* blobs = std::get_if<BlobsSource>(&cfg.dataset)) {
    require(blobs->classes >= 2, "dataset.classes", "must be >= 2");
    require(blobs->per_class >= 1, "dataset.per_class", "must be >= 1");
    require(blobs->test_per_class >= 1, "dataset.test_per_class", "must be >= 1");
    require(blobs->dim >= 1, "dataset.dim", "must be >= 1");
    require(finite(blobs->spread) && blobs->spread >= 0.0, "dataset.spread", "must be >= 0");
  } else {
    const auto& idx = std::get<IdxSource>(cfg.dataset);
    require(!idx.train_images.empty(), "dataset.train_images", "path required");
    require(!idx.train_labels.empty(), "dataset.train_labels", "path required");
    require(!idx.test_images.empty(), "dataset.test_images", "path required");
    require(!idx.test_labels.empty(), "dataset.test_labels", "path required");
    require(!idx.train_limit || *idx.train_limit >= 1, "dataset.train_limit", "must be >= 1");
  }
  require(finite(cfg.alpha) && cfg.alpha > 0.0, "partition.alpha", "must be > 0");

  require(finite(cfg.init_scale) && cfg.init_scale >= 0.0, "model.init_scale", "must be >= 0");
  require(finite(cfg.learning_rate) && cfg.learning_rate > 0.0, "train.learning_rate", "must be > 0");
  require(cfg.local_epochs >= 1, "train.local_epochs", "must be >= 1");
  require(cfg.batch_size >= 1, "train.batch_size", "must be >= 1");

  require(cfg.honest_nodes >= 2, "topology.honest_nodes", "must be >= 2");
  require(cfg.degree_bound >= 2, "topology.degree_bound", "must be >= 2");
  require(finite(cfg.radius) && cfg.radius > 0.0, "topology.radius", "must be positive");

  require(finite(cfg.lambda) && cfg.lambda > 0.0, "aggregator.lambda", "must be > 0");
  require(finite(cfg.aggregator_params.foolsgold.kappa) && cfg.aggregator_params.foolsgold.kappa > 0.0,
          "aggregator.kappa", "must be > 0");
  require(!cfg.aggregator_params.multikrum_m || *cfg.aggregator_params.multikrum_m >= 1,
          "aggregator.multikrum_m", "must be >= 1");
  require(!cfg.db_capacity || *cfg.db_capacity >= 1, "aggregator.db_capacity", "must be >= 1");

  const auto& atk = cfg.attack;
  require(finite(atk.phi) && atk.phi >= 0.0, "attack.phi", "must be >= 0");
  if (cfg.has_sybils()) {
    const auto reserved = static_cast<std::size_t>(std::ceil(atk.phi - 1e-9));
    require(cfg.degree_bound >= reserved + 2, "attack.phi",
            "needs degree bound >= ceil(phi) + 2 (degree bound is " + std::to_string(cfg.degree_bound) + ")");
  }
  require(!atk.samples || *atk.samples >= 1, "attack.samples", "must be >= 1");
  require(!atk.epochs || *atk.epochs >= 1, "attack.epochs", "must be >= 1");
  if (atk.spec) {
    if (const auto* blobs = std::get_if<BlobsSource>(&cfg.dataset)) {
      try {
        AttackSpec spec = *atk.spec;
        if (auto* bd = std::get_if<Backdoor>(&spec); bd && bd->pattern.empty()) {
          bd->pattern = default_backdoor_pattern(blobs->dim);
        }
        validate_attack(spec, blobs->dim, blobs->classes);
      } catch (const InvalidInput& e) {
        throw ConfigError("attack", e.what());
      }
    }
  }

  for (std::size_t i = 0; i < cfg.downtime.size(); ++i) {
    const auto& w = cfg.downtime[i];
    const std::string path = "downtime[" + std::to_string(i) + "]";
    require(w.node < cfg.honest_nodes, path + ".node", "must name an honest node");
    require(w.length >= 1, path + ".length", "must be >= 1");
  }
}

void parallel_for(std::size_t count, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  std::vector<std::thread> pool;
  const std::size_t threads = std::min(workers, count);
  for (std::size_t k = 1; k < threads; ++k) pool.emplace_back(work);
  work();
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

struct Simulation::Node {
  NodeId id = 0;
  Model model;
  ParamVector history;
  HistoryDB db;
  LabeledDataset data;
};

struct Simulation::Adversary {
  std::vector<NodeId> sybils;
  Model model;
  ParamVector history;
  LabeledDataset data;
  std::vector<HistoryDB> dbs;
};

struct Simulation::NodeOutput {
  std::vector<Envelope> out;
  double accuracy = 0.0;
  std::optional<double> attack;
  std::size_t rejected = 0;
  std::vector<SimulationTrace::Inference> inferences;
  std::optional<SimulationTrace::Aggregation> aggregation;
  std::optional<ParamVector> trained;
};

namespace {

std::pair<LabeledDataset, LabeledDataset> load_source(const DataSource& source, std::uint64_t seed) {
  if (const auto* blobs = std::get_if<BlobsSource>(&source)) {
    const auto all = synth_blobs(blobs->classes, blobs->per_class + blobs->test_per_class, blobs->dim,
                                 blobs->spread, derive_seed({seed, tag(Stream::dataset)}));
    return stratified_split(all, blobs->test_per_class);
  }
  const auto& idx = std::get<IdxSource>(source);
  LabeledDataset train = load_idx(idx.train_images, idx.train_labels);
  LabeledDataset test = load_idx(idx.test_images, idx.test_labels);
  if (idx.train_limit && *idx.train_limit < train.size()) {
    std::vector<std::size_t> keep(*idx.train_limit);
    std::iota(keep.begin(), keep.end(), std::size_t{0});
    train = train.subset(keep);
  }
  if (train.dim() != test.dim()) throw ConfigError("dataset", "train and test feature sizes differ");
  const std::size_t classes = std::max(train.classes(), test.classes());
  auto widen = [classes](const LabeledDataset& d) {
    return LabeledDataset(d.dim(), classes, d.features(), d.labels());
  };
  return {widen(train), widen(test)};
}

}  // namespace

Simulation::Simulation(SimulationConfig cfg, SimulationTrace* trace) : cfg_(std::move(cfg)), trace_(trace) {
  validate_config(cfg_);
  scheme_ = make_signature_scheme(cfg_.signature, derive_seed({cfg_.seed, tag(Stream::keys)}));

  auto [train, test] = load_source(cfg_.dataset, cfg_.seed);
  test_ = std::move(test);
  if (cfg_.attack.spec) {
    if (auto* bd = std::get_if<Backdoor>(&*cfg_.attack.spec); bd && bd->pattern.empty()) {
      bd->pattern = default_backdoor_pattern(train.dim());
    }
    try {
      validate_attack(*cfg_.attack.spec, train.dim(), train.classes());
      attack_segment_ = attack_segment(test_, *cfg_.attack.spec);
    } catch (const InvalidInput& e) {
      throw ConfigError("attack", e.what());
    }
    if (attack_segment_->empty()) throw ConfigError("attack", "attack segment of the test set is empty");
  }

  const std::size_t n = cfg_.honest_nodes;
  auto parts = dirichlet_partition(train, {n, cfg_.alpha, derive_seed({cfg_.seed, tag(Stream::partition)})});

  const double phi = cfg_.has_sybils() ? cfg_.attack.phi : 0.0;
  topology_ = build_attacked_network(n, cfg_.radius, cfg_.degree_bound, phi,
                                     derive_seed({cfg_.seed, tag(Stream::topology)}), &plan_);

  arch_ = Architecture{train.dim(), train.classes(), cfg_.hidden};
  const Model init = Model::initialize(arch_, cfg_.init_scale, derive_seed({cfg_.seed, tag(Stream::init)}));

  nodes_.resize(n);
  for (NodeId i = 0; i < n; ++i) {
    nodes_[i].id = i;
    nodes_[i].model = init;
    nodes_[i].history = ParamVector(arch_.param_count());
    nodes_[i].db = HistoryDB(cfg_.db_capacity);
    nodes_[i].data = std::move(parts[i]);
  }

  if (cfg_.has_sybils() && topology_.sybil_count() > 0) {
    adversary_ = std::make_unique<Adversary>();
    for (NodeId s = static_cast<NodeId>(n); s < topology_.node_count(); ++s) adversary_->sybils.push_back(s);
    adversary_->model = init;
    adversary_->history = ParamVector(arch_.param_count());
    adversary_->dbs.assign(adversary_->sybils.size(), HistoryDB(cfg_.db_capacity));

    const std::size_t want =
        cfg_.attack.samples.value_or(std::max<std::size_t>(1, (train.size() + n / 2) / n));
    if (want > train.size()) {
      throw ConfigError("attack.samples", "requests " + std::to_string(want) + " rows but the training set has " +
                                              std::to_string(train.size()));
    }
    std::vector<std::size_t> idx(train.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    Rng rng = make_rng({cfg_.seed, tag(Stream::adversary), 0});
    for (std::size_t i = 0; i < want; ++i) {
      const std::size_t j = i + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(idx.size() - i));
      std::swap(idx[i], idx[j]);
    }
    idx.resize(want);
    std::sort(idx.begin(), idx.end());
    adversary_->data = apply_attack(train.subset(idx), *cfg_.attack.spec);
  }
}

Simulation::~Simulation() = default;

const LabeledDataset& Simulation::honest_data(NodeId id) const { return nodes_.at(id).data; }
const Model& Simulation::model(NodeId id) const { return nodes_.at(id).model; }
const ParamVector& Simulation::history(NodeId id) const { return nodes_.at(id).history; }
const HistoryDB& Simulation::database(NodeId id) const { return nodes_.at(id).db; }

bool Simulation::offline(NodeId id, std::uint32_t t) const {
  return std::any_of(cfg_.downtime.begin(), cfg_.downtime.end(), [&](const DowntimeWindow& w) {
    return w.node == id && t >= w.start && t - w.start < w.length;
  });
}

bool Simulation::reconnecting(NodeId id, std::uint32_t t) const {
  if (offline(id, t)) return false;
  return std::any_of(cfg_.downtime.begin(), cfg_.downtime.end(), [&](const DowntimeWindow& w) {
    return w.node == id && static_cast<std::uint64_t>(w.start) + w.length == t;
  });
}

double Simulation::sample_count(NodeId id) const {
  if (id < nodes_.size()) return static_cast<double>(nodes_[id].data.size());
  return adversary_ ? static_cast<double>(adversary_->data.size()) : 0.0;
}

Simulation::NodeOutput Simulation::step_honest(Node& node, const std::vector<const Envelope*>& inbox,
                                               std::uint32_t t) {
  NodeOutput out;
  auto score = [&] {
    out.accuracy = evaluate_accuracy(node.model, test_);
    if (attack_segment_) out.attack = evaluate_accuracy(node.model, *attack_segment_);
  };
  if (offline(node.id, t)) {
    score();
    return out;
  }

  // Sender -> (inferred trained model, the history it came with).
  std::map<NodeId, std::pair<ParamVector, SignedHistoryPtr>> inferred;
  for (const Envelope* env : inbox) {
    try {
      auto r = receive_message(env->msg, node.id, node.db, *scheme_);
      if (r.trained_model) {
        if (trace_) {
          out.inferences.push_back({t, node.id, env->from, env->msg.own->round, *r.trained_model});
        }
        inferred.emplace(env->from, std::make_pair(std::move(*r.trained_model), env->msg.own));
      }
    } catch (const MessageRejected&) {
      ++out.rejected;
    }
  }

  if (!reconnecting(node.id, t) && !inferred.empty()) {
    ContributionSet c;
    c.own = {node.id, node.model.params(), node.history};
    std::vector<double> counts{sample_count(node.id)};
    for (auto& [j, entry] : inferred) {
      c.direct.push_back({j, std::move(entry.first), entry.second->history});
      counts.push_back(sample_count(j));
    }
    for (const auto& [origin, rec] : node.db.records()) {
      if (origin != node.id && !inferred.count(origin)) c.indirect.push_back({origin, rec.history()});
    }
    auto outcome = aggregate(cfg_.aggregator, cfg_.aggregator_params, c, counts);
    node.model.params() = std::move(outcome.model);
    out.aggregation = SimulationTrace::Aggregation{t, node.id, c.direct.size(), outcome.degenerate};
  }
  score();

  ParamVector raw;
  if (node.data.empty()) {
    raw = node.model.params();
  } else {
    const TrainConfig tc{cfg_.learning_rate, cfg_.local_epochs, cfg_.batch_size,
                         derive_seed({cfg_.seed, tag(Stream::train), node.id, t})};
    raw = train_sgd(node.model, node.data, tc).params();
  }
  ParamVector next = node.history + raw;
  node.model.params() = next - node.history;
  node.history = std::move(next);
  if (trace_) out.trained = node.model.params();

  const auto own = sign_history(*scheme_, node.id, t, node.history);
  for (NodeId j : topology_.neighbors(node.id)) {
    Rng rng = make_rng({cfg_.seed, tag(Stream::gossip), node.id, t, j});
    const auto selected = select_gossip(filter_db(node.db, node.id, j), cfg_.lambda, rng);
    out.out.push_back({node.id, j, compose_message(own, selected),
                       selected ? std::optional<NodeId>(selected->forwarder) : std::nullopt});
  }
  return out;
}

void Simulation::step_adversary(const std::vector<std::vector<const Envelope*>>& inbox, std::uint32_t t,
                                std::vector<Envelope>& out) {
  Adversary& adv = *adversary_;
  std::vector<SizedModel> sized{{adv.model.params(), static_cast<double>(adv.data.size())}};
  for (std::size_t k = 0; k < adv.sybils.size(); ++k) {
    const NodeId s = adv.sybils[k];
    for (const Envelope* env : inbox[s]) {
      try {
        auto r = receive_message(env->msg, s, adv.dbs[k], *scheme_);
        if (k == 0 && r.trained_model && sample_count(env->from) > 0.0) {
          sized.push_back({std::move(*r.trained_model), sample_count(env->from)});
        }
      } catch (const MessageRejected&) {
        if (trace_) ++trace_->rejected;
      }
    }
  }
  if (sized.size() > 1) adv.model.params() = fedavg(sized);

  const TrainConfig tc{cfg_.learning_rate, cfg_.attack.epochs.value_or(cfg_.local_epochs), cfg_.batch_size,
                       derive_seed({cfg_.seed, tag(Stream::adversary), t})};
  ParamVector next = adv.history + train_sgd(adv.model, adv.data, tc).params();
  adv.model.params() = next - adv.history;
  adv.history = std::move(next);

  for (std::size_t k = 0; k < adv.sybils.size(); ++k) {
    const NodeId s = adv.sybils[k];
    if (trace_) trace_->trained[{s, t}] = adv.model.params();
    const auto own = sign_history(*scheme_, s, t, adv.history);
    for (NodeId j : topology_.neighbors(s)) {
      std::optional<HistoryRecord> selected;
      if (cfg_.attack.sybils_gossip) {
        Rng rng = make_rng({cfg_.seed, tag(Stream::gossip), s, t, j});
        selected = select_gossip(filter_db(adv.dbs[k], s, j), cfg_.lambda, rng);
      }
      out.push_back({s, j, compose_message(own, selected),
                     selected ? std::optional<NodeId>(selected->forwarder) : std::nullopt});
    }
  }
}

RoundMetrics Simulation::step() {
  const std::uint32_t t = round_;
  std::vector<std::vector<const Envelope*>> inbox(topology_.node_count());
  for (const auto& env : outbox_) inbox[env.to].push_back(&env);

  std::vector<NodeOutput> outs(nodes_.size());
  parallel_for(nodes_.size(), cfg_.workers, [&](std::size_t i) { outs[i] = step_honest(nodes_[i], inbox[i], t); });

  std::vector<Envelope> next;
  RoundMetrics m;
  m.round = t;
  double acc = 0.0;
  double atk = 0.0;
  for (auto& o : outs) {
    acc += o.accuracy;
    if (o.attack) atk += *o.attack;
    for (auto& env : o.out) next.push_back(std::move(env));
    if (trace_) {
      trace_->rejected += o.rejected;
      for (auto& inf : o.inferences) trace_->inferences.push_back(std::move(inf));
      if (o.aggregation) trace_->aggregations.push_back(*o.aggregation);
    }
  }
  if (trace_) {
    for (std::size_t i = 0; i < outs.size(); ++i) {
      if (outs[i].trained) trace_->trained[{static_cast<NodeId>(i), t}] = std::move(*outs[i].trained);
    }
  }
  if (adversary_) step_adversary(inbox, t, next);

  const auto n = static_cast<double>(nodes_.size());
  m.mean_accuracy = acc / n;
  if (attack_segment_) m.mean_attack_score = atk / n;
  m.messages = next.size();
  if (trace_) {
    for (const auto& env : next) {
      trace_->headers.push_back({t, env.from, env.to, env.msg.own->origin,
                                 env.msg.gossiped ? std::optional<NodeId>(env.msg.gossiped->origin)
                                                  : std::nullopt,
                                 env.forwarder, env.msg.gossip_distance});
    }
  }
  outbox_ = std::move(next);
  ++round_;
  return m;
}

std::vector<RoundMetrics> Simulation::run() {
  std::vector<RoundMetrics> out;
  out.reserve(cfg_.rounds);
  while (round_ < cfg_.rounds) out.push_back(step());
  return out;
}

std::vector<RoundMetrics> run_simulation(const SimulationConfig& cfg, SimulationTrace* trace) {
  Simulation sim(cfg, trace);
  return sim.run();
}

RoundMetrics collect_metrics(const std::vector<const Model*>& models, const LabeledDataset& test,
                             const std::optional<AttackSpec>& attack) {
  if (models.empty()) throw InvalidInput("collect_metrics: no models");
  RoundMetrics m;
  std::optional<LabeledDataset> segment;
  if (attack) segment = attack_segment(test, *attack);
  double acc = 0.0;
  double atk = 0.0;
  for (const Model* model : models) {
    acc += evaluate_accuracy(*model, test);
    if (segment) atk += evaluate_accuracy(*model, *segment);
  }
  m.mean_accuracy = acc / static_cast<double>(models.size());
  if (segment) m.mean_attack_score = atk / static_cast<double>(models.size());
  return m;
}

std::string metrics_csv_line(const RoundMetrics& m) {
  char buf[96];
  if (m.mean_attack_score) {
    std::snprintf(buf, sizeof buf, "%u,%.6f,%.6f", m.round, m.mean_accuracy, *m.mean_attack_score);
  } else {
    std::snprintf(buf, sizeof buf, "%u,%.6f,nan", m.round, m.mean_accuracy);
  }
  return buf;
}

void write_metrics_csv(std::ostream& os, const std::vector<RoundMetrics>& metrics) {
  os << "round,mean_accuracy,mean_attack_score\n";
  for (const auto& m : metrics) os << metrics_csv_line(m) << '\n';
}

}  // namespace sybilwall
