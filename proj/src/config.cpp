#include "sybilwall/config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "sybilwall/errors.hpp"

namespace sybilwall {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) {
  return path.empty() ? key : path + "." + key;
}

/// Typed access to one JSON object that remembers its field path and
/// rejects keys nobody asked for.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const std::string& key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  void mark(const std::string& key) { seen_.insert(key); }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  void read(const std::string& key, T& out) {
    seen_.insert(key);
    if (!has(key)) return;
    out = convert<T>(j_.at(key), join(path_, key));
  }

  template <typename T>
  void read(const std::string& key, std::optional<T>& out) {
    seen_.insert(key);
    if (!has(key)) return;
    out = convert<T>(j_.at(key), join(path_, key));
  }

  template <typename T>
  T required(const std::string& key) {
    seen_.insert(key);
    if (!has(key)) throw ConfigError(join(path_, key), "required field is missing");
    return convert<T>(j_.at(key), join(path_, key));
  }

  Section child(const std::string& key) {
    seen_.insert(key);
    static const json empty = json::object();
    return Section(has(key) ? j_.at(key) : empty, join(path_, key));
  }

  void finish() const {
    for (const auto& [key, value] : j_.items()) {
      if (!seen_.count(key)) throw ConfigError(join(path_, key), "unknown field");
    }
  }

  const std::string& path() const { return path_; }

  template <typename T>
  static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(path, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(path, "expected a number");
      return v.get<T>();
    } else {
      static_assert(std::is_integral_v<T>);
      if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
      if constexpr (std::is_unsigned_v<T>) {
        if (v.is_number_unsigned()) {
          const auto u = v.get<std::uint64_t>();
          if (u > std::numeric_limits<T>::max()) throw ConfigError(path, "value out of range");
          return static_cast<T>(u);
        }
        if (v.get<std::int64_t>() < 0) throw ConfigError(path, "must be >= 0");
      }
      const auto s = v.get<std::int64_t>();
      if constexpr (std::is_signed_v<T>) {
        if (s < std::numeric_limits<T>::min() || s > std::numeric_limits<T>::max()) {
          throw ConfigError(path, "value out of range");
        }
      }
      return static_cast<T>(s);
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path path(p);
  return path.is_relative() && !base.empty() ? base / path : path;
}

DataSource parse_dataset(Section s, const std::filesystem::path& base) {
  std::string kind = "blobs";
  s.read("kind", kind);
  if (kind == "blobs") {
    BlobsSource b;
    s.read("classes", b.classes);
    s.read("per_class", b.per_class);
    s.read("test_per_class", b.test_per_class);
    s.read("dim", b.dim);
    s.read("spread", b.spread);
    s.finish();
    return b;
  }
  if (kind == "idx") {
    IdxSource x;
    x.train_images = resolve(base, s.required<std::string>("train_images"));
    x.train_labels = resolve(base, s.required<std::string>("train_labels"));
    x.test_images = resolve(base, s.required<std::string>("test_images"));
    x.test_labels = resolve(base, s.required<std::string>("test_labels"));
    s.read("train_limit", x.train_limit);
    s.finish();
    return x;
  }
  throw ConfigError(join(s.path(), "kind"), "unknown dataset kind '" + kind + "' (expected blobs or idx)");
}

AttackConfig parse_attack(Section s) {
  AttackConfig a;
  std::string kind = "none";
  s.read("kind", kind);
  s.read("phi", a.phi);
  s.read("samples", a.samples);
  s.read("epochs", a.epochs);
  s.read("sybils_gossip", a.sybils_gossip);
  if (kind == "label_flip") {
    LabelFlip f{1, 7};
    s.read("t1", f.t1);
    s.read("t2", f.t2);
    a.spec = f;
  } else if (kind == "backdoor") {
    Backdoor b;
    s.read("target", b.target);
    if (s.has("pattern")) {
      const json& p = s.raw("pattern");
      const std::string path = join(s.path(), "pattern");
      if (!p.is_array()) throw ConfigError(path, "expected an array of [index, value] pairs");
      for (std::size_t i = 0; i < p.size(); ++i) {
        const std::string item = path + "[" + std::to_string(i) + "]";
        if (!p[i].is_array() || p[i].size() != 2) throw ConfigError(item, "expected [index, value]");
        b.pattern.push_back({Section::convert<std::size_t>(p[i][0], item + "[0]"),
                             Section::convert<double>(p[i][1], item + "[1]")});
      }
    } else {
      s.mark("pattern");
    }
    a.spec = b;
  } else if (kind != "none") {
    throw ConfigError(join(s.path(), "kind"),
                      "unknown attack kind '" + kind + "' (expected none, label_flip or backdoor)");
  }
  s.finish();
  return a;
}

}  // namespace

RunConfig parse_config(const json& j, const std::filesystem::path& base_dir) {
  RunConfig out;
  SimulationConfig& c = out.sim;
  Section root(j, "");
  root.read("seed", c.seed);
  root.read("rounds", c.rounds);
  root.read("workers", c.workers);
  root.read("signature", c.signature);

  c.dataset = parse_dataset(root.child("dataset"), base_dir);

  {
    auto s = root.child("partition");
    s.read("alpha", c.alpha);
    s.finish();
  }
  {
    auto s = root.child("model");
    s.read("hidden", c.hidden);
    s.read("init_scale", c.init_scale);
    s.finish();
  }
  {
    auto s = root.child("train");
    s.read("learning_rate", c.learning_rate);
    s.read("local_epochs", c.local_epochs);
    s.read("batch_size", c.batch_size);
    s.finish();
  }
  {
    auto s = root.child("topology");
    s.read("honest_nodes", c.honest_nodes);
    s.read("degree_bound", c.degree_bound);
    s.read("radius", c.radius);
    s.finish();
  }
  {
    if (!root.has("aggregator")) throw ConfigError("aggregator", "required field is missing");
    auto s = root.child("aggregator");
    const auto name = s.required<std::string>("name");
    const auto kind = parse_aggregator(name);
    if (!kind) {
      std::string names;
      for (auto k : all_aggregators()) names += (names.empty() ? "" : ", ") + to_string(k);
      throw ConfigError("aggregator.name", "unknown rule '" + name + "' (expected one of " + names + ")");
    }
    c.aggregator = *kind;
    s.read("lambda", c.lambda);
    s.read("kappa", c.aggregator_params.foolsgold.kappa);
    s.read("krum_f", c.aggregator_params.krum_f);
    s.read("multikrum_m", c.aggregator_params.multikrum_m);
    s.read("db_capacity", c.db_capacity);
    s.finish();
  }
  c.attack = parse_attack(root.child("attack"));

  if (root.has("downtime")) {
    const json& list = root.raw("downtime");
    if (!list.is_array()) throw ConfigError("downtime", "expected an array");
    for (std::size_t i = 0; i < list.size(); ++i) {
      Section s(list[i], "downtime[" + std::to_string(i) + "]");
      DowntimeWindow w;
      w.node = s.required<NodeId>("node");
      w.start = s.required<std::uint32_t>("start");
      s.read("length", w.length);
      s.finish();
      c.downtime.push_back(w);
    }
  } else {
    root.mark("downtime");
  }
  {
    auto s = root.child("output");
    std::string dir = out.output.dir.string();
    s.read("dir", dir);
    out.output.dir = dir;
    s.read("csv", out.output.csv);
    s.read("manifest", out.output.manifest);
    s.finish();
  }
  root.finish();
  validate_config(c);
  return out;
}

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("<file>", "cannot open config file " + file.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::parse_error& e) {
    throw ConfigError("<file>", std::string("invalid JSON in ") + file.string() + ": " + e.what());
  }
  return parse_config(j, file.parent_path());
}

namespace {

template <typename T>
json opt(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

json config_to_json(const RunConfig& cfg) {
  const SimulationConfig& c = cfg.sim;
  json dataset;
  if (const auto* b = std::get_if<BlobsSource>(&c.dataset)) {
    dataset = {{"kind", "blobs"},        {"classes", b->classes}, {"per_class", b->per_class},
               {"test_per_class", b->test_per_class}, {"dim", b->dim}, {"spread", b->spread}};
  } else {
    const auto& x = std::get<IdxSource>(c.dataset);
    dataset = {{"kind", "idx"},
               {"train_images", x.train_images.string()},
               {"train_labels", x.train_labels.string()},
               {"test_images", x.test_images.string()},
               {"test_labels", x.test_labels.string()},
               {"train_limit", opt(x.train_limit)}};
  }

  json attack = {{"phi", c.attack.phi},
                 {"samples", opt(c.attack.samples)},
                 {"epochs", opt(c.attack.epochs)},
                 {"sybils_gossip", c.attack.sybils_gossip}};
  if (!c.attack.spec) {
    attack["kind"] = "none";
  } else if (const auto* f = std::get_if<LabelFlip>(&*c.attack.spec)) {
    attack["kind"] = "label_flip";
    attack["t1"] = f->t1;
    attack["t2"] = f->t2;
  } else {
    const auto& b = std::get<Backdoor>(*c.attack.spec);
    attack["kind"] = "backdoor";
    attack["target"] = b.target;
    json pattern = json::array();
    for (const auto& px : b.pattern) pattern.push_back({px.index, px.value});
    attack["pattern"] = b.pattern.empty() ? json(nullptr) : pattern;
  }

  json downtime = json::array();
  for (const auto& w : c.downtime) downtime.push_back({{"node", w.node}, {"start", w.start}, {"length", w.length}});

  return {{"seed", c.seed},
          {"rounds", c.rounds},
          {"workers", c.workers},
          {"signature", c.signature},
          {"dataset", dataset},
          {"partition", {{"alpha", c.alpha}}},
          {"model", {{"hidden", c.hidden}, {"init_scale", c.init_scale}}},
          {"train",
           {{"learning_rate", c.learning_rate}, {"local_epochs", c.local_epochs}, {"batch_size", c.batch_size}}},
          {"topology", {{"honest_nodes", c.honest_nodes}, {"degree_bound", c.degree_bound}, {"radius", c.radius}}},
          {"aggregator",
           {{"name", to_string(c.aggregator)},
            {"lambda", c.lambda},
            {"kappa", c.aggregator_params.foolsgold.kappa},
            {"krum_f", opt(c.aggregator_params.krum_f)},
            {"multikrum_m", opt(c.aggregator_params.multikrum_m)},
            {"db_capacity", opt(c.db_capacity)}}},
          {"attack", attack},
          {"downtime", downtime},
          {"output",
           {{"dir", cfg.output.dir.string()}, {"csv", cfg.output.csv}, {"manifest", cfg.output.manifest}}}};
}

void apply_env_overrides(RunConfig& cfg) {
  if (const char* dir = std::getenv("SYBILWALL_OUT_DIR"); dir && *dir) cfg.output.dir = dir;
  if (const char* w = std::getenv("SYBILWALL_WORKERS"); w && *w) {
    std::size_t pos = 0;
    unsigned long v = 0;
    try {
      v = std::stoul(w, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != std::string(w).size() || v == 0) {
      throw ConfigError("SYBILWALL_WORKERS", "must be a positive integer, got '" + std::string(w) + "'");
    }
    cfg.sim.workers = v;
  }
}

}  // namespace sybilwall
