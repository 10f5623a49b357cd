#include "sybilwall/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <sstream>

#include "sybilwall/config.hpp"
#include "sybilwall/engine.hpp"
#include "sybilwall/errors.hpp"
#include "sybilwall/rng.hpp"

#ifndef SYBILWALL_GIT_DESCRIBE
#define SYBILWALL_GIT_DESCRIBE "unknown"
#endif

namespace sybilwall {

namespace {

constexpr int kOk = 0;
constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> out_dir;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config, "JSON config file")->required();
  cmd->add_option("--seed", f.seed, "override the config seed");
  cmd->add_option("--workers", f.workers, "worker threads per round")->check(CLI::PositiveNumber);
  cmd->add_option("--out-dir", f.out_dir, "output directory");
}

RunConfig load(const CommonFlags& f) {
  RunConfig cfg = load_config(f.config);
  apply_env_overrides(cfg);
  if (f.seed) cfg.sim.seed = *f.seed;
  if (f.workers) cfg.sim.workers = *f.workers;
  if (f.out_dir) cfg.output.dir = *f.out_dir;
  validate_config(cfg.sim);
  return cfg;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary);
  os << text;
  if (!os) throw std::runtime_error("cannot write " + path.string());
}

std::vector<RoundMetrics> run_and_write(const RunConfig& cfg, const std::filesystem::path& dir) {
  const auto metrics = run_simulation(cfg.sim);
  std::ostringstream csv;
  write_metrics_csv(csv, metrics);
  write_file(dir / cfg.output.csv, csv.str());
  const nlohmann::json manifest = {{"config", config_to_json(cfg)},
                                   {"seed", cfg.sim.seed},
                                   {"git_describe", SYBILWALL_GIT_DESCRIBE}};
  write_file(dir / cfg.output.manifest, manifest.dump(2) + "\n");
  return metrics;
}

void apply_axis(RunConfig& cfg, const std::string& axis, const std::string& value) {
  const std::string path = "--values";
  if (axis == "aggregator") {
    const auto kind = parse_aggregator(value);
    if (!kind) throw ConfigError(path, "unknown aggregator '" + value + "'");
    cfg.sim.aggregator = *kind;
    return;
  }
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != value.size()) throw ConfigError(path, "'" + value + "' is not a number");
  if (axis == "phi") {
    cfg.sim.attack.phi = v;
  } else {
    cfg.sim.alpha = v;
  }
}

int cmd_run(const CommonFlags& f, std::ostream& out) {
  const RunConfig cfg = load(f);
  const auto metrics = run_and_write(cfg, cfg.output.dir);
  out << "wrote " << (cfg.output.dir / cfg.output.csv).string() << " (" << metrics.size() << " rounds); final "
      << metrics_csv_line(metrics.back()) << "\n";
  return kOk;
}

int cmd_sweep(const CommonFlags& f, const std::string& axis, const std::vector<std::string>& values,
              std::ostream& out) {
  const RunConfig base = load(f);
  std::vector<RunConfig> runs;
  for (const auto& v : values) {
    RunConfig cfg = base;
    apply_axis(cfg, axis, v);
    try {
      validate_config(cfg.sim);
    } catch (const ConfigError& e) {
      throw ConfigError("--values", "value '" + v + "': " + e.what());
    }
    runs.push_back(std::move(cfg));
  }
  std::string summary = axis + ",round,mean_accuracy,mean_attack_score\n";
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const auto dir = base.output.dir / (axis + "=" + values[i]);
    const auto metrics = run_and_write(runs[i], dir);
    summary += values[i] + "," + metrics_csv_line(metrics.back()) + "\n";
    out << axis << "=" << values[i] << ": " << metrics_csv_line(metrics.back()) << "\n";
  }
  write_file(base.output.dir / "summary.csv", summary);
  return kOk;
}

int cmd_topology(const CommonFlags& f, std::ostream& out) {
  const RunConfig cfg = load(f);
  const auto& c = cfg.sim;
  SSPPlan plan;
  const double phi = c.has_sybils() ? c.attack.phi : 0.0;
  const Topology g = build_attacked_network(c.honest_nodes, c.radius, c.degree_bound, phi,
                                            derive_seed({c.seed, tag(Stream::topology)}), &plan);
  write_file(cfg.output.dir / "topology.json", topology_to_json(g).dump(2) + "\n");
  write_file(cfg.output.dir / "attack_plan.json", plan_to_json(plan).dump(2) + "\n");
  out << "scenario: " << to_string(classify_scenario(c.attack.phi)) << "\n"
      << "honest nodes: " << g.honest_count() << ", sybils: " << g.sybil_count() << ", edges: " << g.edge_count()
      << ", attack edges: " << plan.attack_edges.size() << "\n";
  return kOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Decentralized learning simulator with Sybil poisoning and similarity-based defences", "sybilwall"};
  app.require_subcommand(1);

  CommonFlags run_flags, sweep_flags, topo_flags, validate_flags;
  auto* run = app.add_subcommand("run", "run one simulation and write metrics CSV plus manifest");
  add_common(run, run_flags);

  auto* sweep = app.add_subcommand("sweep", "run one simulation per value of an axis");
  add_common(sweep, sweep_flags);
  std::string axis;
  std::vector<std::string> values;
  sweep->add_option("--axis", axis, "phi, alpha or aggregator")
      ->required()
      ->check(CLI::IsMember({"phi", "alpha", "aggregator"}));
  sweep->add_option("--values", values, "comma separated values")->required()->delimiter(',');

  auto* topo = app.add_subcommand("topology", "write the attacked topology and attack plan as JSON");
  add_common(topo, topo_flags);

  auto* validate = app.add_subcommand("validate", "parse and validate a config");
  add_common(validate, validate_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kConfigError;
  }

  try {
    if (run->parsed()) return cmd_run(run_flags, out);
    if (sweep->parsed()) return cmd_sweep(sweep_flags, axis, values, out);
    if (topo->parsed()) return cmd_topology(topo_flags, out);
    load(validate_flags);
    out << "ok\n";
    return kOk;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kConfigError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kRuntimeError;
  }
}

}  // namespace sybilwall
