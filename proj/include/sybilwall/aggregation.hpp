#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "sybilwall/param_vector.hpp"
#include "sybilwall/topology.hpp"

namespace sybilwall {

struct NodeHistory {
  NodeId id = 0;
  ParamVector history;
};

struct Contribution {
  NodeId id = 0;
  ParamVector model;
  ParamVector history;
};

/// Inputs to one node's aggregation: its own model and history, direct
/// neighbours whose trained model is known this round, and histories that
/// only take part in similarity scoring.
struct ContributionSet {
  Contribution own;
  std::vector<Contribution> direct;
  std::vector<NodeHistory> indirect;

  // Equal vector lengths and distinct ids; throws InvalidInput.
  void validate() const;
};

/// Per-node weights in input order.
struct ScoreVector {
  std::vector<NodeId> ids;
  std::vector<double> weights;

  std::size_t size() const noexcept { return ids.size(); }
  double weight_of(NodeId id) const;
  double total() const;
  // Scaled to sum to 1; throws InvalidInput when the total is zero.
  ScoreVector normalized() const;
};

struct FoolsGoldParams {
  double kappa = 1.0;          // logit slope
  double logit_offset = 0.5;   // added after the logit
  double logit_clip = 1e-5;    // inputs clipped to [clip, 1 - clip]
  // When nonzero, only the first `rescale_count` scores set the rescaling
  // maximum; later entries still take part in similarity.
  std::size_t rescale_count = 0;
};

// Sample-count weighted average.
struct SizedModel {
  ParamVector model;
  double sample_count = 0.0;
};
ParamVector fedavg(const std::vector<SizedModel>& models);

// Unnormalized FoolsGold weights in [0, 1]: pairwise cosine, pardoning,
// 1 - max, rescale to max 1, bounded logit, clip.
ScoreVector foolsgold_scores(const std::vector<NodeHistory>& histories, const FoolsGoldParams& params = {});

// Weighted average by `weights`; throws InvalidInput on mismatch or zero total.
ParamVector weighted_average(const std::vector<const ParamVector*>& models,
                             const std::vector<double>& weights);

// Sum of squared distances to the n - f - 2 nearest other models.
std::vector<double> krum_score(const std::vector<ParamVector>& models, std::size_t f);
std::size_t krum_select_index(const std::vector<ParamVector>& models, std::size_t f);
ParamVector krum_select(const std::vector<ParamVector>& models, std::size_t f);
ParamVector multi_krum(const std::vector<ParamVector>& models, std::size_t f, std::size_t m);

// Even counts take the mean of the two middle values.
ParamVector coordinate_median(const std::vector<ParamVector>& models);

struct SybilWallScores {
  ScoreVector weights;  // own first, then direct neighbours in input order
  bool degenerate = false;
};

// Own model excluded from similarity and reinserted at max(retained, 1.0);
// indirect histories only shape the direct neighbours' scores.
SybilWallScores sybilwall_scores(const ContributionSet& c, const FoolsGoldParams& params = {});

ParamVector sybilwall_aggregate(const ContributionSet& c, const FoolsGoldParams& params = {});

// Chained replacements for the final weighted average. `weights` follows
// sybilwall_scores ordering (own, then direct).
ParamVector enhance_median(const ContributionSet& c, const ScoreVector& weights);
ParamVector enhance_weighted_median(const ContributionSet& c, const ScoreVector& weights);
ParamVector enhance_krum_filter(const ContributionSet& c, const ScoreVector& weights);

enum class AggregatorKind {
  fedavg,
  foolsgold,
  krum,
  multikrum,
  median,
  sybilwall,
  sybilwall_median,
  sybilwall_wmedian,
  sybilwall_krumfilter,
};

const std::vector<AggregatorKind>& all_aggregators();
std::string to_string(AggregatorKind kind);
std::optional<AggregatorKind> parse_aggregator(const std::string& name);

struct AggregatorParams {
  FoolsGoldParams foolsgold;
  std::optional<std::size_t> krum_f;       // default floor((n - 3) / 2)
  std::optional<std::size_t> multikrum_m;  // default ceil(n / 2)
};

struct AggregationOutcome {
  ParamVector model;
  bool degenerate = false;
};

// Dispatches one aggregation rule. `sample_counts` is indexed like
// (own, direct...) and only consulted by fedavg. Falls back to the own model
// when no direct neighbour contributed a model.
AggregationOutcome aggregate(AggregatorKind kind, const AggregatorParams& params,
                             const ContributionSet& c, const std::vector<double>& sample_counts);

}  // namespace sybilwall
