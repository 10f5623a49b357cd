#include "sybilwall/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <string>

#include "sybilwall/errors.hpp"
#include "sybilwall/numerics.hpp"

namespace sybilwall {

namespace {
constexpr double kCloneResidue = 1e-12;
}  // namespace

void ContributionSet::validate() const {
  const std::size_t len = own.model.size();
  if (len == 0) throw InvalidInput("ContributionSet: empty own model");
  std::set<NodeId> ids{own.id};
  auto check = [&](const ParamVector& v, NodeId id) {
    if (v.size() != len) {
      throw InvalidInput("ContributionSet: vector of node " + std::to_string(id) + " has length " +
                         std::to_string(v.size()) + ", expected " + std::to_string(len));
    }
  };
  check(own.history, own.id);
  for (const auto& d : direct) {
    check(d.model, d.id);
    check(d.history, d.id);
    if (!ids.insert(d.id).second) throw InvalidInput("ContributionSet: duplicate node id " + std::to_string(d.id));
  }
  for (const auto& h : indirect) {
    check(h.history, h.id);
    if (!ids.insert(h.id).second) throw InvalidInput("ContributionSet: duplicate node id " + std::to_string(h.id));
  }
}

double ScoreVector::weight_of(NodeId id) const {
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] == id) return weights[i];
  }
  throw InvalidInput("ScoreVector: unknown node " + std::to_string(id));
}

double ScoreVector::total() const { return std::accumulate(weights.begin(), weights.end(), 0.0); }

ScoreVector ScoreVector::normalized() const {
  const double sum = total();
  if (!(sum > 0.0)) throw InvalidInput("ScoreVector: cannot normalize zero weights");
  ScoreVector out = *this;
  for (double& w : out.weights) w /= sum;
  return out;
}

ParamVector fedavg(const std::vector<SizedModel>& models) {
  if (models.empty()) throw InvalidInput("fedavg: no models");
  double total = 0.0;
  for (const auto& m : models) {
    if (!(m.sample_count > 0.0)) throw InvalidInput("fedavg: sample counts must be positive");
    require_same_size(m.model, models.front().model, "fedavg");
    total += m.sample_count;
  }
  ParamVector out(models.front().model.size());
  for (const auto& m : models) axpy(m.sample_count / total, m.model, out);
  return out;
}

ScoreVector foolsgold_scores(const std::vector<NodeHistory>& histories, const FoolsGoldParams& params) {
  const std::size_t n = histories.size();
  if (n < 2) throw InvalidInput("foolsgold_scores: need at least 2 histories");
  for (const auto& h : histories) require_same_size(h.history, histories.front().history, "foolsgold_scores");

  std::vector<std::vector<double>> sim(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      sim[i][j] = sim[j][i] = cosine_similarity(histories[i].history, histories[j].history);
    }
  }
  std::vector<double> row_max(n, -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) row_max[i] = std::max(row_max[i], sim[i][j]);
    }
  }

  // Pardoning against the pre-pardon maxima, only between positive maxima
  // so the factor stays in (0, 1).
  std::vector<std::vector<double>> pardoned = sim;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j && row_max[i] > 0.0 && row_max[i] < row_max[j]) {
        pardoned[i][j] = sim[i][j] * row_max[i] / row_max[j];
      }
    }
  }

  std::vector<double> score(n);
  for (std::size_t i = 0; i < n; ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j) {
      if (i != j) m = std::max(m, pardoned[i][j]);
    }
    score[i] = std::clamp(1.0 - m, 0.0, 1.0);
    // Rounding residue of an exact clone counts as zero.
    if (score[i] < kCloneResidue) score[i] = 0.0;
  }

  const std::size_t prefix = params.rescale_count == 0 ? n : std::min(params.rescale_count, n);
  const double top = *std::max_element(score.begin(), score.begin() + static_cast<std::ptrdiff_t>(prefix));
  if (top > 0.0) {
    for (double& s : score) s /= top;
  }

  ScoreVector out;
  out.ids.reserve(n);
  out.weights.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double x = std::clamp(score[i], params.logit_clip, 1.0 - params.logit_clip);
    const double w = params.kappa * (std::log(x / (1.0 - x)) + params.logit_offset);
    out.ids.push_back(histories[i].id);
    out.weights.push_back(std::clamp(w, 0.0, 1.0));
  }
  return out;
}

ParamVector weighted_average(const std::vector<const ParamVector*>& models,
                             const std::vector<double>& weights) {
  if (models.empty() || models.size() != weights.size()) {
    throw InvalidInput("weighted_average: " + std::to_string(models.size()) + " models vs " +
                       std::to_string(weights.size()) + " weights");
  }
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0)) throw InvalidInput("weighted_average: negative weight");
    total += w;
  }
  if (!(total > 0.0)) throw InvalidInput("weighted_average: weights sum to zero");
  ParamVector out(models.front()->size());
  for (std::size_t i = 0; i < models.size(); ++i) {
    if (weights[i] > 0.0) axpy(weights[i] / total, *models[i], out);
  }
  return out;
}

std::vector<double> krum_score(const std::vector<ParamVector>& models, std::size_t f) {
  const std::size_t n = models.size();
  if (n < f + 3) {
    throw InvalidInput("krum: need n >= f + 3 models (n=" + std::to_string(n) + ", f=" +
                       std::to_string(f) + ")");
  }
  for (const auto& m : models) require_same_size(m, models.front(), "krum");
  std::vector<std::vector<double>> d2(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) d2[i][j] = d2[j][i] = squared_distance(models[i], models[j]);
  }
  const std::size_t nearest = n - f - 2;
  std::vector<double> scores(n);
  std::vector<double> row;
  for (std::size_t i = 0; i < n; ++i) {
    row.clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) row.push_back(d2[i][j]);
    }
    std::partial_sort(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(nearest), row.end());
    scores[i] = std::accumulate(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(nearest), 0.0);
  }
  return scores;
}

namespace {

std::vector<std::size_t> rank_by_score(const std::vector<double>& scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  return order;
}

}  // namespace

std::size_t krum_select_index(const std::vector<ParamVector>& models, std::size_t f) {
  return rank_by_score(krum_score(models, f)).front();
}

ParamVector krum_select(const std::vector<ParamVector>& models, std::size_t f) {
  return models[krum_select_index(models, f)];
}

ParamVector multi_krum(const std::vector<ParamVector>& models, std::size_t f, std::size_t m) {
  const auto scores = krum_score(models, f);
  if (m < 1 || m > models.size()) {
    throw InvalidInput("multi_krum: m=" + std::to_string(m) + " must be in [1, " +
                       std::to_string(models.size()) + "]");
  }
  const auto order = rank_by_score(scores);
  ParamVector out(models.front().size());
  for (std::size_t k = 0; k < m; ++k) out += models[order[k]];
  out *= 1.0 / static_cast<double>(m);
  return out;
}

ParamVector coordinate_median(const std::vector<ParamVector>& models) {
  if (models.empty()) throw InvalidInput("coordinate_median: no models");
  for (const auto& m : models) require_same_size(m, models.front(), "coordinate_median");
  const std::size_t n = models.size();
  ParamVector out(models.front().size());
  std::vector<double> column(n);
  for (std::size_t k = 0; k < out.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) column[i] = models[i][k];
    std::sort(column.begin(), column.end());
    out[k] = n % 2 == 1 ? column[n / 2] : 0.5 * (column[n / 2 - 1] + column[n / 2]);
  }
  return out;
}

SybilWallScores sybilwall_scores(const ContributionSet& c, const FoolsGoldParams& params) {
  c.validate();
  if (c.direct.empty()) throw InvalidInput("sybilwall: no direct neighbour contributed a model");

  std::vector<NodeHistory> others;
  others.reserve(c.direct.size() + c.indirect.size());
  for (const auto& d : c.direct) others.push_back({d.id, d.history});
  for (const auto& h : c.indirect) others.push_back(h);

  SybilWallScores out;
  out.weights.ids.push_back(c.own.id);
  out.weights.weights.push_back(1.0);
  if (others.size() == 1) {
    // Nothing to compare against.
    out.degenerate = true;
    out.weights.ids.push_back(c.direct.front().id);
    out.weights.weights.push_back(0.5);
    return out;
  }

  // Only direct weights are kept, so the rescaling maximum comes from them.
  FoolsGoldParams p = params;
  p.rescale_count = c.direct.size();
  const ScoreVector all = foolsgold_scores(others, p);
  double retained_max = 0.0;
  for (std::size_t i = 0; i < c.direct.size(); ++i) {
    out.weights.ids.push_back(all.ids[i]);
    out.weights.weights.push_back(all.weights[i]);
    retained_max = std::max(retained_max, all.weights[i]);
  }
  out.weights.weights.front() = std::max(retained_max, 1.0);
  return out;
}

namespace {

std::vector<const ParamVector*> own_and_direct_models(const ContributionSet& c) {
  std::vector<const ParamVector*> models{&c.own.model};
  for (const auto& d : c.direct) models.push_back(&d.model);
  return models;
}

void check_weights(const ContributionSet& c, const ScoreVector& weights) {
  if (weights.size() != c.direct.size() + 1) {
    throw InvalidInput("expected " + std::to_string(c.direct.size() + 1) + " weights, got " +
                       std::to_string(weights.size()));
  }
}

}  // namespace

ParamVector sybilwall_aggregate(const ContributionSet& c, const FoolsGoldParams& params) {
  const auto scores = sybilwall_scores(c, params);
  return weighted_average(own_and_direct_models(c), scores.weights.weights);
}

ParamVector enhance_median(const ContributionSet& c, const ScoreVector& weights) {
  check_weights(c, weights);
  const auto models = own_and_direct_models(c);
  std::vector<std::size_t> order(models.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return weights.weights[a] > weights.weights[b];
  });
  const std::size_t keep = (models.size() + 1) / 2;
  std::vector<ParamVector> top;
  top.reserve(keep);
  for (std::size_t k = 0; k < keep; ++k) top.push_back(*models[order[k]]);
  return coordinate_median(top);
}

ParamVector enhance_weighted_median(const ContributionSet& c, const ScoreVector& weights) {
  check_weights(c, weights);
  const auto models = own_and_direct_models(c);
  const double total = weights.total();
  if (!(total > 0.0)) throw InvalidInput("enhance_weighted_median: weights sum to zero");
  const std::size_t n = models.size();
  ParamVector out(models.front()->size());
  std::vector<std::pair<double, double>> column(n);
  for (std::size_t k = 0; k < out.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) column[i] = {(*models[i])[k], weights.weights[i]};
    std::sort(column.begin(), column.end());
    double cumulative = 0.0;
    for (const auto& [value, w] : column) {
      cumulative += w;
      if (cumulative >= 0.5 * total) {
        out[k] = value;
        break;
      }
    }
  }
  return out;
}

ParamVector enhance_krum_filter(const ContributionSet& c, const ScoreVector& weights) {
  check_weights(c, weights);
  const auto models = own_and_direct_models(c);
  constexpr std::size_t f = 1;
  if (models.size() < f + 3) return weighted_average(models, weights.weights);
  std::vector<ParamVector> copies;
  copies.reserve(models.size());
  for (const auto* m : models) copies.push_back(*m);
  std::vector<double> filtered = weights.weights;
  filtered[krum_select_index(copies, f)] = 0.0;
  if (!(std::accumulate(filtered.begin(), filtered.end(), 0.0) > 0.0)) {
    return weighted_average(models, weights.weights);
  }
  return weighted_average(models, filtered);
}

const std::vector<AggregatorKind>& all_aggregators() {
  static const std::vector<AggregatorKind> kinds = {
      AggregatorKind::fedavg,           AggregatorKind::foolsgold,
      AggregatorKind::krum,             AggregatorKind::multikrum,
      AggregatorKind::median,           AggregatorKind::sybilwall,
      AggregatorKind::sybilwall_median, AggregatorKind::sybilwall_wmedian,
      AggregatorKind::sybilwall_krumfilter,
  };
  return kinds;
}

std::string to_string(AggregatorKind kind) {
  switch (kind) {
    case AggregatorKind::fedavg: return "fedavg";
    case AggregatorKind::foolsgold: return "foolsgold";
    case AggregatorKind::krum: return "krum";
    case AggregatorKind::multikrum: return "multikrum";
    case AggregatorKind::median: return "median";
    case AggregatorKind::sybilwall: return "sybilwall";
    case AggregatorKind::sybilwall_median: return "sybilwall+median";
    case AggregatorKind::sybilwall_wmedian: return "sybilwall+wmedian";
    case AggregatorKind::sybilwall_krumfilter: return "sybilwall+krumfilter";
  }
  return "unknown";
}

std::optional<AggregatorKind> parse_aggregator(const std::string& name) {
  for (AggregatorKind k : all_aggregators()) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

AggregationOutcome aggregate(AggregatorKind kind, const AggregatorParams& params,
                             const ContributionSet& c, const std::vector<double>& sample_counts) {
  if (c.direct.empty()) return {c.own.model, false};
  const auto models = own_and_direct_models(c);
  const std::size_t n = models.size();

  auto copies = [&] {
    std::vector<ParamVector> out;
    out.reserve(n);
    for (const auto* m : models) out.push_back(*m);
    return out;
  };

  switch (kind) {
    case AggregatorKind::fedavg: {
      if (sample_counts.size() != n) {
        throw InvalidInput("aggregate: expected " + std::to_string(n) + " sample counts");
      }
      std::vector<SizedModel> sized;
      for (std::size_t i = 0; i < n; ++i) {
        if (sample_counts[i] > 0.0) sized.push_back({*models[i], sample_counts[i]});
      }
      if (sized.empty()) return {weighted_average(models, std::vector<double>(n, 1.0)), false};
      return {fedavg(sized), false};
    }
    case AggregatorKind::foolsgold: {
      std::vector<NodeHistory> hist{{c.own.id, c.own.history}};
      for (const auto& d : c.direct) hist.push_back({d.id, d.history});
      const auto scores = foolsgold_scores(hist, params.foolsgold);
      if (!(scores.total() > 0.0)) return {c.own.model, false};
      return {weighted_average(models, scores.weights), false};
    }
    case AggregatorKind::krum:
    case AggregatorKind::multikrum: {
      if (n < 3) return {c.own.model, false};
      const std::size_t f = params.krum_f.value_or((n - 3) / 2);
      if (n < f + 3) return {c.own.model, false};
      if (kind == AggregatorKind::krum) return {krum_select(copies(), f), false};
      const std::size_t m = std::min(n, params.multikrum_m.value_or((n + 1) / 2));
      return {multi_krum(copies(), f, std::max<std::size_t>(m, 1)), false};
    }
    case AggregatorKind::median:
      return {coordinate_median(copies()), false};
    case AggregatorKind::sybilwall:
    case AggregatorKind::sybilwall_median:
    case AggregatorKind::sybilwall_wmedian:
    case AggregatorKind::sybilwall_krumfilter: {
      const auto scores = sybilwall_scores(c, params.foolsgold);
      ParamVector out;
      if (kind == AggregatorKind::sybilwall) {
        out = weighted_average(models, scores.weights.weights);
      } else if (kind == AggregatorKind::sybilwall_median) {
        out = enhance_median(c, scores.weights);
      } else if (kind == AggregatorKind::sybilwall_wmedian) {
        out = enhance_weighted_median(c, scores.weights);
      } else {
        out = enhance_krum_filter(c, scores.weights);
      }
      return {std::move(out), scores.degenerate};
    }
  }
  throw InvalidInput("aggregate: unknown rule");
}

}  // namespace sybilwall
