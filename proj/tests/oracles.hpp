#pragma once

// Independent reference implementations used by the unit and acceptance
// tests. They favour exhaustive search and plain loops over speed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "sybilwall/aggregation.hpp"
#include "sybilwall/rng.hpp"

namespace oracle {

using sybilwall::NodeHistory;
using sybilwall::ParamVector;

inline double sq_dist(const ParamVector& a, const ParamVector& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

// Minimum over every (n - f - 2)-subset of the other models.
inline std::vector<double> krum_scores(const std::vector<ParamVector>& m, std::size_t f) {
  const std::size_t n = m.size();
  const std::size_t take = n - f - 2;
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> others;
    for (std::size_t j = 0; j < n; ++j)
      if (j != i) others.push_back(j);
    std::vector<char> pick(others.size(), 0);
    std::fill(pick.end() - static_cast<std::ptrdiff_t>(take), pick.end(), 1);
    double best = std::numeric_limits<double>::infinity();
    do {
      double s = 0.0;
      for (std::size_t k = 0; k < others.size(); ++k)
        if (pick[k]) s += sq_dist(m[i], m[others[k]]);
      best = std::min(best, s);
    } while (std::next_permutation(pick.begin(), pick.end()));
    out[i] = best;
  }
  return out;
}

inline std::size_t krum_index(const std::vector<ParamVector>& m, std::size_t f) {
  const auto s = krum_scores(m, f);
  std::size_t best = 0;
  for (std::size_t i = 1; i < s.size(); ++i)
    if (s[i] < s[best]) best = i;
  return best;
}

// Mean of the m-subset with the smallest total score; the first such subset
// in index order wins ties. Totals summed in different orders are compared
// with a relative tolerance so equal scores still tie.
inline ParamVector multi_krum(const std::vector<ParamVector>& models, std::size_t f, std::size_t m) {
  const auto s = krum_scores(models, f);
  const std::size_t n = models.size();
  std::vector<char> pick(n, 0);
  std::fill(pick.begin(), pick.begin() + static_cast<std::ptrdiff_t>(m), 1);
  double best = std::numeric_limits<double>::infinity();
  std::vector<char> best_pick;
  do {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (pick[i]) total += s[i];
    if (best_pick.empty() || total < best - 1e-12 * std::max(1.0, std::abs(best))) {
      best = total;
      best_pick = pick;
    }
  } while (std::prev_permutation(pick.begin(), pick.end()));
  ParamVector out(models.front().size());
  for (std::size_t i = 0; i < n; ++i)
    if (best_pick[i])
      for (std::size_t k = 0; k < out.size(); ++k) out[k] += models[i][k] / static_cast<double>(m);
  return out;
}

inline ParamVector median(const std::vector<ParamVector>& models) {
  ParamVector out(models.front().size());
  for (std::size_t k = 0; k < out.size(); ++k) {
    std::vector<double> col;
    for (const auto& m : models) col.push_back(m[k]);
    std::sort(col.begin(), col.end());
    const std::size_t n = col.size();
    out[k] = (col[(n - 1) / 2] + col[n / 2]) / 2.0;
  }
  return out;
}

inline double cosine(const ParamVector& a, const ParamVector& b) {
  double ab = 0.0, aa = 0.0, bb = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    ab += a[k] * b[k];
    aa += a[k] * a[k];
    bb += b[k] * b[k];
  }
  if (aa == 0.0 || bb == 0.0) return 0.0;
  return ab / std::sqrt(aa * bb);
}

// FoolsGold weights, one stage at a time. `rescale_prefix` = 0 rescales by
// the overall maximum.
inline std::vector<double> foolsgold(const std::vector<NodeHistory>& h, double kappa = 1.0,
                                     std::size_t rescale_prefix = 0) {
  const std::size_t n = h.size();

  // Stage 1: pairwise cosine similarity, diagonal unused.
  std::vector<std::vector<double>> cs(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j) cs[i][j] = cosine(h[i].history, h[j].history);

  // Stage 2: row maxima before pardoning.
  std::vector<double> maxcs(n);
  for (std::size_t i = 0; i < n; ++i) {
    double m = -2.0;
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && cs[i][j] > m) m = cs[i][j];
    maxcs[i] = m;
  }

  // Stage 3: pardoning, only between positive row maxima.
  auto pardoned = cs;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && maxcs[i] > 0.0 && maxcs[j] > 0.0 && maxcs[i] < maxcs[j]) pardoned[i][j] = cs[i][j] * maxcs[i] / maxcs[j];

  // Stage 4: complement of the row maximum, clipped to [0, 1]; values below
  // 1e-12 are cosine rounding noise and become 0.
  std::vector<double> wv(n);
  for (std::size_t i = 0; i < n; ++i) {
    double m = -2.0;
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && pardoned[i][j] > m) m = pardoned[i][j];
    wv[i] = std::min(1.0, std::max(0.0, 1.0 - m));
    if (wv[i] < 1e-12) wv[i] = 0.0;
  }

  // Stage 5: rescale.
  const std::size_t p = rescale_prefix == 0 ? n : rescale_prefix;
  double top = 0.0;
  for (std::size_t i = 0; i < p; ++i) top = std::max(top, wv[i]);
  if (top > 0.0)
    for (auto& w : wv) w = w / top;

  // Stage 6: bounded logit, then clip.
  for (auto& w : wv) {
    double x = w;
    if (x < 1e-5) x = 1e-5;
    if (x > 1.0 - 1e-5) x = 1.0 - 1e-5;
    double y = kappa * (std::log(x) - std::log(1.0 - x) + 0.5);
    w = std::min(1.0, std::max(0.0, y));
  }
  return wv;
}

inline ParamVector gaussian_vector(std::size_t dim, sybilwall::Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  ParamVector v(dim);
  for (auto& x : v) x = normal(rng);
  return v;
}

// k identical histories followed by `honest` random ones whose pairwise
// cosine (with each other and with the clone) stays below 0.5.
struct CloneFixture {
  std::vector<NodeHistory> histories;
  std::size_t clones = 0;
};

inline CloneFixture clone_fixture(std::size_t clones, std::size_t honest, std::size_t dim, sybilwall::Rng& rng) {
  CloneFixture fx;
  fx.clones = clones;
  std::vector<ParamVector> distinct;
  while (distinct.size() < honest + 1) {
    auto v = gaussian_vector(dim, rng);
    bool ok = true;
    for (const auto& d : distinct) ok = ok && cosine(v, d) < 0.5;
    if (ok) distinct.push_back(std::move(v));
  }
  sybilwall::NodeId id = 0;
  for (std::size_t k = 0; k < clones; ++k) fx.histories.push_back({id++, distinct[0]});
  for (std::size_t k = 1; k < distinct.size(); ++k) fx.histories.push_back({id++, distinct[k]});
  return fx;
}

}  // namespace oracle
