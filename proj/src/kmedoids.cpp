#include <algorithm>
#include <limits>
#include <numeric>
#include <string>

#include "sybilwall/errors.hpp"
#include "sybilwall/rng.hpp"
#include "sybilwall/topology.hpp"

namespace sybilwall {

double medoid_cost(const std::vector<std::vector<double>>& dist,
                   const std::vector<std::size_t>& medoids) {
  double total = 0.0;
  for (std::size_t i = 0; i < dist.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t m : medoids) best = std::min(best, dist[i][m]);
    total += best;
  }
  return total;
}

KMedoidsResult kmedoids(const std::vector<std::vector<double>>& dist, std::size_t k,
                        std::uint64_t seed) {
  const std::size_t n = dist.size();
  if (k < 1 || k > n) {
    throw InvalidInput("kmedoids: k=" + std::to_string(k) + " must be in [1, " + std::to_string(n) + "]");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (dist[i].size() != n) throw InvalidInput("kmedoids: distance matrix is not square");
    if (dist[i][i] != 0.0) throw InvalidInput("kmedoids: distance matrix diagonal must be zero");
    for (std::size_t j = 0; j < i; ++j) {
      if (dist[i][j] != dist[j][i]) throw InvalidInput("kmedoids: distance matrix is not symmetric");
    }
  }

  // Partial Fisher-Yates for k distinct initial medoids.
  Rng rng(seed);
  std::vector<std::size_t> pool(n);
  std::iota(pool.begin(), pool.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n - i));
    std::swap(pool[i], pool[j]);
  }
  std::vector<std::size_t> medoids(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
  std::vector<char> is_medoid(n, 0);
  for (std::size_t m : medoids) is_medoid[m] = 1;

  KMedoidsResult result;
  result.initial_cost = medoid_cost(dist, medoids);
  double cost = result.initial_cost;

  for (;;) {
    double best_cost = cost;
    std::size_t best_slot = k;
    std::size_t best_candidate = n;
    for (std::size_t slot = 0; slot < k; ++slot) {
      const std::size_t old = medoids[slot];
      for (std::size_t cand = 0; cand < n; ++cand) {
        if (is_medoid[cand]) continue;
        medoids[slot] = cand;
        const double c = medoid_cost(dist, medoids);
        if (c < best_cost) {
          best_cost = c;
          best_slot = slot;
          best_candidate = cand;
        }
      }
      medoids[slot] = old;
    }
    if (best_slot == k) break;
    is_medoid[medoids[best_slot]] = 0;
    is_medoid[best_candidate] = 1;
    medoids[best_slot] = best_candidate;
    cost = best_cost;
  }

  std::sort(medoids.begin(), medoids.end());
  result.assignment.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t best = 0;
    for (std::size_t m = 1; m < k; ++m) {
      if (dist[i][medoids[m]] < dist[i][medoids[best]]) best = m;
    }
    result.assignment[i] = best;
  }
  result.medoids = std::move(medoids);
  result.cost = cost;
  return result;
}

}  // namespace sybilwall
