#include "csisense/outliers.hpp"

#include <algorithm>
#include <cmath>

#include "csisense/error.hpp"

namespace csisense {

std::vector<double> lof_scores(const RealMatrix& points, std::size_t k) {
  const std::size_t n = points.rows;
  if (k < 2 || k >= n) {
    throw ValidationError("lof_scores needs 2 <= k < n");
  }
  constexpr double kDensityCap = 1e12;

  // Pairwise distances; n stays small enough (time samples) for the dense
  // quadratic approach.
  std::vector<double> dist(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double sq = 0.0;
      for (std::size_t c = 0; c < points.cols; ++c) {
        const double d = points.at(i, c) - points.at(j, c);
        sq += d * d;
      }
      dist[i * n + j] = dist[j * n + i] = std::sqrt(sq);
    }
  }

  // k-distance and k-neighborhood (ties included) per point.
  std::vector<double> k_distance(n);
  std::vector<std::vector<std::size_t>> neighbors(n);
  std::vector<std::size_t> order(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t m = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) order[m++] = j;
    }
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      return dist[i * n + a] < dist[i * n + b];
    });
    k_distance[i] = dist[i * n + order[k - 1]];
    for (std::size_t j : order) {
      if (dist[i * n + j] <= k_distance[i]) {
        neighbors[i].push_back(j);
      } else {
        break;
      }
    }
  }

  // Local reachability density.
  std::vector<double> lrd(n);
  for (std::size_t i = 0; i < n; ++i) {
    double reach_sum = 0.0;
    for (std::size_t o : neighbors[i]) {
      reach_sum += std::max(k_distance[o], dist[i * n + o]);
    }
    const double mean_reach =
        reach_sum / static_cast<double>(neighbors[i].size());
    lrd[i] = mean_reach > 0.0 ? 1.0 / mean_reach : kDensityCap;
  }

  std::vector<double> scores(n);
  for (std::size_t i = 0; i < n; ++i) {
    double ratio_sum = 0.0;
    for (std::size_t o : neighbors[i]) ratio_sum += lrd[o] / lrd[i];
    scores[i] = ratio_sum / static_cast<double>(neighbors[i].size());
  }
  return scores;
}

}  // namespace csisense
