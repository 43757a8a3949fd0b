#pragma once

#include <cstddef>
#include <vector>

#include "csisense/matrix.hpp"

namespace csisense {

// Classic local outlier factor with Euclidean distances: the ratio of the
// mean local reachability density of a point's k-neighborhood to its own.
// Scores near 1 mark inliers; clusters of exact duplicates are capped at
// density 1e12 so their mutual scores stay finite (and equal 1).
std::vector<double> lof_scores(const RealMatrix& points, std::size_t k = 10);

}  // namespace csisense
