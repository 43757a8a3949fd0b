#pragma once

#include <vector>

#include "csisense/matrix.hpp"

namespace csisense {

// One-vs-rest ridge regression on +/-1 targets, solved in closed form.
struct RidgeModel {
  std::vector<int> classes;        // sorted unique labels
  RealMatrix weights;              // d x C
  std::vector<double> intercepts;  // C
};

// Mean-centers features and targets, then solves the normal equations —
// primal (X^T X + l2 I) when d <= n, dual X^T (X X^T + l2 I)^{-1} Y
// otherwise; both give identical models up to roundoff.
RidgeModel ridge_classify_fit(const RealMatrix& x,
                              const std::vector<int>& labels, double l2);

// Per-class decision scores, one row per sample.
RealMatrix ridge_scores(const RidgeModel& model, const RealMatrix& x);

// Argmax-score class prediction.
std::vector<int> ridge_predict(const RidgeModel& model, const RealMatrix& x);

}  // namespace csisense
