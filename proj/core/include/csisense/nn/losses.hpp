#pragma once

#include <string>
#include <vector>

#include "csisense/nn/autodiff.hpp"

namespace csisense::nn {

enum class SslAlgorithm { simclr, simsiam, barlow_twins, vicreg };

const char* ssl_algorithm_name(SslAlgorithm algorithm);
SslAlgorithm ssl_algorithm_from_name(const std::string& name);

struct VicWeights {
  double inv_weight = 1.0;
  double var_weight = 25.0;
  double cov_weight = 1.0;
  double gamma = 1.0;
};

struct SslLossConfig {
  SslAlgorithm algorithm = SslAlgorithm::simclr;
  double temperature = 0.5;  // simclr
  double bt_lambda = 5e-3;   // barlow twins off-diagonal weight
  VicWeights vic;

  void validate() const;  // temperature > 0, weights >= 0, gamma > 0
};

// Normalized temperature-scaled cross entropy over 2N embeddings arranged as
// N positive pairs (2i, 2i+1).  Every row is an anchor; the denominator sums
// all rows except the anchor itself.  Mean over the 2N anchors.
Value nt_xent(const Value& z, double temperature);

// 0.5 * [D(p1, z2) + D(p2, z1)] with D the batch-mean negative cosine
// similarity.  The z inputs must carry no gradient (pass detached views);
// zero-norm rows contribute similarity 0 and push a note onto `warnings`.
Value simsiam_loss(const Value& p1, const Value& z2_detached, const Value& p2,
                   const Value& z1_detached,
                   std::vector<std::string>* warnings = nullptr);

// Cross-correlation identity loss on column-standardized embeddings:
// sum_i (1 - C_ii)^2 + lambda * sum_{i != j} C_ij^2.
Value barlow_twins_loss(const Value& za, const Value& zb, double lambda);

// Invariance / variance-hinge / covariance decomposition.  The scalar fields
// carry the unweighted forward values of each term; total is the weighted
// sum and the differentiable handle.
struct VicRegTerms {
  Value total;
  double invariance = 0.0;
  double variance_a = 0.0;
  double variance_b = 0.0;
  double covariance_a = 0.0;
  double covariance_b = 0.0;
};

VicRegTerms vicreg_loss(const Value& za, const Value& zb,
                        const VicWeights& weights);

}  // namespace csisense::nn
