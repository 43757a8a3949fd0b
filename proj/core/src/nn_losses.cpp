#include "csisense/nn/losses.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "csisense/error.hpp"

namespace csisense::nn {
namespace {

void check_finite_positive(double v, const char* what) {
  if (!std::isfinite(v) || v <= 0.0) {
    throw ValidationError(std::string(what) + " must be positive and finite");
  }
}

void check_finite_nonnegative(double v, const char* what) {
  if (!std::isfinite(v) || v < 0.0) {
    throw ValidationError(std::string(what) +
                          " must be non-negative and finite");
  }
}

void check_embedding_batch(const Value& z, const char* op) {
  if (!z.defined() || z.tensor().ndim() != 2 || z.tensor().rows() == 0 ||
      z.tensor().cols() == 0) {
    throw ValidationError(std::string(op) +
                          " needs a non-empty B x d embedding batch");
  }
}

Tensor identity_matrix(std::size_t d) {
  Tensor t({d, d});
  for (std::size_t i = 0; i < d; ++i) t.at(i, i) = 1.0;
  return t;
}

Tensor offdiag_mask(std::size_t d) {
  Tensor t({d, d});
  t.fill(1.0);
  for (std::size_t i = 0; i < d; ++i) t.at(i, i) = 0.0;
  return t;
}

// Column-wise z-score with population statistics, kept in the graph.  The
// per-column variances are checked on the forward values: an exactly
// constant column has no scale to standardize by.
Value standardize_columns(const Value& z, const char* op) {
  const std::size_t batch = z.tensor().rows();
  const double inv_b = 1.0 / static_cast<double>(batch);
  Value mean = mul_scalar(sum_axis0(z), inv_b);
  Value centered = sub(z, broadcast_row(mean, batch));
  Value var = mul_scalar(sum_axis0(square(centered)), inv_b);
  const Tensor& vt = var.tensor();
  for (std::size_t c = 0; c < vt.cols(); ++c) {
    if (vt[c] <= 0.0) {
      throw NumericError(std::string(op) + ": embedding dimension " +
                         std::to_string(c) + " has zero variance");
    }
  }
  return mul(centered, broadcast_row(recip(sqrt_op(var)), batch));
}

// Batch-mean cosine similarity between matching rows; zero-norm rows count
// as similarity 0.
Value mean_row_cosine(const Value& a, const Value& b, const char* side,
                      std::vector<std::string>* warnings) {
  std::vector<std::size_t> zero_a;
  std::vector<std::size_t> zero_b;
  Value an = rows_l2_normalize(a, &zero_a);
  Value bn = rows_l2_normalize(b, &zero_b);
  if (warnings != nullptr) {
    for (std::size_t r : zero_a) {
      warnings->push_back(std::string("simsiam: zero-norm prediction row ") +
                          std::to_string(r) + " in " + side +
                          "; similarity treated as 0");
    }
    for (std::size_t r : zero_b) {
      warnings->push_back(std::string("simsiam: zero-norm target row ") +
                          std::to_string(r) + " in " + side +
                          "; similarity treated as 0");
    }
  }
  const double inv_b = 1.0 / static_cast<double>(a.tensor().rows());
  return mul_scalar(sum_all(mul(an, bn)), inv_b);
}

}  // namespace

const char* ssl_algorithm_name(SslAlgorithm algorithm) {
  switch (algorithm) {
    case SslAlgorithm::simclr:
      return "simclr";
    case SslAlgorithm::simsiam:
      return "simsiam";
    case SslAlgorithm::barlow_twins:
      return "barlow_twins";
    case SslAlgorithm::vicreg:
      return "vicreg";
  }
  throw ValidationError("unknown ssl algorithm");
}

SslAlgorithm ssl_algorithm_from_name(const std::string& name) {
  if (name == "simclr") return SslAlgorithm::simclr;
  if (name == "simsiam") return SslAlgorithm::simsiam;
  if (name == "barlow_twins") return SslAlgorithm::barlow_twins;
  if (name == "vicreg") return SslAlgorithm::vicreg;
  throw ValidationError("unknown ssl algorithm: " + name);
}

void SslLossConfig::validate() const {
  check_finite_positive(temperature, "temperature");
  check_finite_nonnegative(bt_lambda, "bt_lambda");
  check_finite_nonnegative(vic.inv_weight, "vic.inv_weight");
  check_finite_nonnegative(vic.var_weight, "vic.var_weight");
  check_finite_nonnegative(vic.cov_weight, "vic.cov_weight");
  check_finite_positive(vic.gamma, "vic.gamma");
}

Value nt_xent(const Value& z, double temperature) {
  check_embedding_batch(z, "nt_xent");
  check_finite_positive(temperature, "temperature");
  const std::size_t rows = z.tensor().rows();
  if (rows % 2 != 0) {
    throw ValidationError("nt_xent needs an even number of rows (view pairs)");
  }
  const std::size_t n_pairs = rows / 2;
  if (n_pairs < 2) {
    throw ValidationError("nt_xent needs at least two pairs for negatives");
  }

  Value zn = rows_l2_normalize(z);
  Value sims = mul_scalar(matmul(zn, transpose(zn)), 1.0 / temperature);

  // Denominator: sum over all rows except the anchor itself.  The mask is
  // applied after exponentiation so the anchor's own term drops out rather
  // than leaking in as exp(0).  |sims| <= 1/temperature keeps exp in range.
  Value masked = mul(exp_op(sims), Value::constant(offdiag_mask(rows)));
  Value log_denoms = log_op(sum_axis1(masked));

  Value numerators;
  {
    Tensor pos({rows, rows});
    for (std::size_t i = 0; i < n_pairs; ++i) {
      pos.at(2 * i, 2 * i + 1) = 1.0;
      pos.at(2 * i + 1, 2 * i) = 1.0;
    }
    numerators = sum_all(mul(sims, Value::constant(std::move(pos))));
  }

  Value loss = mul_scalar(sub(sum_all(log_denoms), numerators),
                          1.0 / static_cast<double>(rows));
  return loss;
}

Value simsiam_loss(const Value& p1, const Value& z2_detached, const Value& p2,
                   const Value& z1_detached,
                   std::vector<std::string>* warnings) {
  check_embedding_batch(p1, "simsiam_loss");
  check_embedding_batch(z2_detached, "simsiam_loss");
  check_embedding_batch(p2, "simsiam_loss");
  check_embedding_batch(z1_detached, "simsiam_loss");
  if (!p1.tensor().same_shape(z2_detached.tensor()) ||
      !p1.tensor().same_shape(p2.tensor()) ||
      !p1.tensor().same_shape(z1_detached.tensor())) {
    throw ValidationError("simsiam_loss needs four equally shaped batches");
  }
  if (z2_detached.requires_grad() || z1_detached.requires_grad()) {
    throw ValidationError(
        "simsiam_loss target branches must be detached (stop-gradient)");
  }
  Value d1 = mean_row_cosine(p1, z2_detached, "branch 1", warnings);
  Value d2 = mean_row_cosine(p2, z1_detached, "branch 2", warnings);
  return mul_scalar(add(d1, d2), -0.5);
}

Value barlow_twins_loss(const Value& za, const Value& zb, double lambda) {
  check_embedding_batch(za, "barlow_twins_loss");
  check_embedding_batch(zb, "barlow_twins_loss");
  if (!za.tensor().same_shape(zb.tensor())) {
    throw ValidationError("barlow_twins_loss needs equally shaped branches");
  }
  check_finite_nonnegative(lambda, "bt_lambda");
  const std::size_t batch = za.tensor().rows();
  const std::size_t dim = za.tensor().cols();
  if (batch < 2) {
    throw ValidationError("barlow_twins_loss needs batch size >= 2");
  }

  Value ha = standardize_columns(za, "barlow_twins_loss");
  Value hb = standardize_columns(zb, "barlow_twins_loss");

  // C_ij = sum_b ha_bi hb_bj / (||ha_:i|| ||hb_:j||)
  Value numerator = matmul(transpose(ha), hb);
  Value na = sqrt_op(sum_axis0(square(ha)));  // 1 x d column norms
  Value nb = sqrt_op(sum_axis0(square(hb)));
  Value denom = matmul(transpose(recip(na)), recip(nb));  // d x d outer
  Value c = mul(numerator, denom);

  Value eye = Value::constant(identity_matrix(dim));
  Value off = Value::constant(offdiag_mask(dim));
  Value invariance = sum_all(mul(square(sub(eye, c)), eye));
  Value redundancy = sum_all(mul(square(c), off));
  return add(invariance, mul_scalar(redundancy, lambda));
}

VicRegTerms vicreg_loss(const Value& za, const Value& zb,
                        const VicWeights& weights) {
  check_embedding_batch(za, "vicreg_loss");
  check_embedding_batch(zb, "vicreg_loss");
  if (!za.tensor().same_shape(zb.tensor())) {
    throw ValidationError("vicreg_loss needs equally shaped branches");
  }
  check_finite_nonnegative(weights.inv_weight, "vic.inv_weight");
  check_finite_nonnegative(weights.var_weight, "vic.var_weight");
  check_finite_nonnegative(weights.cov_weight, "vic.cov_weight");
  check_finite_positive(weights.gamma, "vic.gamma");
  const std::size_t batch = za.tensor().rows();
  const std::size_t dim = za.tensor().cols();
  if (batch < 2) {
    throw ValidationError("vicreg_loss needs batch size >= 2");
  }
  const double inv_b = 1.0 / static_cast<double>(batch);

  Value invariance = mul_scalar(sum_all(square(sub(za, zb))), inv_b);

  Tensor gamma_row({1, dim});
  gamma_row.fill(weights.gamma);
  Value off = Value::constant(offdiag_mask(dim));

  auto branch_terms = [&](const Value& z) {
    Value mean = mul_scalar(sum_axis0(z), inv_b);
    Value centered = sub(z, broadcast_row(mean, batch));
    Value var = mul_scalar(sum_axis0(square(centered)), inv_b);
    Value hinge =
        sum_all(relu(sub(Value::constant(gamma_row.clone()), var)));
    Value cov = mul_scalar(matmul(transpose(centered), centered), inv_b);
    Value cov_sq = sum_all(mul(square(cov), off));
    return std::pair<Value, Value>(hinge, cov_sq);
  };

  auto [var_a, cov_a] = branch_terms(za);
  auto [var_b, cov_b] = branch_terms(zb);

  Value total = add(
      mul_scalar(invariance, weights.inv_weight),
      add(mul_scalar(add(var_a, var_b), weights.var_weight),
          mul_scalar(add(cov_a, cov_b), weights.cov_weight)));

  VicRegTerms terms;
  terms.total = total;
  terms.invariance = invariance.tensor()[0];
  terms.variance_a = var_a.tensor()[0];
  terms.variance_b = var_b.tensor()[0];
  terms.covariance_a = cov_a.tensor()[0];
  terms.covariance_b = cov_b.tensor()[0];
  return terms;
}

}  // namespace csisense::nn
