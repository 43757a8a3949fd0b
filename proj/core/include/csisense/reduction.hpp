#pragma once

#include <vector>

#include "csisense/matrix.hpp"

namespace csisense {

// Principal components of the row-centered data: columns of `components`
// are orthonormal, `explained_variance` holds the matching sample-
// covariance eigenvalues in non-increasing order.
struct PcaModel {
  RealMatrix components;                  // p x k
  std::vector<double> mean;               // p
  std::vector<double> explained_variance; // k
};

PcaModel pca_fit(const RealMatrix& x, std::size_t k);

// Z = (X - mean) * W.
RealMatrix pca_transform(const PcaModel& model, const RealMatrix& x);

// X_hat = Z * W^T + mean.
RealMatrix pca_inverse(const PcaModel& model, const RealMatrix& z);

// Truncated-SVD low-rank factorization: x ~ u * v^T with u = U_r * S_r,
// v = V_r; the Frobenius error equals the discarded singular values' norm.
struct LowRankFactors {
  RealMatrix u;  // n x r
  RealMatrix v;  // p x r
};

LowRankFactors lrf(const RealMatrix& x, std::size_t r);

}  // namespace csisense
