#include "csisense/reduction.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "csisense/error.hpp"

namespace csisense {
namespace {

using RowMajorMap =
    Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                   Eigen::RowMajor>>;

RealMatrix to_real(const Eigen::MatrixXd& m) {
  RealMatrix out(static_cast<std::size_t>(m.rows()),
                 static_cast<std::size_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j)
      out.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) =
          m(i, j);
  return out;
}

}  // namespace

PcaModel pca_fit(const RealMatrix& x, std::size_t k) {
  if (x.rows < 2) {
    throw ValidationError("pca_fit needs at least 2 samples");
  }
  if (k < 1 || k > std::min(x.rows, x.cols)) {
    throw ValidationError("pca_fit needs 1 <= k <= min(n, p)");
  }
  const auto n = static_cast<Eigen::Index>(x.rows);
  const auto p = static_cast<Eigen::Index>(x.cols);
  RowMajorMap data(x.data.data(), n, p);

  const Eigen::RowVectorXd mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - mean;
  const Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(n - 1);

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw NumericError("pca_fit eigendecomposition failed");
  }

  PcaModel model;
  model.mean.assign(mean.data(), mean.data() + p);
  Eigen::MatrixXd components(p, static_cast<Eigen::Index>(k));
  model.explained_variance.resize(k);
  for (std::size_t j = 0; j < k; ++j) {
    // Eigenvalues arrive ascending; take from the top.
    const Eigen::Index src = p - 1 - static_cast<Eigen::Index>(j);
    Eigen::VectorXd v = eig.eigenvectors().col(src);
    // Deterministic sign: largest-magnitude coordinate is positive.
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0.0) v = -v;
    components.col(static_cast<Eigen::Index>(j)) = v;
    model.explained_variance[j] = std::max(0.0, eig.eigenvalues()(src));
  }
  model.components = to_real(components);
  return model;
}

RealMatrix pca_transform(const PcaModel& model, const RealMatrix& x) {
  if (x.cols != model.components.rows) {
    throw ValidationError("pca_transform feature width mismatch");
  }
  const auto n = static_cast<Eigen::Index>(x.rows);
  const auto p = static_cast<Eigen::Index>(x.cols);
  const auto k = static_cast<Eigen::Index>(model.components.cols);
  RowMajorMap data(x.data.data(), n, p);
  RowMajorMap w(model.components.data.data(), p, k);
  Eigen::Map<const Eigen::RowVectorXd> mean(model.mean.data(), p);
  return to_real((data.rowwise() - mean) * w);
}

RealMatrix pca_inverse(const PcaModel& model, const RealMatrix& z) {
  if (z.cols != model.components.cols) {
    throw ValidationError("pca_inverse component count mismatch");
  }
  const auto n = static_cast<Eigen::Index>(z.rows);
  const auto p = static_cast<Eigen::Index>(model.components.rows);
  const auto k = static_cast<Eigen::Index>(model.components.cols);
  RowMajorMap scores(z.data.data(), n, k);
  RowMajorMap w(model.components.data.data(), p, k);
  Eigen::Map<const Eigen::RowVectorXd> mean(model.mean.data(), p);
  Eigen::MatrixXd back = scores * w.transpose();
  back.rowwise() += mean;
  return to_real(back);
}

LowRankFactors lrf(const RealMatrix& x, std::size_t r) {
  if (r < 1 || r > std::min(x.rows, x.cols)) {
    throw ValidationError("lrf needs 1 <= r <= min(n, p)");
  }
  const auto n = static_cast<Eigen::Index>(x.rows);
  const auto p = static_cast<Eigen::Index>(x.cols);
  RowMajorMap data(x.data.data(), n, p);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(
      data, Eigen::ComputeThinU | Eigen::ComputeThinV);

  const auto rr = static_cast<Eigen::Index>(r);
  LowRankFactors out;
  out.u = to_real(svd.matrixU().leftCols(rr) *
                  svd.singularValues().head(rr).asDiagonal());
  out.v = to_real(svd.matrixV().leftCols(rr));
  return out;
}

}  // namespace csisense
