#include "csisense/ridge.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <Eigen/Dense>

#include "csisense/error.hpp"

namespace csisense {

RidgeModel ridge_classify_fit(const RealMatrix& x,
                              const std::vector<int>& labels, double l2) {
  if (x.rows == 0 || x.cols == 0) {
    throw ValidationError("ridge_classify_fit needs a non-empty feature "
                          "matrix");
  }
  if (labels.size() != x.rows) {
    throw ValidationError("ridge_classify_fit needs one label per row");
  }
  if (!(l2 > 0.0) || !std::isfinite(l2)) {
    throw ValidationError("ridge_classify_fit needs l2 > 0");
  }
  const std::set<int> unique(labels.begin(), labels.end());
  if (unique.size() < 2) {
    throw ValidationError("ridge_classify_fit needs at least 2 classes");
  }

  RidgeModel model;
  model.classes.assign(unique.begin(), unique.end());
  const auto n = static_cast<Eigen::Index>(x.rows);
  const auto d = static_cast<Eigen::Index>(x.cols);
  const auto c = static_cast<Eigen::Index>(model.classes.size());

  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      features(x.data.data(), n, d);
  const Eigen::RowVectorXd x_mean = features.colwise().mean();
  const Eigen::MatrixXd xc = features.rowwise() - x_mean;

  Eigen::MatrixXd y(n, c);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) {
      y(i, j) = labels[static_cast<std::size_t>(i)] ==
                        model.classes[static_cast<std::size_t>(j)]
                    ? 1.0
                    : -1.0;
    }
  }
  const Eigen::RowVectorXd y_mean = y.colwise().mean();
  const Eigen::MatrixXd yc = y.rowwise() - y_mean;

  Eigen::MatrixXd w(d, c);
  if (d <= n) {
    Eigen::MatrixXd gram = xc.transpose() * xc;
    gram.diagonal().array() += l2;
    w = gram.ldlt().solve(xc.transpose() * yc);
  } else {
    Eigen::MatrixXd gram = xc * xc.transpose();
    gram.diagonal().array() += l2;
    w = xc.transpose() * gram.ldlt().solve(yc);
  }

  model.weights = RealMatrix(x.cols, model.classes.size());
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < c; ++j) {
      model.weights.at(static_cast<std::size_t>(i),
                       static_cast<std::size_t>(j)) = w(i, j);
    }
  }
  model.intercepts.resize(model.classes.size());
  const Eigen::RowVectorXd b = y_mean - x_mean * w;
  for (Eigen::Index j = 0; j < c; ++j) {
    model.intercepts[static_cast<std::size_t>(j)] = b(j);
  }
  return model;
}

RealMatrix ridge_scores(const RidgeModel& model, const RealMatrix& x) {
  if (x.cols != model.weights.rows) {
    throw ValidationError("ridge_scores: feature width " +
                          std::to_string(x.cols) + " does not match model (" +
                          std::to_string(model.weights.rows) + ")");
  }
  const auto n = static_cast<Eigen::Index>(x.rows);
  const auto d = static_cast<Eigen::Index>(x.cols);
  const auto c = static_cast<Eigen::Index>(model.classes.size());
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      features(x.data.data(), n, d);
  Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                                 Eigen::RowMajor>>
      w(model.weights.data.data(), d, c);
  Eigen::Map<const Eigen::RowVectorXd> b(model.intercepts.data(), c);

  RealMatrix scores(x.rows, model.classes.size());
  Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                           Eigen::RowMajor>>
      out(scores.data.data(), n, c);
  out = (features * w).rowwise() + b;
  return scores;
}

std::vector<int> ridge_predict(const RidgeModel& model, const RealMatrix& x) {
  const RealMatrix scores = ridge_scores(model, x);
  std::vector<int> pred(x.rows);
  for (std::size_t r = 0; r < x.rows; ++r) {
    const double* row = scores.row(r);
    const std::size_t best = static_cast<std::size_t>(
        std::max_element(row, row + scores.cols) - row);
    pred[r] = model.classes[best];
  }
  return pred;
}

}  // namespace csisense
