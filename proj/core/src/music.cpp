#include "csisense/music.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Dense>

#include "csisense/error.hpp"
#include "csisense/simulate.hpp"

namespace csisense {

VelocityGrid music_velocity(const std::vector<std::complex<double>>& csi_column,
                            double f_c, double dt, std::size_t n_sources,
                            const VelocityGridParams& grid) {
  const std::size_t m_s = csi_column.size();
  if (m_s < n_sources + 2) {
    throw ValidationError("music_velocity needs at least n_sources + 2 "
                          "samples, got " + std::to_string(m_s));
  }
  if (!(grid.v_min < grid.v_max) || grid.steps < 2) {
    throw ValidationError("music_velocity grid needs v_min < v_max and "
                          "steps >= 2");
  }
  if (!(f_c > 0.0) || !(dt > 0.0)) {
    throw ValidationError("music_velocity needs positive f_c and dt");
  }
  for (const auto& z : csi_column) {
    if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
      throw ValidationError("music_velocity input contains non-finite values");
    }
  }

  // Forward-only spatial smoothing over temporal sub-windows restores rank
  // for coherent reflections.
  const std::size_t m_w = (m_s + 1) / 2;
  if (n_sources >= m_w) {
    throw ValidationError("music_velocity needs n_sources < sub-window "
                          "length " + std::to_string(m_w));
  }
  const std::size_t num_windows = m_s - m_w + 1;

  Eigen::MatrixXcd cov = Eigen::MatrixXcd::Zero(
      static_cast<Eigen::Index>(m_w), static_cast<Eigen::Index>(m_w));
  Eigen::VectorXcd snap(static_cast<Eigen::Index>(m_w));
  for (std::size_t p = 0; p < num_windows; ++p) {
    for (std::size_t i = 0; i < m_w; ++i) snap(static_cast<Eigen::Index>(i)) = csi_column[p + i];
    cov.noalias() += snap * snap.adjoint();
  }
  cov /= static_cast<double>(num_windows);

  // The estimator is Hermitian-PSD by construction; verify within tolerance
  // before trusting the eigendecomposition.
  const double scale = std::max(1e-300, cov.norm());
  if ((cov - cov.adjoint()).norm() > 1e-10 * scale) {
    throw NumericError("music_velocity covariance is not Hermitian");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> eig(cov);
  if (eig.info() != Eigen::Success) {
    throw NumericError("music_velocity eigendecomposition failed");
  }
  const Eigen::VectorXd evals = eig.eigenvalues();  // ascending
  const double top = std::max(1e-300, evals.cwiseAbs().maxCoeff());
  if (evals.minCoeff() < -1e-8 * top) {
    throw NumericError("music_velocity covariance is not PSD within "
                       "tolerance");
  }

  // Noise subspace: eigenvectors beyond the n_sources largest eigenvalues.
  const Eigen::Index noise_dim =
      static_cast<Eigen::Index>(m_w - n_sources);
  const Eigen::MatrixXcd q_n = eig.eigenvectors().leftCols(noise_dim);

  VelocityGrid out;
  out.v_min = grid.v_min;
  out.v_max = grid.v_max;
  out.steps = grid.steps;
  out.values.resize(grid.steps);
  Eigen::VectorXcd d(static_cast<Eigen::Index>(m_w));
  for (std::size_t i = 0; i < grid.steps; ++i) {
    const double v = out.velocity_at(i);
    const auto steer = steering_vector(v, f_c, dt, m_w);
    for (std::size_t k = 0; k < m_w; ++k) d(static_cast<Eigen::Index>(k)) = steer[k];
    const double denom = std::max(1e-30, (q_n.adjoint() * d).squaredNorm());
    out.values[i] = 1.0 / denom;
  }
  return out;
}

std::vector<MusicPeak> music_peaks(const VelocityGrid& grid) {
  const std::size_t n = grid.values.size();
  double mean = 0.0;
  for (double v : grid.values) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : grid.values) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n);
  const double threshold = mean + 2.0 * std::sqrt(var);

  std::vector<MusicPeak> peaks;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (grid.values[i] > grid.values[i - 1] &&
        grid.values[i] > grid.values[i + 1] &&
        grid.values[i] > threshold) {
      peaks.push_back({grid.velocity_at(i), grid.values[i]});
    }
  }
  std::sort(peaks.begin(), peaks.end(),
            [](const MusicPeak& a, const MusicPeak& b) {
              return a.power > b.power;
            });
  return peaks;
}

double dfs(double v, double f_c) { return v * f_c / kSpeedOfLight; }

}  // namespace csisense
