#pragma once

#include <complex>
#include <cstddef>
#include <vector>

namespace csisense {

struct VelocityGridParams {
  double v_min = -3.0;  // m/s; default grid spans human motion speeds
  double v_max = 3.0;
  std::size_t steps = 601;  // 1 cm/s resolution
};

// MUSIC pseudo-spectrum sampled over a uniform velocity grid.
struct VelocityGrid {
  double v_min = 0.0, v_max = 0.0;
  std::size_t steps = 0;
  std::vector<double> values;

  double velocity_at(std::size_t i) const {
    return v_min + (v_max - v_min) * static_cast<double>(i) /
                       static_cast<double>(steps - 1);
  }
  double step_size() const {
    return (v_max - v_min) / static_cast<double>(steps - 1);
  }
};

struct MusicPeak {
  double velocity = 0.0;
  double power = 0.0;
};

// Doppler-velocity MUSIC on one subcarrier's temporal trace.  The sample
// covariance comes from forward-only smoothing over sub-windows of length
// M_w = ceil(M_s/2); the noise subspace keeps the M_w - n_sources
// eigenvectors with the smallest eigenvalues, and
// P(v) = 1 / (d(v)^H Q_n Q_n^H d(v)).
VelocityGrid music_velocity(const std::vector<std::complex<double>>& csi_column,
                            double f_c, double dt, std::size_t n_sources,
                            const VelocityGridParams& grid = {});

// Local maxima above mean + 2*sigma of the grid, tallest first.
std::vector<MusicPeak> music_peaks(const VelocityGrid& grid);

// Doppler frequency shift of a radial velocity: f_D = v * f_c / c.
double dfs(double v, double f_c);

}  // namespace csisense
