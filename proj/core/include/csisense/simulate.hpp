#pragma once

#include <complex>
#include <cstdint>
#include <utility>
#include <vector>

#include "csisense/csi_tensor.hpp"
#include "csisense/scene.hpp"

namespace csisense {

// Propagation speed of Wi-Fi signals in m/s.
inline constexpr double kSpeedOfLight = 299792458.0;

// Per-sample phase step of a reflector moving at radial velocity v:
// -4*pi*f_c*v*dt/c (the 4*pi folds in the round-trip reflection).
double phase_increment(double v, double f_c, double dt);

// Velocity steering vector: element k = e^{-j*4*pi*k*f_c*v*dt/c}.
std::vector<std::complex<double>> steering_vector(double v, double f_c,
                                                  double dt, std::size_t m);

// Synthesizes the scene: per subcarrier s and timestamp k,
//   h[k,s] = sum_i csi_i[s] * decay_i^k * e^{j*k*phase_increment(v_i)}
//            + noise, then rotated by e^{j*cpe[k]} when offsets are given.
// Deterministic given scene.seed; meta records label, seed and velocities.
CsiTensor generate(const ScattererScene& scene);

struct DatasetOptions {
  // Per-sample multiplicative velocity perturbation, at most +/-10%.
  double velocity_jitter = 0.10;
  // Re-draw every scatterer's global phase per sample, so records of the
  // same class differ in beat alignment and not just in noise.
  bool randomize_phases = false;
};

// Balanced labeled dataset: per_class records per template, each from a
// perturbed copy (jittered velocities, fresh noise, optional fresh phases).
// Sample i of class c uses the substream fork(c*per_class + i) of `seed`,
// so serial and fanned-out generation agree bit-for-bit.
std::vector<std::pair<CsiTensor, int>> make_activity_dataset(
    const std::vector<ScattererScene>& classes, std::size_t per_class,
    std::uint64_t seed, const DatasetOptions& options = {});

}  // namespace csisense
