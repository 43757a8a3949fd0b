#pragma once

#include <complex>
#include <cstdint>
#include <string>
#include <vector>

namespace csisense {

// One moving reflector: a signed radial velocity and its per-subcarrier
// channel coefficient at t0, optionally fading by a per-sample multiplier.
struct Scatterer {
  double velocity = 0.0;  // m/s, signed; positive shortens the path
  std::vector<std::complex<double>> initial_csi;  // one entry per subcarrier
  double amplitude_decay = 1.0;  // per-sample amplitude multiplier
};

// Simulator input: everything needed to synthesize one labeled CSI record.
struct ScattererScene {
  std::vector<Scatterer> scatterers;
  std::vector<double> carrier_freqs;  // Hz, one per subcarrier
  double sample_interval = 0.0;       // seconds between samples
  std::size_t num_samples = 0;        // time samples to synthesize
  double noise_std = 0.0;             // per-component Gaussian noise std
  std::vector<double> cpe_offsets;    // optional per-timestamp radians
  int label = 0;
  std::uint64_t seed = 0;

  // Throws ValidationError naming the offending field.
  void validate() const;
};

// JSON (de)serialization for scene templates; the parser reports the
// offending key on malformed input.
ScattererScene scene_from_json(const std::string& text);
std::string scene_to_json(const ScattererScene& scene);

}  // namespace csisense
