#include "csisense/simulate.hpp"

#include <charconv>
#include <cmath>
#include <numbers>
#include <set>
#include <string>

#include "csisense/error.hpp"
#include "csisense/random.hpp"

namespace csisense {
namespace {

std::string shortest_repr(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, end);
}

}  // namespace

double phase_increment(double v, double f_c, double dt) {
  return -4.0 * std::numbers::pi * f_c * v * dt / kSpeedOfLight;
}

std::vector<std::complex<double>> steering_vector(double v, double f_c,
                                                  double dt, std::size_t m) {
  const double step = phase_increment(v, f_c, dt);
  std::vector<std::complex<double>> d(m);
  for (std::size_t k = 0; k < m; ++k) {
    d[k] = std::polar(1.0, step * static_cast<double>(k));
  }
  return d;
}

CsiTensor generate(const ScattererScene& scene) {
  scene.validate();
  const std::size_t T = scene.num_samples;
  const std::size_t S = scene.carrier_freqs.size();

  CsiTensor out(T, S, 1, 1);
  out.sample_interval = scene.sample_interval;
  out.carrier_freqs = scene.carrier_freqs;

  // Deterministic per-scene noise stream; draws are ordered (t, s, re, im).
  RandomStream rng(scene.seed);

  for (std::size_t k = 0; k < T; ++k) {
    for (std::size_t s = 0; s < S; ++s) {
      std::complex<double> h{0.0, 0.0};
      for (const Scatterer& sc : scene.scatterers) {
        const double rot =
            phase_increment(sc.velocity, scene.carrier_freqs[s],
                            scene.sample_interval) *
            static_cast<double>(k);
        const double decay = std::pow(sc.amplitude_decay,
                                      static_cast<double>(k));
        h += sc.initial_csi[s] * std::polar(decay, rot);
      }
      if (scene.noise_std > 0.0) {
        h += std::complex<double>(scene.noise_std * rng.gaussian(),
                                  scene.noise_std * rng.gaussian());
      }
      if (!scene.cpe_offsets.empty()) {
        h *= std::polar(1.0, scene.cpe_offsets[k]);
      }
      out.at(k, s, 0, 0) = h;
    }
  }

  out.meta["label"] = std::to_string(scene.label);
  out.meta["seed"] = std::to_string(scene.seed);
  std::string vel;
  for (const Scatterer& sc : scene.scatterers) {
    if (!vel.empty()) vel += ',';
    vel += shortest_repr(sc.velocity);
  }
  out.meta["velocities"] = vel;
  return out;
}

std::vector<std::pair<CsiTensor, int>> make_activity_dataset(
    const std::vector<ScattererScene>& classes, std::size_t per_class,
    std::uint64_t seed, const DatasetOptions& options) {
  if (classes.size() < 2) {
    throw ValidationError("make_activity_dataset needs at least 2 classes");
  }
  if (per_class < 1) {
    throw ValidationError("make_activity_dataset needs per_class >= 1");
  }
  if (!(options.velocity_jitter >= 0.0) || options.velocity_jitter > 0.10) {
    throw ValidationError("velocity_jitter must lie in [0, 0.10]");
  }
  std::set<int> labels;
  for (const ScattererScene& scene : classes) {
    scene.validate();
    if (!labels.insert(scene.label).second) {
      throw ValidationError("duplicate class id " +
                            std::to_string(scene.label));
    }
  }

  const RandomStream master(seed);
  std::vector<std::pair<CsiTensor, int>> dataset;
  dataset.reserve(classes.size() * per_class);
  for (std::size_t c = 0; c < classes.size(); ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      RandomStream rng = master.fork(c * per_class + i);
      ScattererScene scene = classes[c];
      for (Scatterer& sc : scene.scatterers) {
        if (options.velocity_jitter > 0.0) {
          sc.velocity *= 1.0 + rng.uniform(-options.velocity_jitter,
                                           options.velocity_jitter);
        }
        if (options.randomize_phases) {
          const auto rot =
              std::polar(1.0, rng.uniform(0.0, 2.0 * std::numbers::pi));
          for (auto& z : sc.initial_csi) z *= rot;
        }
      }
      scene.seed = rng.next_u64();
      dataset.emplace_back(generate(scene), scene.label);
    }
  }
  return dataset;
}

}  // namespace csisense
