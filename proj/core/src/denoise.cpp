#include "csisense/denoise.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "csisense/error.hpp"
#include "csisense/fft.hpp"

namespace csisense {

Series lowpass(const Series& s, double dt, double cutoff_hz) {
  if (s.empty()) {
    throw ValidationError("lowpass input must be non-empty");
  }
  if (!(dt > 0.0)) {
    throw ValidationError("lowpass needs dt > 0");
  }
  const double nyquist = 1.0 / (2.0 * dt);
  if (!(cutoff_hz > 0.0) || cutoff_hz >= nyquist) {
    throw ValidationError("lowpass cutoff must lie in (0, Nyquist = " +
                          std::to_string(nyquist) + " Hz)");
  }

  const std::size_t n = s.size();
  std::vector<std::complex<double>> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = {s[i], 0.0};
  auto spec = fft(std::move(x));
  for (std::size_t k = 1; k < n; ++k) {
    const double f = static_cast<double>(std::min(k, n - k)) /
                     (static_cast<double>(n) * dt);
    if (f > cutoff_hz) spec[k] = {0.0, 0.0};
  }
  const auto back = ifft(std::move(spec));
  Series out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = back[i].real();
  return out;
}

Series dwt_denoise(const Series& s, Wavelet wavelet, std::size_t levels,
                   std::optional<double> threshold) {
  if (levels < 1) {
    throw ValidationError("dwt_denoise needs levels >= 1");
  }
  const std::size_t min_len = static_cast<std::size_t>(1) << levels;
  if (s.size() < min_len) {
    throw ValidationError("dwt_denoise needs len >= 2^levels (= " +
                          std::to_string(min_len) + "), got " +
                          std::to_string(s.size()));
  }

  DwtPyramid p = dwt(s, wavelet, levels);
  double lambda;
  if (threshold.has_value()) {
    if (!(*threshold >= 0.0)) {
      throw ValidationError("dwt_denoise threshold must be >= 0");
    }
    lambda = *threshold;
  } else {
    // Universal threshold from the finest detail band.
    std::vector<double> mags(p.details[0].size());
    for (std::size_t i = 0; i < mags.size(); ++i) {
      mags[i] = std::abs(p.details[0][i]);
    }
    std::sort(mags.begin(), mags.end());
    const std::size_t mid = mags.size() / 2;
    const double mad = mags.size() % 2 == 1
                           ? mags[mid]
                           : 0.5 * (mags[mid - 1] + mags[mid]);
    const double sigma = mad / 0.6745;
    lambda = sigma * std::sqrt(2.0 * std::log(static_cast<double>(s.size())));
  }

  for (auto& level : p.details) {
    for (double& d : level) {
      const double mag = std::abs(d) - lambda;
      d = mag > 0.0 ? (d > 0.0 ? mag : -mag) : 0.0;
    }
  }
  return idwt(p);
}

}  // namespace csisense
