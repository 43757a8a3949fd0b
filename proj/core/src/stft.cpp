#include "csisense/stft.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "csisense/error.hpp"
#include "csisense/fft.hpp"

namespace csisense {

std::size_t StftFrames::argmax_bin(std::size_t frame) const {
  const auto row = mag.begin() + static_cast<std::ptrdiff_t>(frame * bins);
  return static_cast<std::size_t>(
      std::max_element(row, row + static_cast<std::ptrdiff_t>(bins)) - row);
}

StftFrames stft(const Series& s, std::size_t window_len, std::size_t hop,
                StftWindow window) {
  if (window_len < 1 || hop < 1 || hop > window_len ||
      window_len > s.size()) {
    throw ValidationError("stft requires 1 <= hop <= window_len <= len");
  }

  std::vector<double> w(window_len, 1.0);
  if (window == StftWindow::hann) {
    for (std::size_t i = 0; i < window_len; ++i) {
      w[i] = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi *
                                   static_cast<double>(i) /
                                   static_cast<double>(window_len)));
    }
  }

  StftFrames out;
  out.frames = (s.size() - window_len) / hop + 1;
  out.bins = window_len / 2 + 1;
  out.mag.resize(out.frames * out.bins);

  std::vector<std::complex<double>> frame(window_len);
  for (std::size_t f = 0; f < out.frames; ++f) {
    for (std::size_t i = 0; i < window_len; ++i) {
      frame[i] = {s[f * hop + i] * w[i], 0.0};
    }
    const auto spec = fft(frame);
    for (std::size_t k = 0; k < out.bins; ++k) {
      out.mag[f * out.bins + k] = std::abs(spec[k]);
    }
  }
  return out;
}

}  // namespace csisense
