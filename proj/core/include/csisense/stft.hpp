#pragma once

#include <cstddef>
#include <vector>

namespace csisense {

// A real-valued 1-D signal.
using Series = std::vector<double>;

enum class StftWindow { hann, rect };

// One-sided short-time magnitude spectrogram: frames x bins, row-major,
// bins = window_len/2 + 1.
struct StftFrames {
  std::size_t frames = 0;
  std::size_t bins = 0;
  std::vector<double> mag;

  double at(std::size_t frame, std::size_t bin) const {
    return mag[frame * bins + bin];
  }
  // Center frequency of a bin given the sampling interval of the series.
  double bin_hz(std::size_t bin, double sample_interval,
                std::size_t window_len) const {
    return static_cast<double>(bin) /
           (sample_interval * static_cast<double>(window_len));
  }
  // Index of the strongest bin in a frame.
  std::size_t argmax_bin(std::size_t frame) const;
};

// Frame f covers samples [f*hop, f*hop + window_len); frames are laid until
// the window no longer fits.  The hann window is the periodic variant.
StftFrames stft(const Series& s, std::size_t window_len, std::size_t hop,
                StftWindow window = StftWindow::hann);

}  // namespace csisense
