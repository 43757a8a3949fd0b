#pragma once

#include <cstddef>
#include <vector>

#include "csisense/stft.hpp"

namespace csisense {

enum class Wavelet { haar, db4 };

// Orthonormal analysis filter pair (lowpass, highpass QMF).
struct WaveletFilters {
  std::vector<double> lo;
  std::vector<double> hi;
};
WaveletFilters wavelet_filters(Wavelet wavelet);

// Multi-level decomposition.  details[0] is the finest level; approx is the
// coarsest approximation.  input_lengths records the pre-extension length
// fed to each level so the inverse can truncate back exactly.
struct DwtPyramid {
  Wavelet wavelet = Wavelet::haar;
  std::vector<std::vector<double>> details;
  std::vector<double> approx;
  std::vector<std::size_t> input_lengths;
};

// Periodized DWT.  Odd-length inputs at any level are symmetrically
// extended by repeating the final sample before wrapping, which keeps the
// per-level operator orthogonal and the round trip exact.
DwtPyramid dwt(const Series& s, Wavelet wavelet, std::size_t levels);

// Inverse transform; reproduces dwt's input within 1e-10.
Series idwt(const DwtPyramid& pyramid);

}  // namespace csisense
