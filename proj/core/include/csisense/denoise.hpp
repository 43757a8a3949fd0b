#pragma once

#include <optional>

#include "csisense/dwt.hpp"
#include "csisense/stft.hpp"

namespace csisense {

// FFT brick-wall lowpass: bins with |f| > cutoff_hz zeroed, then inverse
// transformed.  dt is the sampling interval; cutoff must sit below the
// Nyquist frequency 1/(2*dt).
Series lowpass(const Series& s, double dt, double cutoff_hz);

// Wavelet shrinkage: soft-threshold every detail level at the universal
// threshold sigma_hat * sqrt(2 ln len), with sigma_hat estimated as
// median(|finest details|) / 0.6745.  Passing an explicit threshold
// overrides the estimate (0 turns the op into a perfect-reconstruction
// round trip).
Series dwt_denoise(const Series& s, Wavelet wavelet, std::size_t levels,
                   std::optional<double> threshold = std::nullopt);

}  // namespace csisense
