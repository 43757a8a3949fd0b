#pragma once

#include <complex>
#include <cstdint>
#include <vector>

#include "csisense/csi_tensor.hpp"

namespace csisense {

// Estimates the common phase error of each timestamp as the argument of
// the mean unit phasor over that timestamp's entries and rotates it out;
// amplitudes are untouched.  Timestamps whose entries are all zero are
// skipped and listed in meta["cpe_skipped_timestamps"].
CsiTensor cpe_compensate(const CsiTensor& csi);

enum class PhaseDiffAxis { subcarrier, time };

// Wrapped difference of adjacent phases along the chosen axis; the output
// field is one shorter along that axis.
RealField phase_diff(const CsiTensor& csi, PhaseDiffAxis axis);

// H_{rx_i} / H_{rx_j} on the first tx chain, per (timestamp, subcarrier).
struct CsiRatioResult {
  std::size_t t = 0, s = 0;
  std::vector<std::complex<double>> values;          // row-major (t, s)
  std::vector<std::uint8_t> entry_flagged;           // denominator under eps
  std::vector<std::size_t> underflow_timestamps;     // all subcarriers flagged

  const std::complex<double>& at(std::size_t ti, std::size_t si) const {
    return values[ti * s + si];
  }
};

CsiRatioResult csi_ratio(const CsiTensor& csi, std::size_t rx_i,
                         std::size_t rx_j);

}  // namespace csisense
