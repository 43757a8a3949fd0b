#include "csisense/phase_clean.hpp"

#include <cmath>
#include <string>

#include "csisense/error.hpp"

namespace csisense {

CsiTensor cpe_compensate(const CsiTensor& csi) {
  csi.validate();
  if (csi.s() < 2) {
    throw ValidationError("cpe_compensate needs at least 2 subcarriers");
  }

  CsiTensor out = csi;
  std::string skipped;
  for (std::size_t t = 0; t < csi.t(); ++t) {
    std::complex<double> mean{0.0, 0.0};
    std::size_t used = 0;
    for (std::size_t s = 0; s < csi.s(); ++s) {
      for (std::size_t m = 0; m < csi.m(); ++m) {
        for (std::size_t n = 0; n < csi.n(); ++n) {
          const auto& z = csi.at(t, s, m, n);
          const double mag = std::abs(z);
          if (mag > 0.0) {
            mean += z / mag;
            ++used;
          }
        }
      }
    }
    if (used == 0) {
      if (!skipped.empty()) skipped += ',';
      skipped += std::to_string(t);
      continue;
    }
    const auto correction = std::polar(1.0, -std::arg(mean));
    for (std::size_t s = 0; s < csi.s(); ++s) {
      for (std::size_t m = 0; m < csi.m(); ++m) {
        for (std::size_t n = 0; n < csi.n(); ++n) {
          out.at(t, s, m, n) = csi.at(t, s, m, n) * correction;
        }
      }
    }
  }
  if (!skipped.empty()) {
    out.meta["cpe_skipped_timestamps"] = skipped;
  }
  return out;
}

RealField phase_diff(const CsiTensor& csi, PhaseDiffAxis axis) {
  csi.validate();
  const AmpPhaseView view = split_amp_phase(csi);
  if (axis == PhaseDiffAxis::subcarrier) {
    if (csi.s() < 2) {
      throw ValidationError("phase_diff needs >= 2 subcarriers on the "
                            "subcarrier axis");
    }
    RealField out(csi.t(), csi.s() - 1, csi.m(), csi.n());
    for (std::size_t t = 0; t < csi.t(); ++t)
      for (std::size_t s = 0; s + 1 < csi.s(); ++s)
        for (std::size_t m = 0; m < csi.m(); ++m)
          for (std::size_t n = 0; n < csi.n(); ++n)
            out.at(t, s, m, n) = wrap_phase(view.phase.at(t, s + 1, m, n) -
                                            view.phase.at(t, s, m, n));
    return out;
  }
  if (csi.t() < 2) {
    throw ValidationError("phase_diff needs >= 2 timestamps on the time "
                          "axis");
  }
  RealField out(csi.t() - 1, csi.s(), csi.m(), csi.n());
  for (std::size_t t = 0; t + 1 < csi.t(); ++t)
    for (std::size_t s = 0; s < csi.s(); ++s)
      for (std::size_t m = 0; m < csi.m(); ++m)
        for (std::size_t n = 0; n < csi.n(); ++n)
          out.at(t, s, m, n) = wrap_phase(view.phase.at(t + 1, s, m, n) -
                                          view.phase.at(t, s, m, n));
  return out;
}

CsiRatioResult csi_ratio(const CsiTensor& csi, std::size_t rx_i,
                         std::size_t rx_j) {
  csi.validate();
  if (csi.m() < 2) {
    throw ValidationError("csi_ratio needs at least 2 rx antennas");
  }
  if (rx_i == rx_j) {
    throw ValidationError("csi_ratio needs two distinct rx antennas");
  }
  if (rx_i >= csi.m() || rx_j >= csi.m()) {
    throw ValidationError("csi_ratio rx index out of range");
  }
  constexpr double kEps = 1e-9;

  CsiRatioResult out;
  out.t = csi.t();
  out.s = csi.s();
  out.values.resize(csi.t() * csi.s());
  out.entry_flagged.assign(csi.t() * csi.s(), 0);
  for (std::size_t t = 0; t < csi.t(); ++t) {
    std::size_t flagged_here = 0;
    for (std::size_t s = 0; s < csi.s(); ++s) {
      const auto num = csi.at(t, s, rx_i, 0);
      auto den = csi.at(t, s, rx_j, 0);
      if (std::abs(den) < kEps) {
        out.entry_flagged[t * csi.s() + s] = 1;
        ++flagged_here;
        // Floor the denominator magnitude, keeping its direction when it
        // has one.
        den = std::abs(den) > 0.0 ? den * (kEps / std::abs(den))
                                  : std::complex<double>(kEps, 0.0);
      }
      out.values[t * csi.s() + s] = num / den;
    }
    if (flagged_here == csi.s()) {
      out.underflow_timestamps.push_back(t);
    }
  }
  return out;
}

}  // namespace csisense
