#include "csisense/dwt.hpp"

#include <numbers>

#include "csisense/error.hpp"

namespace csisense {
namespace {

// 8-tap Daubechies-4 analysis lowpass (time-reversed scaling coefficients).
constexpr double kDb4Lo[8] = {
    -0.010597401784997278, 0.032883011666982945, 0.030841381835986965,
    -0.18703481171888114,  -0.02798376941698385, 0.6308807679295904,
    0.7148465705525415,    0.23037781330885523};

}  // namespace

WaveletFilters wavelet_filters(Wavelet wavelet) {
  WaveletFilters f;
  switch (wavelet) {
    case Wavelet::haar: {
      const double c = 1.0 / std::numbers::sqrt2;
      f.lo = {c, c};
      break;
    }
    case Wavelet::db4:
      f.lo.assign(kDb4Lo, kDb4Lo + 8);
      break;
  }
  // Quadrature mirror: hi[m] = (-1)^m lo[L-1-m].
  const std::size_t L = f.lo.size();
  f.hi.resize(L);
  for (std::size_t m = 0; m < L; ++m) {
    f.hi[m] = (m % 2 == 0 ? 1.0 : -1.0) * f.lo[L - 1 - m];
  }
  return f;
}

DwtPyramid dwt(const Series& s, Wavelet wavelet, std::size_t levels) {
  if (s.empty()) {
    throw ValidationError("dwt input must be non-empty");
  }
  if (levels < 1) {
    throw ValidationError("dwt needs levels >= 1");
  }
  const WaveletFilters f = wavelet_filters(wavelet);
  const std::size_t L = f.lo.size();

  DwtPyramid p;
  p.wavelet = wavelet;
  std::vector<double> x = s;
  for (std::size_t level = 0; level < levels; ++level) {
    p.input_lengths.push_back(x.size());
    if (x.size() % 2 != 0) x.push_back(x.back());
    const std::size_t n = x.size();
    const std::size_t half = n / 2;
    std::vector<double> approx(half, 0.0), detail(half, 0.0);
    for (std::size_t k = 0; k < half; ++k) {
      double a = 0.0, d = 0.0;
      for (std::size_t m = 0; m < L; ++m) {
        const double v = x[(2 * k + m) % n];
        a += f.lo[m] * v;
        d += f.hi[m] * v;
      }
      approx[k] = a;
      detail[k] = d;
    }
    p.details.push_back(std::move(detail));
    x = std::move(approx);
  }
  p.approx = std::move(x);
  return p;
}

Series idwt(const DwtPyramid& pyramid) {
  if (pyramid.details.empty() ||
      pyramid.details.size() != pyramid.input_lengths.size()) {
    throw ValidationError("dwt pyramid is empty or inconsistent");
  }
  const WaveletFilters f = wavelet_filters(pyramid.wavelet);
  const std::size_t L = f.lo.size();

  std::vector<double> x = pyramid.approx;
  for (std::size_t level = pyramid.details.size(); level-- > 0;) {
    const std::vector<double>& detail = pyramid.details[level];
    if (detail.size() != x.size()) {
      throw ValidationError("dwt pyramid level " + std::to_string(level) +
                            " has mismatched approx/detail lengths");
    }
    const std::size_t n = 2 * x.size();
    std::vector<double> up(n, 0.0);
    // Transpose of the orthonormal analysis operator.
    for (std::size_t k = 0; k < x.size(); ++k) {
      for (std::size_t m = 0; m < L; ++m) {
        up[(2 * k + m) % n] += f.lo[m] * x[k] + f.hi[m] * detail[k];
      }
    }
    up.resize(pyramid.input_lengths[level]);  // drop the extension sample
    x = std::move(up);
  }
  return x;
}

}  // namespace csisense
