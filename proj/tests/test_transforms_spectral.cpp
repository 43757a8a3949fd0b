#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include <doctest.h>

#include "csisense/dwt.hpp"
#include "csisense/error.hpp"
#include "csisense/fft.hpp"
#include "csisense/random.hpp"
#include "csisense/stft.hpp"

using namespace csisense;
using cd = std::complex<double>;

namespace {

// O(n^2) reference DFT, evaluated independently of the fast path.
std::vector<cd> naive_dft(const std::vector<cd>& x) {
  const std::size_t n = x.size();
  std::vector<cd> out(n);
  for (std::size_t k = 0; k < n; ++k) {
    cd acc{0.0, 0.0};
    for (std::size_t i = 0; i < n; ++i) {
      const double ang = -2.0 * std::numbers::pi * static_cast<double>(k) *
                         static_cast<double>(i) / static_cast<double>(n);
      acc += x[i] * cd{std::cos(ang), std::sin(ang)};
    }
    out[k] = acc;
  }
  return out;
}

std::vector<cd> random_signal(std::size_t n, RandomStream& rng) {
  std::vector<cd> x(n);
  for (auto& z : x) z = {rng.gaussian(), rng.gaussian()};
  return x;
}

// Dense single-level DWT analysis operator with periodic wrap: rows 0..h-1
// are even shifts of the lowpass filter, rows h..n-1 of the highpass.
std::vector<double> filter_bank_matrix(std::size_t n, Wavelet wavelet) {
  const WaveletFilters f = wavelet_filters(wavelet);
  const std::size_t half = n / 2;
  std::vector<double> w(n * n, 0.0);
  for (std::size_t k = 0; k < half; ++k) {
    for (std::size_t m = 0; m < f.lo.size(); ++m) {
      w[k * n + (2 * k + m) % n] += f.lo[m];
      w[(half + k) * n + (2 * k + m) % n] += f.hi[m];
    }
  }
  return w;
}

}  // namespace

TEST_SUITE_BEGIN("transforms_spectral");

TEST_CASE("impulse and pure tone spectra") {
  const auto flat = fft({cd{1, 0}, cd{0, 0}, cd{0, 0}, cd{0, 0}});
  for (const auto& z : flat) {
    CHECK(std::abs(z - cd{1.0, 0.0}) < 1e-12);
  }

  const std::size_t n = 8, bin = 3;
  std::vector<cd> tone(n);
  for (std::size_t i = 0; i < n; ++i) {
    tone[i] = std::polar(1.0, 2.0 * std::numbers::pi *
                                  static_cast<double>(bin * i) /
                                  static_cast<double>(n));
  }
  const auto spec = fft(tone);
  for (std::size_t k = 0; k < n; ++k) {
    CHECK(std::abs(spec[k]) ==
          doctest::Approx(k == bin ? 8.0 : 0.0).epsilon(1e-9));
  }
}

TEST_CASE("fft matches the quadratic DFT oracle on lengths 1..16") {
  RandomStream rng(21);
  for (std::size_t n = 1; n <= 16; ++n) {
    const auto x = random_signal(n, rng);
    const auto fast = fft(x);
    const auto slow = naive_dft(x);
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(std::abs(fast[k] - slow[k]) < 1e-9);
    }
  }
}

TEST_CASE("ifft inverts fft and Parseval holds") {
  RandomStream rng(22);
  for (std::size_t n : {1u, 7u, 12u, 16u, 100u, 256u}) {
    const auto x = random_signal(n, rng);
    const auto spec = fft(x);
    const auto back = ifft(spec);
    double time_energy = 0.0, freq_energy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::abs(back[i] - x[i]) < 1e-10);
      time_energy += std::norm(x[i]);
      freq_energy += std::norm(spec[i]);
    }
    CHECK(time_energy ==
          doctest::Approx(freq_energy / static_cast<double>(n))
              .epsilon(1e-9));
  }
}

TEST_CASE("fft is linear") {
  RandomStream rng(23);
  const auto x = random_signal(11, rng);
  const auto y = random_signal(11, rng);
  const cd a{1.7, -0.3}, b{-0.4, 2.1};
  std::vector<cd> mix(11);
  for (std::size_t i = 0; i < 11; ++i) mix[i] = a * x[i] + b * y[i];
  const auto lhs = fft(mix);
  const auto fx = fft(x), fy = fft(y);
  for (std::size_t k = 0; k < 11; ++k) {
    CHECK(std::abs(lhs[k] - (a * fx[k] + b * fy[k])) < 1e-9);
  }
}

TEST_CASE("stft of a constant signal concentrates in bin 0") {
  const Series s(128, 2.5);
  const StftFrames frames = stft(s, 32, 16, StftWindow::rect);
  CHECK(frames.frames == 7);
  CHECK(frames.bins == 17);
  for (std::size_t f = 0; f < frames.frames; ++f) {
    CHECK(frames.at(f, 0) == doctest::Approx(32 * 2.5).epsilon(1e-9));
    for (std::size_t k = 1; k < frames.bins; ++k) {
      CHECK(frames.at(f, k) < 1e-9);
    }
  }
}

TEST_CASE("stft tracks a frequency switch between halves") {
  // 64 Hz sampling; 5 Hz for the first two seconds, then 20 Hz.
  const double fs = 64.0;
  Series s(256);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double t = static_cast<double>(i) / fs;
    const double f = i < 128 ? 5.0 : 20.0;
    s[i] = std::sin(2.0 * std::numbers::pi * f * t);
  }
  const StftFrames frames = stft(s, 64, 64, StftWindow::hann);
  REQUIRE(frames.frames == 4);
  // Window of one second at 64 Hz puts bin k at k Hz.
  CHECK(frames.argmax_bin(0) == 5);
  CHECK(frames.argmax_bin(1) == 5);
  CHECK(frames.argmax_bin(2) == 20);
  CHECK(frames.argmax_bin(3) == 20);
  CHECK(frames.bin_hz(5, 1.0 / fs, 64) == doctest::Approx(5.0));
}

TEST_CASE("stft with one full-length frame reduces to a windowed fft") {
  RandomStream rng(31);
  Series s(48);
  for (auto& v : s) v = rng.gaussian();
  const StftFrames frames = stft(s, 48, 48, StftWindow::hann);
  REQUIRE(frames.frames == 1);

  std::vector<cd> windowed(48);
  for (std::size_t i = 0; i < 48; ++i) {
    const double w = 0.5 * (1.0 - std::cos(2.0 * std::numbers::pi *
                                           static_cast<double>(i) / 48.0));
    windowed[i] = {s[i] * w, 0.0};
  }
  const auto spec = fft(windowed);
  for (std::size_t k = 0; k < frames.bins; ++k) {
    CHECK(frames.at(0, k) == doctest::Approx(std::abs(spec[k])).epsilon(1e-10));
  }
}

TEST_CASE("stft validates window geometry") {
  const Series s(32, 1.0);
  CHECK_THROWS_AS(stft(s, 64, 16), ValidationError);
  CHECK_THROWS_AS(stft(s, 16, 0), ValidationError);
  CHECK_THROWS_AS(stft(s, 16, 17), ValidationError);
}

TEST_CASE("constant series has zero wavelet details") {
  const Series s(64, 3.25);
  for (const Wavelet w : {Wavelet::haar, Wavelet::db4}) {
    const DwtPyramid p = dwt(s, w, 3);
    for (const auto& level : p.details) {
      for (double v : level) CHECK(std::abs(v) < 1e-12);
    }
  }
}

TEST_CASE("dwt matches the explicit filter-bank matrix") {
  RandomStream rng(41);
  for (const Wavelet w : {Wavelet::haar, Wavelet::db4}) {
    const std::size_t n = 16;
    Series s(n);
    for (auto& v : s) v = rng.gaussian();
    const DwtPyramid p = dwt(s, w, 1);

    const auto mat = filter_bank_matrix(n, w);
    for (std::size_t k = 0; k < n / 2; ++k) {
      double approx = 0.0, detail = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        approx += mat[k * n + i] * s[i];
        detail += mat[(n / 2 + k) * n + i] * s[i];
      }
      CHECK(p.approx[k] == doctest::Approx(approx).epsilon(1e-9));
      CHECK(p.details[0][k] == doctest::Approx(detail).epsilon(1e-9));
    }
  }
}

TEST_CASE("idwt reconstructs exactly, odd lengths included") {
  RandomStream rng(42);
  for (const Wavelet w : {Wavelet::haar, Wavelet::db4}) {
    for (const std::size_t n : {5u, 8u, 11u, 37u, 64u, 100u}) {
      for (std::size_t levels = 1; levels <= 3; ++levels) {
        Series s(n);
        for (auto& v : s) v = rng.uniform(-2.0, 2.0);
        const DwtPyramid p = dwt(s, w, levels);
        const Series back = idwt(p);
        REQUIRE(back.size() == n);
        for (std::size_t i = 0; i < n; ++i) {
          CHECK(std::abs(back[i] - s[i]) < 1e-10);
        }
      }
    }
  }
}

TEST_CASE("dwt validates its inputs") {
  CHECK_THROWS_AS(dwt({}, Wavelet::haar, 1), ValidationError);
  CHECK_THROWS_AS(dwt(Series(8, 1.0), Wavelet::haar, 0), ValidationError);
  DwtPyramid broken;
  CHECK_THROWS_AS(idwt(broken), ValidationError);
}

TEST_SUITE_END();
