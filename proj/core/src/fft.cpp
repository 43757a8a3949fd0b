#include "csisense/fft.hpp"

#include <bit>
#include <cmath>
#include <numbers>

#include "csisense/error.hpp"

namespace csisense {
namespace {

using cd = std::complex<double>;

// In-place iterative radix-2 Cooley-Tukey; n must be a power of two.
// sign = -1 gives the forward transform.
void fft_pow2(std::vector<cd>& a, int sign) {
  const std::size_t n = a.size();
  if (n <= 1) return;

  // Bit-reversal permutation.
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }

  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang =
        static_cast<double>(sign) * 2.0 * std::numbers::pi /
        static_cast<double>(len);
    const cd wlen = std::polar(1.0, ang);
    for (std::size_t i = 0; i < n; i += len) {
      cd w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const cd u = a[i + k];
        const cd v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

// Chirp phasor e^{sign * j * pi * k^2 / n}, with k^2 reduced mod 2n in
// integer arithmetic so large indices lose no precision.
cd chirp(std::size_t k, std::size_t n, int sign) {
  const std::size_t m = (k * k) % (2 * n);
  return std::polar(1.0, static_cast<double>(sign) * std::numbers::pi *
                             static_cast<double>(m) / static_cast<double>(n));
}

// Bluestein: any-length DFT as a circular convolution of two chirps.
std::vector<cd> fft_bluestein(const std::vector<cd>& x, int sign) {
  const std::size_t n = x.size();
  const std::size_t m = std::bit_ceil(2 * n - 1);

  std::vector<cd> a(m, cd{0.0, 0.0});
  std::vector<cd> b(m, cd{0.0, 0.0});
  for (std::size_t k = 0; k < n; ++k) {
    a[k] = x[k] * chirp(k, n, sign);
    b[k] = chirp(k, n, -sign);
    if (k != 0) b[m - k] = b[k];
  }
  fft_pow2(a, -1);
  fft_pow2(b, -1);
  for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
  fft_pow2(a, +1);

  std::vector<cd> out(n);
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = a[k] * inv_m * chirp(k, n, sign);
  }
  return out;
}

std::vector<cd> dft(std::vector<cd> x, int sign) {
  if (x.empty()) {
    throw ValidationError("fft input must be non-empty");
  }
  if (std::has_single_bit(x.size())) {
    fft_pow2(x, sign);
    return x;
  }
  return fft_bluestein(x, sign);
}

}  // namespace

std::vector<cd> fft(std::vector<cd> x) { return dft(std::move(x), -1); }

std::vector<cd> ifft(std::vector<cd> x) {
  const double inv_n = 1.0 / static_cast<double>(x.size());
  std::vector<cd> out = dft(std::move(x), +1);
  for (auto& z : out) z *= inv_n;
  return out;
}

}  // namespace csisense
