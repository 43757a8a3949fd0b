#pragma once

#include <complex>
#include <vector>

namespace csisense {

// Unnormalized forward DFT: X[k] = sum_n x[n] e^{-j 2 pi k n / N}.
// Power-of-two lengths run on an iterative radix-2 kernel; everything else
// goes through Bluestein's chirp-z reduction to a padded power of two.
std::vector<std::complex<double>> fft(std::vector<std::complex<double>> x);

// Inverse DFT with the 1/N convention, so ifft(fft(x)) == x.
std::vector<std::complex<double>> ifft(std::vector<std::complex<double>> x);

}  // namespace csisense
