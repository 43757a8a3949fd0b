#pragma once

#include <cstdint>
#include <vector>

#include "csisense/stft.hpp"

namespace csisense {

// Centered mean over an odd window, clipped at the edges so the output
// keeps the input length.
Series moving_average(const Series& s, std::size_t w);

// Centered weighted sum; weights must sum to 1 within 1e-12 and have odd
// length.  Edge windows renormalize over the in-range weights.
Series weighted_ma(const Series& s, const std::vector<double>& weights);

// First-order exponential smoothing: y0 = x0, yk = a*xk + (1-a)*y{k-1}.
Series ewma(const Series& s, double alpha);

// Centered median over an odd window, clipped at the edges.
Series median_filter(const Series& s, std::size_t w);

struct HampelResult {
  Series values;
  std::vector<std::uint8_t> outlier_mask;  // 1 where a point was replaced
};

// Replaces point i by its window median m_i when |x_i - m_i| exceeds
// n_sigma * 1.4826 * MAD_i.  A zero-MAD window flags any deviation.
HampelResult hampel(const Series& s, std::size_t w = 5, double n_sigma = 3.0);

}  // namespace csisense
