#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "csisense/matrix.hpp"

namespace csisense {

// Fixed-kernel dilated-convolution features with PPV pooling.  The 84
// kernels are the C(9,3) placements of three +2 taps among -1s; each kernel
// contributes 119 features spread over the dilation set, 9,996 in total.
struct MiniRocketModel {
  std::size_t fit_length = 0;
  std::vector<std::array<int, 3>> kernels;  // +2 tap positions, 0..8
  std::vector<std::size_t> dilations;
  // features per (kernel, dilation) pair; same for every kernel.
  std::vector<std::size_t> features_per_dilation;
  // biases[d][k] holds features_per_dilation[d] thresholds for kernel k.
  std::vector<std::vector<std::vector<double>>> biases;
  std::size_t feature_count = 0;
};

// Fits biases from golden-ratio quantiles of the convolution outputs pooled
// across the whole fit set, so the model is independent of sample order.
// The seed is accepted for interface stability; the quantile construction
// draws nothing from it.
MiniRocketModel minirocket_fit(const RealMatrix& x, std::uint64_t seed = 0);

// PPV features in [0, 1], one row per series, laid out dilation-major then
// kernel then bias.  Dilations whose receptive field exceeds the series are
// dropped with a warning pushed to `warnings` when given.
RealMatrix minirocket_transform(const MiniRocketModel& model,
                                const RealMatrix& x,
                                std::vector<std::string>* warnings = nullptr);

}  // namespace csisense
