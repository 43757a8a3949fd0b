#include "csisense/minirocket.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "csisense/error.hpp"

namespace csisense {
namespace {

constexpr std::size_t kKernelLen = 9;
constexpr std::size_t kNumKernels = 84;       // C(9,3)
constexpr std::size_t kFeaturesPerKernel = 119;
constexpr std::size_t kMaxDilations = 32;

std::vector<std::array<int, 3>> make_kernels() {
  std::vector<std::array<int, 3>> kernels;
  kernels.reserve(kNumKernels);
  for (int a = 0; a < 9; ++a)
    for (int b = a + 1; b < 9; ++b)
      for (int c = b + 1; c < 9; ++c) kernels.push_back({a, b, c});
  return kernels;
}

std::vector<std::size_t> make_dilations(std::size_t len) {
  const double max_exp = std::log2(static_cast<double>(len - 1) / 8.0);
  std::set<std::size_t> dils;
  for (std::size_t i = 0; i < kMaxDilations; ++i) {
    const double t = max_exp * static_cast<double>(i) /
                     static_cast<double>(kMaxDilations - 1);
    dils.insert(static_cast<std::size_t>(std::floor(std::pow(2.0, t))));
  }
  return {dils.begin(), dils.end()};
}

std::vector<std::size_t> spread_features(std::size_t num_dilations) {
  const std::size_t q = kFeaturesPerKernel / num_dilations;
  const std::size_t r = kFeaturesPerKernel % num_dilations;
  std::vector<std::size_t> counts(num_dilations, q);
  for (std::size_t i = 0; i < r; ++i) ++counts[i];
  return counts;
}

// Whether feature group (kernel, dilation) pools over the zero-padded
// (full-length) convolution or only its valid centre.
bool uses_padding(std::size_t kernel_index, std::size_t dilation_index) {
  return (kernel_index + dilation_index) % 2 == 0;
}

// Dilated convolution of one series with one kernel, zero-padded to the
// input length.  Exploits the {-1,+2} structure: the response is three
// times the sum of the +2 taps minus the sum of all nine taps.
void convolve(const double* x, std::size_t len, const std::array<int, 3>& k,
              std::size_t dilation, std::vector<double>& out) {
  const auto d = static_cast<std::ptrdiff_t>(dilation);
  const auto n = static_cast<std::ptrdiff_t>(len);
  out.assign(len, 0.0);
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    double all = 0.0;
    for (std::ptrdiff_t m = 0; m < 9; ++m) {
      const std::ptrdiff_t j = i + (m - 4) * d;
      if (j >= 0 && j < n) all += x[j];
    }
    double chosen = 0.0;
    for (int p : k) {
      const std::ptrdiff_t j = i + (p - 4) * d;
      if (j >= 0 && j < n) chosen += x[j];
    }
    out[static_cast<std::size_t>(i)] = 3.0 * chosen - all;
  }
}

// Golden-ratio quantile positions (i * phi) mod 1 for i = 1..n.
std::vector<double> quantile_positions(std::size_t n) {
  constexpr double phi = 1.618033988749894848;
  std::vector<double> q(n);
  for (std::size_t i = 0; i < n; ++i) {
    q[i] = std::fmod(static_cast<double>(i + 1) * phi, 1.0);
  }
  return q;
}

// Linear-interpolation quantile of an unsorted pool (sorts in place).
double quantile(std::vector<double>& pool, double q) {
  std::sort(pool.begin(), pool.end());
  const double pos = q * static_cast<double>(pool.size() - 1);
  const auto lo = static_cast<std::size_t>(pos);
  if (lo + 1 >= pool.size()) return pool.back();
  const double frac = pos - static_cast<double>(lo);
  return pool[lo] + frac * (pool[lo + 1] - pool[lo]);
}

}  // namespace

MiniRocketModel minirocket_fit(const RealMatrix& x, std::uint64_t) {
  if (x.rows < 1 || x.cols < kKernelLen) {
    throw ValidationError("minirocket_fit needs at least one series of "
                          "length >= 9");
  }
  MiniRocketModel model;
  model.fit_length = x.cols;
  model.kernels = make_kernels();
  model.dilations = make_dilations(x.cols);
  model.features_per_dilation = spread_features(model.dilations.size());

  model.biases.resize(model.dilations.size());
  std::vector<double> conv;
  std::vector<double> pool;
  for (std::size_t di = 0; di < model.dilations.size(); ++di) {
    const std::size_t dilation = model.dilations[di];
    const std::size_t valid = x.cols - 8 * dilation;  // >= 1 by construction
    const auto positions = quantile_positions(model.features_per_dilation[di]);
    model.biases[di].resize(kNumKernels);
    for (std::size_t k = 0; k < kNumKernels; ++k) {
      const bool padded = uses_padding(k, di);
      pool.clear();
      pool.reserve(x.rows * (padded ? x.cols : valid));
      for (std::size_t r = 0; r < x.rows; ++r) {
        convolve(x.row(r), x.cols, model.kernels[k], dilation, conv);
        if (padded) {
          pool.insert(pool.end(), conv.begin(), conv.end());
        } else {
          pool.insert(pool.end(), conv.begin() + static_cast<std::ptrdiff_t>(4 * dilation),
                      conv.begin() + static_cast<std::ptrdiff_t>(4 * dilation + valid));
        }
      }
      auto& biases = model.biases[di][k];
      biases.reserve(positions.size());
      for (double q : positions) {
        biases.push_back(quantile(pool, q));
      }
    }
  }
  for (std::size_t count : model.features_per_dilation) {
    model.feature_count += count * kNumKernels;
  }
  return model;
}

RealMatrix minirocket_transform(const MiniRocketModel& model,
                                const RealMatrix& x,
                                std::vector<std::string>* warnings) {
  if (x.rows < 1 || x.cols < kKernelLen) {
    throw ValidationError("minirocket_transform needs series of length >= 9");
  }

  // Dilations whose receptive field no longer fits this series length are
  // dropped as a group.
  std::vector<std::size_t> kept;
  std::size_t out_cols = 0;
  for (std::size_t di = 0; di < model.dilations.size(); ++di) {
    if (8 * model.dilations[di] + 1 > x.cols) {
      if (warnings != nullptr) {
        warnings->push_back(
            "dropping dilation " + std::to_string(model.dilations[di]) +
            ": receptive field exceeds series length " +
            std::to_string(x.cols));
      }
      continue;
    }
    kept.push_back(di);
    out_cols += model.features_per_dilation[di] * kNumKernels;
  }

  RealMatrix features(x.rows, out_cols);
  std::vector<double> conv;
  for (std::size_t r = 0; r < x.rows; ++r) {
    std::size_t col = 0;
    for (std::size_t di : kept) {
      const std::size_t dilation = model.dilations[di];
      const std::size_t valid = x.cols - 8 * dilation;
      for (std::size_t k = 0; k < kNumKernels; ++k) {
        convolve(x.row(r), x.cols, model.kernels[k], dilation, conv);
        const bool padded = uses_padding(k, di);
        const std::size_t begin = padded ? 0 : 4 * dilation;
        const std::size_t count = padded ? x.cols : valid;
        for (double bias : model.biases[di][k]) {
          std::size_t positive = 0;
          for (std::size_t i = begin; i < begin + count; ++i) {
            if (conv[i] > bias) ++positive;
          }
          features.at(r, col++) =
              static_cast<double>(positive) / static_cast<double>(count);
        }
      }
    }
  }
  return features;
}

}  // namespace csisense
