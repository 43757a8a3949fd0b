#pragma once

#include <cstdint>
#include <utility>

#include "csisense/nn/autodiff.hpp"
#include "csisense/random.hpp"

namespace csisense::nn {

inline constexpr double kAugmentNoiseStd = 0.01;
inline constexpr double kAugmentMaskProb = 0.1;

// One stochastic view: additive Gaussian noise (std 0.01) over the whole
// tensor, then an independent Bernoulli(0.1) zero-mask.  The noise pass
// consumes its draws before the mask pass starts.
Tensor augment_view(const Tensor& x, RandomStream& rng);

// Two independent views of the same input, deterministic in the seed.
std::pair<Tensor, Tensor> two_crop(const Tensor& x, std::uint64_t seed);

}  // namespace csisense::nn
