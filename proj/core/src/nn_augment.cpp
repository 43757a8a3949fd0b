#include "csisense/nn/augment.hpp"

#include <cmath>

#include "csisense/error.hpp"

namespace csisense::nn {

Tensor augment_view(const Tensor& x, RandomStream& rng) {
  if (x.numel() == 0) {
    throw ValidationError("augment_view needs a non-empty tensor");
  }
  for (std::size_t i = 0; i < x.numel(); ++i) {
    if (!std::isfinite(x[i])) {
      throw ValidationError("augment_view needs finite input");
    }
  }
  Tensor out = x.clone();
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out[i] += kAugmentNoiseStd * rng.gaussian();
  }
  for (std::size_t i = 0; i < out.numel(); ++i) {
    if (rng.uniform() < kAugmentMaskProb) out[i] = 0.0;
  }
  return out;
}

std::pair<Tensor, Tensor> two_crop(const Tensor& x, std::uint64_t seed) {
  RandomStream rng(seed);
  Tensor first = augment_view(x, rng);
  Tensor second = augment_view(x, rng);
  return {std::move(first), std::move(second)};
}

}  // namespace csisense::nn
