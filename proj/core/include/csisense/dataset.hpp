#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "csisense/csi_tensor.hpp"
#include "csisense/nn/autodiff.hpp"

namespace csisense {

// One network-ready example: a {channels, subcarriers, time} input plus a
// contiguous class id.
struct LabeledSample {
  nn::Tensor input;
  std::size_t label = 0;
};

struct SampleDataset {
  std::vector<LabeledSample> samples;
  std::size_t num_classes = 0;

  std::size_t channels() const { return samples.front().input.dim(0); }
  std::size_t height() const { return samples.front().input.dim(1); }
  std::size_t width() const { return samples.front().input.dim(2); }

  std::vector<std::size_t> labels() const;
  // Non-empty, uniform 3-d shapes, every label < num_classes, every class
  // represented.
  void validate() const;
};

// {T,S,M,N} record -> {M*N, S, T} standardized amplitude image: antenna
// pairs fold into channels, and the whole sample is shifted/scaled to zero
// mean and unit deviation (an all-constant record maps to zeros).
nn::Tensor sample_from_record(const CsiTensor& record);

// Mean amplitude over (S, M, N) per timestep: the length-T series consumed
// by the feature-vector baselines.
std::vector<double> mean_amplitude_series(const CsiTensor& record);

// Remaps the labels of generated records onto contiguous ids (ascending
// original label order) and converts every record.
SampleDataset dataset_from_records(
    const std::vector<std::pair<CsiTensor, int>>& records);

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Disjoint, exhaustive, per-class split: floor(ratio * n_c) of each class
// goes to train, clamped so both sides stay non-empty; a single-sample
// class goes to train with a warning.  Deterministic in the seed.
SplitIndices stratified_split(const std::vector<std::size_t>& labels,
                              double ratio, std::uint64_t seed,
                              std::vector<std::string>* warnings = nullptr);

// Seeded stratified subsample without replacement: per_class indices from
// every class (all of them when per_class is 0).  A class smaller than
// per_class is an error naming the class.
std::vector<std::size_t> sample_n_per_class(
    const std::vector<std::size_t>& labels, std::size_t per_class,
    std::uint64_t seed);

// Shape reconciliation for transfer: center-crops oversized axes and
// zero-pads undersized ones, keeping the channel count fixed.
nn::Tensor crop_or_pad(const nn::Tensor& x, std::size_t height,
                       std::size_t width);

SampleDataset subset(const SampleDataset& data,
                     const std::vector<std::size_t>& indices);

}  // namespace csisense
