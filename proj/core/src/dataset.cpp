#include "csisense/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

#include "csisense/error.hpp"
#include "csisense/random.hpp"

namespace csisense {
namespace {

// Indices of each class, classes ascending, order within a class preserved.
std::vector<std::vector<std::size_t>> group_by_label(
    const std::vector<std::size_t>& labels) {
  std::size_t num_classes = 0;
  for (std::size_t lab : labels) num_classes = std::max(num_classes, lab + 1);
  std::vector<std::vector<std::size_t>> groups(num_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    groups[labels[i]].push_back(i);
  }
  return groups;
}

void shuffle_indices(std::vector<std::size_t>& indices, RandomStream& rng) {
  for (std::size_t i = indices.size(); i > 1; --i) {
    std::swap(indices[i - 1], indices[rng.next_below(i)]);
  }
}

}  // namespace

std::vector<std::size_t> SampleDataset::labels() const {
  std::vector<std::size_t> out;
  out.reserve(samples.size());
  for (const LabeledSample& s : samples) out.push_back(s.label);
  return out;
}

void SampleDataset::validate() const {
  if (samples.empty()) {
    throw ValidationError("dataset is empty");
  }
  if (num_classes < 2) {
    throw ValidationError("dataset needs at least 2 classes");
  }
  const auto& shape = samples.front().input.shape();
  if (shape.size() != 3) {
    throw ValidationError("dataset samples must be 3-d {C,H,W} tensors");
  }
  std::vector<std::size_t> class_counts(num_classes, 0);
  for (const LabeledSample& s : samples) {
    if (s.input.shape() != shape) {
      throw ValidationError("dataset samples disagree in shape");
    }
    if (s.label >= num_classes) {
      throw ValidationError("sample label " + std::to_string(s.label) +
                            " is outside the " +
                            std::to_string(num_classes) + "-class range");
    }
    ++class_counts[s.label];
  }
  for (std::size_t c = 0; c < num_classes; ++c) {
    if (class_counts[c] == 0) {
      throw ValidationError("class " + std::to_string(c) +
                            " has no samples");
    }
  }
}

nn::Tensor sample_from_record(const CsiTensor& record) {
  record.validate();
  const std::size_t channels = record.m() * record.n();
  nn::Tensor out({channels, record.s(), record.t()});
  double mean = 0.0;
  for (std::size_t t = 0; t < record.t(); ++t)
    for (std::size_t s = 0; s < record.s(); ++s)
      for (std::size_t m = 0; m < record.m(); ++m)
        for (std::size_t n = 0; n < record.n(); ++n) {
          const double amp = std::abs(record.at(t, s, m, n));
          out[((m * record.n() + n) * record.s() + s) * record.t() + t] = amp;
          mean += amp;
        }
  mean /= static_cast<double>(out.numel());
  double var = 0.0;
  for (std::size_t i = 0; i < out.numel(); ++i) {
    var += (out[i] - mean) * (out[i] - mean);
  }
  const double std_dev = std::sqrt(var / static_cast<double>(out.numel()));
  if (std_dev < 1e-12) {
    out.fill(0.0);
    return out;
  }
  for (std::size_t i = 0; i < out.numel(); ++i) {
    out[i] = (out[i] - mean) / std_dev;
  }
  return out;
}

std::vector<double> mean_amplitude_series(const CsiTensor& record) {
  record.validate();
  std::vector<double> series(record.t(), 0.0);
  const std::size_t per_step = record.s() * record.m() * record.n();
  for (std::size_t t = 0; t < record.t(); ++t) {
    double acc = 0.0;
    for (std::size_t s = 0; s < record.s(); ++s)
      for (std::size_t m = 0; m < record.m(); ++m)
        for (std::size_t n = 0; n < record.n(); ++n) {
          acc += std::abs(record.at(t, s, m, n));
        }
    series[t] = acc / static_cast<double>(per_step);
  }
  return series;
}

SampleDataset dataset_from_records(
    const std::vector<std::pair<CsiTensor, int>>& records) {
  if (records.empty()) {
    throw ValidationError("cannot build a dataset from zero records");
  }
  std::map<int, std::size_t> id_of;
  for (const auto& [record, label] : records) id_of.emplace(label, 0);
  std::size_t next = 0;
  for (auto& [label, id] : id_of) id = next++;

  SampleDataset data;
  data.num_classes = id_of.size();
  data.samples.reserve(records.size());
  for (const auto& [record, label] : records) {
    data.samples.push_back({sample_from_record(record), id_of.at(label)});
  }
  data.validate();
  return data;
}

SplitIndices stratified_split(const std::vector<std::size_t>& labels,
                              double ratio, std::uint64_t seed,
                              std::vector<std::string>* warnings) {
  if (labels.empty()) {
    throw ValidationError("cannot split an empty dataset");
  }
  if (!(ratio > 0.0 && ratio < 1.0)) {
    throw ValidationError("split ratio must lie in (0, 1)");
  }
  RandomStream rng(seed);
  SplitIndices split;
  auto groups = group_by_label(labels);
  for (std::size_t c = 0; c < groups.size(); ++c) {
    auto& members = groups[c];
    if (members.empty()) continue;
    if (members.size() == 1) {
      if (warnings != nullptr) {
        warnings->push_back("class " + std::to_string(c) +
                            " has a single sample; assigned to train");
      }
      split.train.push_back(members.front());
      continue;
    }
    shuffle_indices(members, rng);
    std::size_t take =
        static_cast<std::size_t>(ratio * static_cast<double>(members.size()));
    take = std::max<std::size_t>(1, std::min(take, members.size() - 1));
    split.train.insert(split.train.end(), members.begin(),
                       members.begin() + take);
    split.test.insert(split.test.end(), members.begin() + take,
                      members.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

std::vector<std::size_t> sample_n_per_class(
    const std::vector<std::size_t>& labels, std::size_t per_class,
    std::uint64_t seed) {
  if (labels.empty()) {
    throw ValidationError("cannot sample from an empty dataset");
  }
  RandomStream rng(seed);
  std::vector<std::size_t> chosen;
  auto groups = group_by_label(labels);
  for (std::size_t c = 0; c < groups.size(); ++c) {
    auto& members = groups[c];
    if (per_class == 0) {
      chosen.insert(chosen.end(), members.begin(), members.end());
      continue;
    }
    if (members.size() < per_class) {
      throw ValidationError("class " + std::to_string(c) + " has only " +
                            std::to_string(members.size()) +
                            " samples, need " + std::to_string(per_class));
    }
    shuffle_indices(members, rng);
    chosen.insert(chosen.end(), members.begin(), members.begin() + per_class);
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

nn::Tensor crop_or_pad(const nn::Tensor& x, std::size_t height,
                       std::size_t width) {
  if (x.ndim() != 3) {
    throw ValidationError("crop_or_pad expects a {C,H,W} tensor");
  }
  if (height == 0 || width == 0) {
    throw ValidationError("crop_or_pad target shape must be positive");
  }
  const std::size_t channels = x.dim(0);
  const std::size_t h_in = x.dim(1);
  const std::size_t w_in = x.dim(2);
  if (h_in == height && w_in == width) return x.clone();

  nn::Tensor out({channels, height, width});
  // Source offset when cropping, destination offset when padding; both
  // centered.
  const std::size_t h_src = h_in > height ? (h_in - height) / 2 : 0;
  const std::size_t w_src = w_in > width ? (w_in - width) / 2 : 0;
  const std::size_t h_dst = h_in < height ? (height - h_in) / 2 : 0;
  const std::size_t w_dst = w_in < width ? (width - w_in) / 2 : 0;
  const std::size_t h_copy = std::min(h_in, height);
  const std::size_t w_copy = std::min(w_in, width);
  for (std::size_t c = 0; c < channels; ++c)
    for (std::size_t h = 0; h < h_copy; ++h)
      for (std::size_t w = 0; w < w_copy; ++w) {
        out[(c * height + h + h_dst) * width + w + w_dst] =
            x[(c * h_in + h + h_src) * w_in + w + w_src];
      }
  return out;
}

SampleDataset subset(const SampleDataset& data,
                     const std::vector<std::size_t>& indices) {
  SampleDataset out;
  out.num_classes = data.num_classes;
  out.samples.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= data.samples.size()) {
      throw ValidationError("subset index out of range");
    }
    out.samples.push_back(
        {data.samples[i].input.clone(), data.samples[i].label});
  }
  return out;
}

}  // namespace csisense
