#include <algorithm>
#include <cmath>
#include <complex>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <doctest.h>

#include "csisense/csi_tensor.hpp"
#include "csisense/dataset.hpp"
#include "csisense/error.hpp"
#include "csisense/experiment.hpp"
#include "csisense/nn/losses.hpp"
#include "csisense/random.hpp"

using namespace csisense;

namespace {

CsiTensor small_record(std::size_t t, std::size_t s, std::size_t m,
                       std::size_t n, std::uint64_t seed) {
  CsiTensor csi(t, s, m, n);
  csi.sample_interval = 0.01;
  csi.carrier_freqs.assign(s, 0.0);
  for (std::size_t i = 0; i < s; ++i) {
    csi.carrier_freqs[i] = 5.8e9 + 1e6 * static_cast<double>(i);
  }
  RandomStream rng(seed);
  for (auto& v : csi.data()) {
    v = {rng.uniform(0.5, 2.0), rng.uniform(-1.0, 1.0)};
  }
  return csi;
}

std::vector<std::size_t> label_pattern(std::size_t classes,
                                       std::size_t per_class) {
  std::vector<std::size_t> labels;
  for (std::size_t c = 0; c < classes; ++c) {
    labels.insert(labels.end(), per_class, c);
  }
  return labels;
}

// Class c gets a strong constant bump in its own spatial column, so a
// linear readout of any sane embedding separates the classes.
SampleDataset separable_dataset(std::size_t classes, std::size_t per_class,
                                std::uint64_t seed) {
  SampleDataset data;
  data.num_classes = classes;
  RandomStream rng(seed);
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      nn::Tensor x({1, 4, 8});
      for (std::size_t k = 0; k < x.numel(); ++k) {
        x[k] = 0.1 * rng.gaussian();
      }
      for (std::size_t h = 0; h < 4; ++h) {
        x[h * 8 + 2 * c] += 2.0;
      }
      data.samples.push_back({std::move(x), c});
    }
  }
  return data;
}

ExperimentConfig tiny_config(nn::SslAlgorithm algorithm) {
  ExperimentConfig config;
  config.algorithm.algorithm = algorithm;
  config.ssl_epochs = 2;
  config.probe_epochs = 4;
  config.batch_size = 6;
  config.shots = 2;
  config.num_seeds = 1;
  return config;
}

}  // namespace

TEST_SUITE("harness") {

TEST_CASE("sample_from_record standardizes folded amplitudes") {
  const CsiTensor csi = small_record(3, 2, 1, 2, 11);
  const nn::Tensor x = sample_from_record(csi);
  REQUIRE(x.shape() == std::vector<std::size_t>{2, 2, 3});

  double mean = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) mean += x[i];
  mean /= static_cast<double>(x.numel());
  double var = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    var += (x[i] - mean) * (x[i] - mean);
  }
  var /= static_cast<double>(x.numel());
  CHECK(std::abs(mean) < 1e-12);
  CHECK(std::abs(var - 1.0) < 1e-12);

  // Layout: channel = m * N + n, then subcarrier, then time; the linear
  // order of standardized amplitudes must follow it.
  double raw_mean = 0.0;
  double raw_sq = 0.0;
  for (const auto& v : csi.data()) {
    raw_mean += std::abs(v);
    raw_sq += std::abs(v) * std::abs(v);
  }
  raw_mean /= static_cast<double>(csi.size());
  const double raw_std = std::sqrt(raw_sq / static_cast<double>(csi.size()) -
                                   raw_mean * raw_mean);
  for (std::size_t t = 0; t < 3; ++t) {
    for (std::size_t s = 0; s < 2; ++s) {
      for (std::size_t n = 0; n < 2; ++n) {
        const double expected =
            (std::abs(csi.at(t, s, 0, n)) - raw_mean) / raw_std;
        CHECK(x[(n * 2 + s) * 3 + t] == doctest::Approx(expected).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("sample_from_record maps a constant record to zeros") {
  CsiTensor csi(2, 2, 1, 1);
  csi.sample_interval = 0.01;
  csi.carrier_freqs = {5.8e9, 5.81e9};
  for (auto& v : csi.data()) v = {3.0, 4.0};  // |v| = 5 everywhere
  const nn::Tensor x = sample_from_record(csi);
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(x[i] == 0.0);
}

TEST_CASE("mean_amplitude_series averages every antenna and subcarrier") {
  CsiTensor csi(2, 2, 1, 1);
  csi.sample_interval = 0.01;
  csi.carrier_freqs = {5.8e9, 5.81e9};
  csi.at(0, 0, 0, 0) = {3.0, 4.0};  // 5
  csi.at(0, 1, 0, 0) = {0.0, 1.0};  // 1
  csi.at(1, 0, 0, 0) = {6.0, 8.0};  // 10
  csi.at(1, 1, 0, 0) = {2.0, 0.0};  // 2
  const std::vector<double> series = mean_amplitude_series(csi);
  REQUIRE(series.size() == 2);
  CHECK(series[0] == doctest::Approx(3.0));
  CHECK(series[1] == doctest::Approx(6.0));
}

TEST_CASE("dataset_from_records remaps sparse labels to contiguous ids") {
  std::vector<std::pair<CsiTensor, int>> records;
  records.emplace_back(small_record(3, 2, 1, 1, 1), 7);
  records.emplace_back(small_record(3, 2, 1, 1, 2), -3);
  records.emplace_back(small_record(3, 2, 1, 1, 3), 7);
  records.emplace_back(small_record(3, 2, 1, 1, 4), 12);
  const SampleDataset data = dataset_from_records(records);
  CHECK(data.num_classes == 3);
  const std::vector<std::size_t> expected = {1, 0, 1, 2};
  CHECK(data.labels() == expected);
  CHECK(data.channels() == 1);
  CHECK(data.height() == 2);
  CHECK(data.width() == 3);
}

TEST_CASE("stratified_split keeps the per-class ratio exactly") {
  const auto labels = label_pattern(3, 10);
  const SplitIndices split = stratified_split(labels, 0.8, 99);
  CHECK(split.train.size() == 24);
  CHECK(split.test.size() == 6);

  std::vector<std::size_t> train_per_class(3, 0);
  for (std::size_t i : split.train) ++train_per_class[labels[i]];
  for (std::size_t c = 0; c < 3; ++c) CHECK(train_per_class[c] == 8);

  // Disjoint and exhaustive.
  std::vector<std::size_t> all = split.train;
  all.insert(all.end(), split.test.begin(), split.test.end());
  std::sort(all.begin(), all.end());
  for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
}

TEST_CASE("stratified_split is deterministic in the seed") {
  const auto labels = label_pattern(4, 9);
  const SplitIndices a = stratified_split(labels, 0.7, 5);
  const SplitIndices b = stratified_split(labels, 0.7, 5);
  const SplitIndices c = stratified_split(labels, 0.7, 6);
  CHECK(a.train == b.train);
  CHECK(a.test == b.test);
  CHECK(a.train != c.train);
}

TEST_CASE("stratified_split sends a lone sample to train with a warning") {
  std::vector<std::size_t> labels = {0, 0, 0, 0, 1};
  std::vector<std::string> warnings;
  const SplitIndices split = stratified_split(labels, 0.5, 3, &warnings);
  REQUIRE(warnings.size() == 1);
  CHECK(warnings[0].find("class 1") != std::string::npos);
  CHECK(std::count(split.train.begin(), split.train.end(), 4) == 1);
  CHECK(split.test.size() >= 1);

  CHECK_THROWS_AS(stratified_split(labels, 0.0, 3), ValidationError);
  CHECK_THROWS_AS(stratified_split(labels, 1.0, 3), ValidationError);
  CHECK_THROWS_AS(stratified_split({}, 0.5, 3), ValidationError);
}

TEST_CASE("sample_n_per_class draws without replacement") {
  const auto labels = label_pattern(3, 5);
  const auto picked = sample_n_per_class(labels, 2, 17);
  CHECK(picked.size() == 6);
  std::set<std::size_t> unique(picked.begin(), picked.end());
  CHECK(unique.size() == 6);
  std::vector<std::size_t> per_class(3, 0);
  for (std::size_t i : picked) ++per_class[labels[i]];
  for (std::size_t c = 0; c < 3; ++c) CHECK(per_class[c] == 2);

  CHECK(sample_n_per_class(labels, 2, 17) == picked);
  CHECK(sample_n_per_class(labels, 0, 17).size() == labels.size());
}

TEST_CASE("sample_n_per_class names the class it cannot satisfy") {
  std::vector<std::size_t> labels = {0, 0, 0, 1, 1};
  CHECK_THROWS_WITH_AS(sample_n_per_class(labels, 3, 1),
                       doctest::Contains("class 1"), ValidationError);
}

TEST_CASE("crop_or_pad centers both the crop and the pad") {
  nn::Tensor x({1, 4, 6});
  for (std::size_t i = 0; i < x.numel(); ++i) {
    x[i] = static_cast<double>(i);
  }

  const nn::Tensor cropped = crop_or_pad(x, 2, 4);
  REQUIRE(cropped.shape() == std::vector<std::size_t>{1, 2, 4});
  // Rows 1..2, columns 1..4 of the 4 x 6 source.
  for (std::size_t h = 0; h < 2; ++h) {
    for (std::size_t w = 0; w < 4; ++w) {
      CHECK(cropped[h * 4 + w] == x[(h + 1) * 6 + (w + 1)]);
    }
  }

  const nn::Tensor padded = crop_or_pad(x, 6, 8);
  REQUIRE(padded.shape() == std::vector<std::size_t>{1, 6, 8});
  double total = 0.0;
  for (std::size_t i = 0; i < padded.numel(); ++i) total += padded[i];
  double source_total = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) source_total += x[i];
  CHECK(total == doctest::Approx(source_total));
  CHECK(padded[(1 * 8) + 1] == x[0]);  // one row and one column of zeros first
  CHECK(padded[0] == 0.0);

  const nn::Tensor same = crop_or_pad(x, 4, 6);
  CHECK(same.data() != x.data());
  for (std::size_t i = 0; i < x.numel(); ++i) CHECK(same[i] == x[i]);

  CHECK_THROWS_AS(crop_or_pad(nn::Tensor({2, 3}), 2, 2), ValidationError);
  CHECK_THROWS_AS(crop_or_pad(x, 0, 4), ValidationError);
}

TEST_CASE("subset deep-copies the chosen samples") {
  SampleDataset data = separable_dataset(2, 3, 7);
  SampleDataset sub = subset(data, {0, 4});
  REQUIRE(sub.samples.size() == 2);
  CHECK(sub.num_classes == 2);
  CHECK(sub.samples[1].label == 1);
  data.samples[0].input[0] = 1e9;
  CHECK(sub.samples[0].input[0] != 1e9);
  CHECK_THROWS_AS(subset(data, {17}), ValidationError);
}

TEST_CASE("dataset validation rejects structural defects") {
  SampleDataset empty;
  CHECK_THROWS_AS(empty.validate(), ValidationError);

  SampleDataset ragged = separable_dataset(2, 2, 1);
  ragged.samples[1].input = nn::Tensor({1, 4, 7});
  CHECK_THROWS_AS(ragged.validate(), ValidationError);

  SampleDataset stray = separable_dataset(2, 2, 1);
  stray.samples[0].label = 5;
  CHECK_THROWS_AS(stray.validate(), ValidationError);

  SampleDataset hollow = separable_dataset(3, 2, 1);
  hollow.num_classes = 4;  // class 3 exists nowhere
  CHECK_THROWS_AS(hollow.validate(), ValidationError);
}

TEST_CASE("experiment config defaults match the reference operating point") {
  const ExperimentConfig config;
  CHECK(config.ssl_epochs == 50);
  CHECK(config.ssl_lr == 0.01);
  CHECK(config.batch_size == 64);
  CHECK(config.probe_epochs == 20);
  CHECK(config.probe_lr == 0.001);
  CHECK(config.supervised_lr == 0.001);
  CHECK(config.shots == 10);
  CHECK(config.train_ratio == 0.8);
  CHECK(config.num_seeds == 5);
  CHECK(config.augment_probe == false);

  const ExperimentConfig transfer = ExperimentConfig::transfer_defaults();
  CHECK(transfer.mode == ExperimentMode::transfer);
  CHECK(transfer.batch_size == 128);
  CHECK(transfer.probe_epochs == 100);
  CHECK(transfer.ssl_epochs == 50);
}

TEST_CASE("experiment config JSON round trip is lossless and strict") {
  ExperimentConfig config;
  config.mode = ExperimentMode::few_shot_probe;
  config.algorithm.algorithm = nn::SslAlgorithm::vicreg;
  config.algorithm.temperature = 0.25;
  config.algorithm.vic.gamma = 0.5;
  config.ssl_epochs = 12;
  config.shots = 5;
  config.augment_probe = true;

  const ExperimentConfig back =
      experiment_config_from_json(experiment_config_to_json(config));
  CHECK(back.mode == config.mode);
  CHECK(back.algorithm.algorithm == config.algorithm.algorithm);
  CHECK(back.algorithm.temperature == config.algorithm.temperature);
  CHECK(back.algorithm.vic.gamma == config.algorithm.vic.gamma);
  CHECK(back.ssl_epochs == config.ssl_epochs);
  CHECK(back.shots == config.shots);
  CHECK(back.augment_probe == config.augment_probe);

  // Absent keys keep defaults.
  const ExperimentConfig bare = experiment_config_from_json("{}");
  CHECK(bare.ssl_epochs == 50);
  CHECK(bare.batch_size == 64);

  CHECK_THROWS_WITH_AS(experiment_config_from_json(R"({"fooo": 1})"),
                       doctest::Contains("fooo"), ValidationError);
  CHECK_THROWS_AS(experiment_config_from_json(R"({"ssl_epochs": -3})"),
                  ValidationError);
  CHECK_THROWS_AS(experiment_config_from_json(R"({"augment_probe": "yes"})"),
                  ValidationError);
  CHECK_THROWS_AS(
      experiment_config_from_json(R"({"vic_weights": {"gama": 1.0}})"),
      ValidationError);
  CHECK_THROWS_AS(experiment_config_from_json(R"({"batch_size": 1})"),
                  ValidationError);
  CHECK_THROWS_AS(experiment_config_from_json("[1, 2]"), ValidationError);
  CHECK_THROWS_AS(experiment_config_from_json("not json"), ValidationError);
}

TEST_CASE("choose_encoder_config switches on the spatial extent") {
  const nn::EncoderConfig reduced = choose_encoder_config(2, 8, 64);
  CHECK(reduced.stages.front().kernel == 7);
  const nn::EncoderConfig standard = choose_encoder_config(2, 64, 64);
  CHECK(standard.stages.front().kernel == 27);
  CHECK(reduced.embedding_dim() == nn::kEmbeddingDim);
  CHECK(standard.embedding_dim() == nn::kEmbeddingDim);
}

TEST_CASE("curves_to_csv emits one row per point") {
  const std::vector<CurvePoint> points = {{"ssl_loss", 7, 0, 1.5},
                                          {"probe_test_accuracy", 7, 3, 0.25}};
  CHECK(curves_to_csv(points) ==
        "phase,seed,epoch,value\n"
        "ssl_loss,7,0,1.5\n"
        "probe_test_accuracy,7,3,0.25\n");
}

TEST_CASE("chance_floor and the shot monotonicity flag") {
  const double floor = chance_floor(6, 120);
  const double p = 1.0 / 6.0;
  CHECK(floor ==
        doctest::Approx(p - 3.0 * std::sqrt(p * (1.0 - p) / 120.0)));
  CHECK_THROWS_AS(chance_floor(1, 10), ValidationError);
  CHECK_THROWS_AS(chance_floor(4, 0), ValidationError);

  CHECK_FALSE(shot_monotonicity_flag(0.80, 0.79).has_value());
  CHECK_FALSE(shot_monotonicity_flag(0.80, 0.95).has_value());
  const auto flag = shot_monotonicity_flag(0.80, 0.70);
  REQUIRE(flag.has_value());
  CHECK(flag->find("10-shot") != std::string::npos);
}

TEST_CASE("aggregate_probe_report is an arithmetic mean over seeds") {
  ProbeSeedStats a;
  a.seed = 1;
  a.accuracy = 0.5;
  a.per_class_accuracy = {0.4, 0.6};
  a.embedding_std = {1.0, 3.0};
  a.runtime_s = 2.0;
  ProbeSeedStats b = a;
  b.seed = 2;
  b.accuracy = 0.7;
  b.per_class_accuracy = {0.8, 0.6};
  b.embedding_std = {2.0, 1.0};
  b.runtime_s = 4.0;

  const ProbeReport report = aggregate_probe_report({a, b});
  CHECK(report.accuracy == doctest::Approx(0.6));
  CHECK(report.per_class_accuracy[0] == doctest::Approx(0.6));
  CHECK(report.per_class_accuracy[1] == doctest::Approx(0.6));
  CHECK(report.embedding_std[0] == doctest::Approx(1.5));
  CHECK(report.embedding_std[1] == doctest::Approx(2.0));
  CHECK(report.runtime_s == doctest::Approx(3.0));
  CHECK(report.seeds_used == std::vector<std::uint64_t>{1, 2});
  CHECK(report.per_seed.size() == 2);
  CHECK_THROWS_AS(aggregate_probe_report({}), ValidationError);

  const std::string json = probe_report_to_json(report);
  CHECK(json.find("\"accuracy\"") != std::string::npos);
  CHECK(json.find("\"per_seed\"") != std::string::npos);
  CHECK(json.find("\"encoder_frozen\"") != std::string::npos);
}

TEST_CASE("pretrain_ssl runs every objective and logs its diagnostics") {
  SampleDataset data = separable_dataset(2, 8, 21);
  std::vector<nn::Tensor> inputs;
  for (const auto& s : data.samples) inputs.push_back(s.input);
  std::vector<nn::Tensor> heldout(inputs.begin(), inputs.begin() + 6);

  for (const nn::SslAlgorithm algorithm :
       {nn::SslAlgorithm::simclr, nn::SslAlgorithm::simsiam,
        nn::SslAlgorithm::barlow_twins, nn::SslAlgorithm::vicreg}) {
    CAPTURE(nn::ssl_algorithm_name(algorithm));
    const ExperimentConfig config = tiny_config(algorithm);
    std::vector<CurvePoint> curves;
    const PretrainResult result =
        pretrain_ssl(config, inputs, heldout, 5, &curves);
    REQUIRE(result.epoch_losses.size() == 2);
    for (double loss : result.epoch_losses) CHECK(std::isfinite(loss));
    CHECK(result.embedding_std.size() == nn::kEmbeddingDim);
    CHECK(result.collapse_fraction >= 0.0);
    CHECK(result.collapse_fraction <= 1.0);

    std::size_t loss_points = 0;
    std::size_t collapse_points = 0;
    for (const CurvePoint& p : curves) {
      if (p.phase == "ssl_loss") ++loss_points;
      if (p.phase == "collapse_fraction") ++collapse_points;
    }
    CHECK(loss_points == 2);
    CHECK(collapse_points == 1);
    if (algorithm == nn::SslAlgorithm::vicreg) {
      REQUIRE(result.vicreg_terms.size() == 2);
      CHECK(result.vicreg_terms[0].invariance >= 0.0);
      CHECK(result.vicreg_terms[0].variance_a >= 0.0);
    } else {
      CHECK(result.vicreg_terms.empty());
    }
  }

  const ExperimentConfig config = tiny_config(nn::SslAlgorithm::simclr);
  CHECK_THROWS_AS(pretrain_ssl(config, {inputs[0]}, heldout, 5),
                  ValidationError);
  CHECK_THROWS_AS(pretrain_ssl(config, inputs, {heldout[0]}, 5),
                  ValidationError);
}

TEST_CASE("pretraining is bit-reproducible in the seed") {
  SampleDataset data = separable_dataset(2, 6, 31);
  std::vector<nn::Tensor> inputs;
  for (const auto& s : data.samples) inputs.push_back(s.input);
  const std::vector<nn::Tensor> heldout(inputs.begin(), inputs.begin() + 4);

  const ExperimentConfig config = tiny_config(nn::SslAlgorithm::simclr);
  const PretrainResult a = pretrain_ssl(config, inputs, heldout, 77);
  const PretrainResult b = pretrain_ssl(config, inputs, heldout, 77);
  const PretrainResult c = pretrain_ssl(config, inputs, heldout, 78);
  REQUIRE(a.epoch_losses.size() == b.epoch_losses.size());
  for (std::size_t e = 0; e < a.epoch_losses.size(); ++e) {
    CHECK(a.epoch_losses[e] == b.epoch_losses[e]);
  }
  for (std::size_t k = 0; k < a.embedding_std.size(); ++k) {
    CHECK(a.embedding_std[k] == b.embedding_std[k]);
  }
  CHECK(a.epoch_losses[0] != c.epoch_losses[0]);
}

TEST_CASE("few_shot_probe keeps the encoder bit-identical") {
  SampleDataset train = separable_dataset(3, 6, 41);
  SampleDataset test = separable_dataset(3, 4, 42);

  ExperimentConfig config = tiny_config(nn::SslAlgorithm::simclr);
  std::vector<nn::Tensor> inputs;
  for (const auto& s : train.samples) inputs.push_back(s.input);
  const std::vector<nn::Tensor> heldout(inputs.begin(), inputs.begin() + 4);
  const PretrainResult pre = pretrain_ssl(config, inputs, heldout, 3);

  std::vector<CurvePoint> curves;
  const ProbeSeedStats stats =
      few_shot_probe(pre.encoder, train, test, config, 3, &curves);
  CHECK(stats.encoder_frozen);
  CHECK(stats.accuracy >= 0.0);
  CHECK(stats.accuracy <= 1.0);
  REQUIRE(stats.test_curve.size() == config.probe_epochs);
  CHECK(stats.accuracy == stats.test_curve.back());
  REQUIRE(stats.per_class_accuracy.size() == 3);
  CHECK(stats.embedding_std.size() == nn::kEmbeddingDim);
  CHECK(stats.runtime_s > 0.0);

  std::size_t eval_points = 0;
  for (const CurvePoint& p : curves) {
    if (p.phase == "probe_test_accuracy") ++eval_points;
  }
  CHECK(eval_points == config.probe_epochs);

  // Identical seeds reproduce the probe bit for bit.
  const ProbeSeedStats again =
      few_shot_probe(pre.encoder, train, test, config, 3);
  CHECK(again.accuracy == stats.accuracy);
  for (std::size_t k = 0; k < stats.embedding_std.size(); ++k) {
    CHECK(again.embedding_std[k] == stats.embedding_std[k]);
  }

  // The probe embeds on the encoder side of the projector, which the
  // augmented path must also leave untouched.
  config.augment_probe = true;
  const ProbeSeedStats augmented =
      few_shot_probe(pre.encoder, train, test, config, 3);
  CHECK(augmented.encoder_frozen);
}

TEST_CASE("probe rejects impossible shot counts and mismatched data") {
  SampleDataset train = separable_dataset(2, 3, 51);
  SampleDataset test = separable_dataset(2, 3, 52);
  ExperimentConfig config = tiny_config(nn::SslAlgorithm::simclr);
  config.shots = 4;  // only 3 per class available
  CHECK_THROWS_WITH_AS(random_baseline_probe(train, test, config, 1),
                       doctest::Contains("class 0"), ValidationError);

  config.shots = 2;
  SampleDataset other = separable_dataset(3, 3, 53);
  CHECK_THROWS_AS(random_baseline_probe(train, other, config, 1),
                  ValidationError);
}

TEST_CASE("random baseline probe stays frozen and lands above the floor") {
  SampleDataset train = separable_dataset(3, 5, 61);
  SampleDataset test = separable_dataset(3, 8, 62);
  const ExperimentConfig config = tiny_config(nn::SslAlgorithm::simclr);
  const ProbeSeedStats stats = random_baseline_probe(train, test, config, 9);
  CHECK(stats.encoder_frozen);
  // 24 test samples, 3 classes: the sanity floor is far below chance.
  CHECK(stats.accuracy >= chance_floor(3, test.samples.size()));
}

TEST_CASE("supervised training separates an easy dataset") {
  SampleDataset train = separable_dataset(3, 8, 71);
  SampleDataset test = separable_dataset(3, 4, 72);
  ExperimentConfig config = tiny_config(nn::SslAlgorithm::simclr);
  config.ssl_epochs = 30;
  config.batch_size = 8;
  config.supervised_lr = 0.01;

  std::vector<CurvePoint> curves;
  const SupervisedResult result =
      train_supervised(config, train, test, 13, &curves);
  REQUIRE(result.epoch_losses.size() == 30);
  CHECK(result.epoch_losses.back() < result.epoch_losses.front());
  CHECK(result.train_accuracy >= 0.95);
  CHECK(result.test_accuracy >= 0.5);
  std::size_t loss_points = 0;
  for (const CurvePoint& p : curves) {
    if (p.phase == "supervised_loss") ++loss_points;
  }
  CHECK(loss_points == 30);
}

TEST_CASE("multi-seed experiment reduces per-seed runs verbatim") {
  SampleDataset train = separable_dataset(2, 6, 81);
  SampleDataset test = separable_dataset(2, 4, 82);
  ExperimentConfig config = tiny_config(nn::SslAlgorithm::barlow_twins);
  config.num_seeds = 2;
  config.probe_epochs = 2;

  const ProbeReport report = run_ssl_probe_experiment(config, train, test, 100);
  REQUIRE(report.per_seed.size() == 2);
  CHECK(report.seeds_used == std::vector<std::uint64_t>{100, 101});
  CHECK(report.accuracy ==
        doctest::Approx(0.5 * (report.per_seed[0].accuracy +
                               report.per_seed[1].accuracy)));
  for (const ProbeSeedStats& s : report.per_seed) CHECK(s.encoder_frozen);

  const ProbeReport control = run_random_baseline(config, train, test, 100);
  CHECK(control.per_seed.size() == 2);
}

TEST_CASE("transfer reconciles target geometry onto the source") {
  // Source domain: {1, 4, 8}.  Target domain: {1, 3, 6}.
  SampleDataset source = separable_dataset(2, 6, 91);
  std::vector<nn::Tensor> source_inputs;
  for (const auto& s : source.samples) source_inputs.push_back(s.input);

  SampleDataset target_train;
  target_train.num_classes = 2;
  SampleDataset target_test;
  target_test.num_classes = 2;
  RandomStream rng(92);
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < 5; ++i) {
      nn::Tensor x({1, 3, 6});
      for (std::size_t k = 0; k < x.numel(); ++k) x[k] = 0.1 * rng.gaussian();
      for (std::size_t h = 0; h < 3; ++h) x[h * 6 + 3 * c] += 2.0;
      (i < 3 ? target_train : target_test).samples.push_back({std::move(x), c});
    }
  }

  ExperimentConfig config = tiny_config(nn::SslAlgorithm::simclr);
  config.batch_size = 4;
  config.probe_epochs = 3;
  const TransferResult result =
      transfer_run(config, source_inputs, target_train, target_test, 19);
  CHECK(result.pretrain.epoch_losses.size() == config.ssl_epochs);
  CHECK(result.probe.encoder_frozen);
  REQUIRE(result.probe.test_curve.size() == 3);

  // Channel mismatch is a hard error.
  SampleDataset wide_train;
  wide_train.num_classes = 2;
  SampleDataset wide_test;
  wide_test.num_classes = 2;
  for (std::size_t c = 0; c < 2; ++c) {
    for (std::size_t i = 0; i < 4; ++i) {
      nn::Tensor x({2, 4, 8});
      x.fill(static_cast<double>(c));
      x[0] += 0.5 + static_cast<double>(i);  // break constant-sample ties
      (i < 2 ? wide_train : wide_test).samples.push_back({std::move(x), c});
    }
  }
  CHECK_THROWS_WITH_AS(
      transfer_run(config, source_inputs, wide_train, wide_test, 19),
      doctest::Contains("channel"), ValidationError);
}

}  // TEST_SUITE
