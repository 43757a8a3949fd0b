#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "csisense/csit_io.hpp"
#include "csisense/dataset.hpp"
#include "csisense/error.hpp"
#include "csisense/experiment.hpp"
#include "csisense/matrix.hpp"
#include "csisense/minirocket.hpp"
#include "csisense/music.hpp"
#include "csisense/nn/checkpoint.hpp"
#include "csisense/pipeline.hpp"
#include "csisense/random.hpp"
#include "csisense/ridge.hpp"
#include "csisense/scene.hpp"
#include "csisense/simulate.hpp"
#include "csisense/stft.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace csisense;

namespace {

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open \"" + path + "\"", 0);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot create \"" + path + "\"", 0);
  out << content;
  if (!out) throw IoError("write to \"" + path + "\" failed", 0);
}

json parse_json_file(const std::string& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw ValidationError("\"" + path + "\" is not valid JSON: " + e.what());
  }
}

void check_keys(const json& j, const std::vector<std::string>& allowed,
                const char* context) {
  if (!j.is_object()) {
    throw ValidationError(std::string(context) + " must be a JSON object");
  }
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw ValidationError(std::string("unknown ") + context + " key \"" +
                            key + "\"");
    }
  }
}

std::string require_string(const json& j, const char* key,
                           const char* context) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw ValidationError(std::string(context) + " needs a string \"" + key +
                          "\"");
  }
  return j[key].get<std::string>();
}

// The harness commands nest the training recipe under "experiment".
ExperimentConfig experiment_from(const json& j) {
  if (!j.contains("experiment")) return ExperimentConfig{};
  return experiment_config_from_json(j["experiment"].dump());
}

std::vector<fs::path> csit_files_in(const std::string& dir) {
  if (!fs::is_directory(dir)) {
    throw ValidationError("\"" + dir + "\" is not a directory");
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".csit") {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) {
    throw ValidationError("\"" + dir + "\" holds no .csit records");
  }
  return files;
}

int label_of(const CsiTensor& record, const fs::path& path) {
  const auto it = record.meta.find("label");
  if (it == record.meta.end()) {
    throw ValidationError("record \"" + path.string() +
                          "\" carries no label in its metadata");
  }
  try {
    std::size_t consumed = 0;
    const int label = std::stoi(it->second, &consumed);
    if (consumed != it->second.size()) throw std::invalid_argument("");
    return label;
  } catch (const std::exception&) {
    throw ValidationError("record \"" + path.string() +
                          "\" has a non-integer label \"" + it->second +
                          "\"");
  }
}

SampleDataset load_labeled_dataset(const std::string& dir) {
  std::vector<std::pair<CsiTensor, int>> records;
  for (const fs::path& path : csit_files_in(dir)) {
    CsiTensor record = read_csit_file(path.string());
    const int label = label_of(record, path);
    records.emplace_back(std::move(record), label);
  }
  return dataset_from_records(records);
}

// Label-free loader for pretraining: metadata is never consulted.
std::vector<nn::Tensor> load_unlabeled_inputs(const std::string& dir) {
  std::vector<nn::Tensor> inputs;
  for (const fs::path& path : csit_files_in(dir)) {
    inputs.push_back(sample_from_record(read_csit_file(path.string())));
  }
  return inputs;
}

void ensure_out_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw IoError("cannot create output directory \"" + dir + "\"", 0);
  }
}

std::string csv_cell(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

// ---------------------------------------------------------------- simulate

// Builds one scene template per requested velocity; per-subcarrier complex
// gains come from fork indices past the per-sample range so dataset draws
// and template draws never overlap.
std::vector<ScattererScene> scene_templates(const json& cfg,
                                            std::uint64_t seed) {
  check_keys(cfg,
             {"velocities", "per_class", "subcarriers", "samples",
              "sample_interval", "base_freq", "subcarrier_spacing",
              "noise_std", "amplitude_decay", "velocity_jitter",
              "randomize_phases", "include_static_path"},
             "simulate config");
  if (!cfg.contains("velocities") || !cfg["velocities"].is_array() ||
      cfg["velocities"].size() < 2) {
    throw ValidationError(
        "simulate config needs a \"velocities\" array with at least 2 "
        "entries");
  }
  const std::size_t subcarriers = cfg.value("subcarriers", std::size_t{8});
  const std::size_t samples = cfg.value("samples", std::size_t{64});
  const double dt = cfg.value("sample_interval", 0.01);
  const double base_freq = cfg.value("base_freq", 5.8e9);
  const double spacing = cfg.value("subcarrier_spacing", 312500.0);
  const double noise_std = cfg.value("noise_std", 0.05);
  const double decay = cfg.value("amplitude_decay", 1.0);
  const bool static_path = cfg.value("include_static_path", false);
  const std::size_t per_class = cfg.value("per_class", std::size_t{1});

  const RandomStream master(seed);
  const std::size_t gains_base = cfg["velocities"].size() * per_class;
  std::vector<ScattererScene> scenes;
  for (std::size_t c = 0; c < cfg["velocities"].size(); ++c) {
    if (!cfg["velocities"][c].is_number()) {
      throw ValidationError("simulate config velocities must be numbers");
    }
    ScattererScene scene;
    scene.label = static_cast<int>(c);
    scene.sample_interval = dt;
    scene.num_samples = samples;
    scene.noise_std = noise_std;
    scene.carrier_freqs.resize(subcarriers);
    for (std::size_t s = 0; s < subcarriers; ++s) {
      scene.carrier_freqs[s] = base_freq + spacing * static_cast<double>(s);
    }
    RandomStream gains = master.fork(gains_base + c);
    Scatterer moving;
    moving.velocity = cfg["velocities"][c].get<double>();
    moving.amplitude_decay = decay;
    moving.initial_csi.resize(subcarriers);
    for (auto& z : moving.initial_csi) {
      z = std::polar(gains.uniform(0.5, 1.5),
                     gains.uniform(0.0, 2.0 * std::numbers::pi));
    }
    scene.scatterers.push_back(std::move(moving));
    if (static_path) {
      Scatterer still;
      still.velocity = 0.0;
      still.initial_csi.resize(subcarriers);
      for (auto& z : still.initial_csi) {
        z = std::polar(0.5 * gains.uniform(0.5, 1.5),
                       gains.uniform(0.0, 2.0 * std::numbers::pi));
      }
      scene.scatterers.push_back(std::move(still));
    }
    scene.validate();
    scenes.push_back(std::move(scene));
  }
  return scenes;
}

int run_simulate(const std::string& scene_path, const std::string& config_path,
                 const std::string& out_dir, std::uint64_t seed,
                 bool seed_given) {
  if (scene_path.empty() == config_path.empty()) {
    throw ValidationError(
        "simulate needs exactly one of --scene (single record) or --config "
        "(labeled dataset)");
  }
  ensure_out_dir(out_dir);
  if (!scene_path.empty()) {
    ScattererScene scene = scene_from_json(read_text_file(scene_path));
    if (seed_given) scene.seed = seed;
    const CsiTensor record = generate(scene);
    const fs::path target = fs::path(out_dir) / "record.csit";
    write_csit_file(record, target.string());
    std::cout << "wrote " << target.string() << " (" << record.t() << " x "
              << record.s() << " x " << record.m() << " x " << record.n()
              << ")\n";
    return 0;
  }

  const json cfg = parse_json_file(config_path);
  const std::size_t per_class = cfg.value("per_class", std::size_t{1});
  DatasetOptions options;
  options.velocity_jitter = cfg.value("velocity_jitter", 0.05);
  options.randomize_phases = cfg.value("randomize_phases", true);
  const auto dataset = make_activity_dataset(scene_templates(cfg, seed),
                                             per_class, seed, options);

  std::ostringstream manifest;
  manifest << "file,label\n";
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%05zu.csit", i);
    const fs::path target = fs::path(out_dir) / name;
    write_csit_file(dataset[i].first, target.string());
    manifest << name << ',' << dataset[i].second << '\n';
  }
  write_text_file((fs::path(out_dir) / "manifest.csv").string(),
                  manifest.str());
  std::cout << "wrote " << dataset.size() << " records to " << out_dir
            << "\n";
  return 0;
}

// -------------------------------------------------------------- preprocess

int run_preprocess(const std::string& pipeline_path, const std::string& in,
                   const std::string& out) {
  const PipelineSpec spec = pipeline_from_json(read_text_file(pipeline_path));
  const CsiTensor input = read_csit_file(in);
  const CsiTensor output = run_pipeline(spec, input);
  write_csit_file(output, out);
  std::cout << "wrote " << out << "\n";
  return 0;
}

// ---------------------------------------------------------------- features

int run_features(const std::string& method, const std::string& in,
                 const std::string& out, const std::string& config_path) {
  json cfg = config_path.empty() ? json::object()
                                 : parse_json_file(config_path);
  std::ostringstream csv;
  csv.precision(17);

  if (method == "minirocket") {
    check_keys(cfg, {}, "minirocket features config");
    std::vector<fs::path> files;
    if (fs::is_directory(in)) {
      files = csit_files_in(in);
    } else {
      files.emplace_back(in);
    }
    std::vector<Series> series;
    std::size_t min_len = 0;
    for (const fs::path& path : files) {
      series.push_back(mean_amplitude_series(read_csit_file(path.string())));
      min_len = min_len == 0 ? series.back().size()
                             : std::min(min_len, series.back().size());
    }
    RealMatrix x(series.size(), min_len);
    for (std::size_t r = 0; r < series.size(); ++r) {
      for (std::size_t c = 0; c < min_len; ++c) x.at(r, c) = series[r][c];
    }
    const MiniRocketModel model = minirocket_fit(x);
    std::vector<std::string> warnings;
    const RealMatrix features = minirocket_transform(model, x, &warnings);
    for (const std::string& w : warnings) std::cerr << "note: " << w << "\n";

    csv << "file";
    for (std::size_t c = 0; c < features.cols; ++c) csv << ",f" << c;
    csv << '\n';
    for (std::size_t r = 0; r < features.rows; ++r) {
      csv << files[r].filename().string();
      for (std::size_t c = 0; c < features.cols; ++c) {
        csv << ',' << csv_cell(features.at(r, c));
      }
      csv << '\n';
    }
  } else if (method == "stft") {
    check_keys(cfg, {"window", "hop", "subcarrier"}, "stft features config");
    const CsiTensor record = read_csit_file(in);
    const std::size_t window = cfg.value("window", std::size_t{32});
    const std::size_t hop = cfg.value("hop", std::size_t{8});
    const Series series = mean_amplitude_series(record);
    const StftFrames frames = stft(series, window, hop);
    csv << "frame";
    for (std::size_t b = 0; b < frames.bins; ++b) {
      csv << ",hz_"
          << csv_cell(frames.bin_hz(b, record.sample_interval, window));
    }
    csv << '\n';
    for (std::size_t f = 0; f < frames.frames; ++f) {
      csv << f;
      for (std::size_t b = 0; b < frames.bins; ++b) {
        csv << ',' << csv_cell(frames.at(f, b));
      }
      csv << '\n';
    }
  } else if (method == "music") {
    check_keys(cfg, {"n_sources", "subcarrier", "v_min", "v_max", "steps"},
               "music features config");
    const CsiTensor record = read_csit_file(in);
    const std::size_t subcarrier = cfg.value("subcarrier", std::size_t{0});
    if (subcarrier >= record.s()) {
      throw ValidationError("music subcarrier index out of range");
    }
    VelocityGridParams params;
    params.v_min = cfg.value("v_min", params.v_min);
    params.v_max = cfg.value("v_max", params.v_max);
    params.steps = cfg.value("steps", params.steps);
    std::vector<std::complex<double>> column(record.t());
    for (std::size_t t = 0; t < record.t(); ++t) {
      column[t] = record.at(t, subcarrier, 0, 0);
    }
    const VelocityGrid grid = music_velocity(
        column, record.carrier_freqs[subcarrier], record.sample_interval,
        cfg.value("n_sources", std::size_t{1}), params);
    csv << "velocity,power\n";
    for (std::size_t i = 0; i < grid.steps; ++i) {
      csv << csv_cell(grid.velocity_at(i)) << ',' << csv_cell(grid.values[i])
          << '\n';
    }
    for (const MusicPeak& peak : music_peaks(grid)) {
      std::cout << "peak: v = " << peak.velocity << " m/s, power = "
                << peak.power << "\n";
    }
  } else {
    throw ValidationError("unknown features method \"" + method + "\"");
  }

  write_text_file(out, csv.str());
  std::cout << "wrote " << out << "\n";
  return 0;
}

// ---------------------------------------------------------------- baseline

int run_baseline(const std::string& config_path, const std::string& out_dir,
                 std::uint64_t seed) {
  const json cfg = parse_json_file(config_path);
  check_keys(cfg, {"data_dir", "method", "ridge_l2", "experiment"},
             "baseline config");
  const std::string data_dir = require_string(cfg, "data_dir", "baseline");
  const std::string method = cfg.value("method", std::string("supervised"));
  const ExperimentConfig config = experiment_from(cfg);
  ensure_out_dir(out_dir);

  const SampleDataset data = load_labeled_dataset(data_dir);
  const SplitIndices split =
      stratified_split(data.labels(), config.train_ratio, seed);
  const SampleDataset train = subset(data, split.train);
  const SampleDataset test = subset(data, split.test);

  json report;
  if (method == "supervised") {
    std::vector<CurvePoint> curves;
    const SupervisedResult result =
        train_supervised(config, train, test, seed, &curves);
    report["mode"] = "supervised";
    report["train_accuracy"] = result.train_accuracy;
    report["test_accuracy"] = result.test_accuracy;
    report["epoch_losses"] = result.epoch_losses;
    report["warnings"] = result.warnings;
    write_text_file((fs::path(out_dir) / "curves.csv").string(),
                    curves_to_csv(curves));

    std::vector<nn::NamedTensor> state;
    nn::Encoder encoder = result.encoder;
    nn::Projector projector = result.projector;
    nn::Linear classifier = result.classifier;
    encoder.append_state("encoder", state);
    projector.append_state("projector", state);
    classifier.append_state("classifier", state);
    nn::write_checkpoint_file(
        state, (fs::path(out_dir) / "model.ckpt").string());
  } else if (method == "minirocket") {
    // Classical reference: pooled-amplitude series into fixed-kernel
    // features, linear readout by ridge regression.
    const auto series_matrix = [&](const SampleDataset& part) {
      RealMatrix x(part.samples.size(), part.width());
      for (std::size_t r = 0; r < part.samples.size(); ++r) {
        // Width is the time axis; average the standardized image over
        // channels and subcarriers to recover a 1-D series per record.
        const nn::Tensor& img = part.samples[r].input;
        const std::size_t chw = img.dim(0) * img.dim(1);
        for (std::size_t t = 0; t < part.width(); ++t) {
          double acc = 0.0;
          for (std::size_t k = 0; k < chw; ++k) {
            acc += img[k * part.width() + t];
          }
          x.at(r, t) = acc / static_cast<double>(chw);
        }
      }
      return x;
    };
    const RealMatrix train_x = series_matrix(train);
    const RealMatrix test_x = series_matrix(test);
    const MiniRocketModel model = minirocket_fit(train_x, seed);
    std::vector<std::string> warnings;
    const RealMatrix train_f = minirocket_transform(model, train_x, &warnings);
    const RealMatrix test_f = minirocket_transform(model, test_x, &warnings);

    std::vector<int> train_y;
    for (std::size_t i : split.train) {
      train_y.push_back(static_cast<int>(data.samples[i].label));
    }
    std::vector<int> test_y;
    for (std::size_t i : split.test) {
      test_y.push_back(static_cast<int>(data.samples[i].label));
    }
    const double l2 = cfg.value("ridge_l2", 1.0);
    const RidgeModel ridge = ridge_classify_fit(train_f, train_y, l2);
    const auto accuracy = [&](const RealMatrix& f,
                              const std::vector<int>& y) {
      const std::vector<int> predicted = ridge_predict(ridge, f);
      std::size_t hits = 0;
      for (std::size_t i = 0; i < y.size(); ++i) {
        if (predicted[i] == y[i]) ++hits;
      }
      return static_cast<double>(hits) / static_cast<double>(y.size());
    };
    report["mode"] = "minirocket";
    report["feature_count"] = model.feature_count;
    report["train_accuracy"] = accuracy(train_f, train_y);
    report["test_accuracy"] = accuracy(test_f, test_y);
    report["warnings"] = warnings;
  } else {
    throw ValidationError("unknown baseline method \"" + method + "\"");
  }

  report["seed"] = seed;
  report["train_size"] = train.samples.size();
  report["test_size"] = test.samples.size();
  write_text_file((fs::path(out_dir) / "report.json").string(),
                  report.dump(2) + "\n");
  std::cout << "baseline " << method
            << ": test accuracy = " << report["test_accuracy"].get<double>()
            << "\n";
  return 0;
}

// --------------------------------------------------------------- train-ssl

int run_train_ssl(const std::string& config_path, const std::string& out_dir,
                  std::uint64_t seed) {
  const json cfg = parse_json_file(config_path);
  check_keys(cfg, {"data_dir", "experiment"}, "train-ssl config");
  const std::string data_dir = require_string(cfg, "data_dir", "train-ssl");
  const ExperimentConfig config = experiment_from(cfg);
  ensure_out_dir(out_dir);

  // Pretraining never sees a label: records are loaded as bare inputs and
  // split by position only.
  std::vector<nn::Tensor> inputs = load_unlabeled_inputs(data_dir);
  if (inputs.size() < 4) {
    throw ValidationError("train-ssl needs at least 4 records");
  }
  RandomStream split_rng = RandomStream(seed).fork(1);
  std::vector<std::size_t> order(inputs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[split_rng.next_below(i)]);
  }
  std::size_t take = static_cast<std::size_t>(
      config.train_ratio * static_cast<double>(order.size()));
  take = std::max<std::size_t>(2, std::min(take, order.size() - 2));
  std::vector<nn::Tensor> train_inputs;
  std::vector<nn::Tensor> heldout_inputs;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < take ? train_inputs : heldout_inputs)
        .push_back(std::move(inputs[order[i]]));
  }

  std::vector<CurvePoint> curves;
  const PretrainResult result =
      pretrain_ssl(config, train_inputs, heldout_inputs, seed, &curves);

  std::vector<nn::NamedTensor> state;
  nn::Encoder encoder = result.encoder;
  encoder.append_state("encoder", state);
  nn::write_checkpoint_file(state,
                            (fs::path(out_dir) / "encoder.ckpt").string());
  write_text_file((fs::path(out_dir) / "curves.csv").string(),
                  curves_to_csv(curves));

  json report;
  report["mode"] = "ssl_pretrain";
  report["algorithm"] = nn::ssl_algorithm_name(config.algorithm.algorithm);
  report["seed"] = seed;
  report["epoch_losses"] = result.epoch_losses;
  report["collapse_fraction"] = result.collapse_fraction;
  report["collapse_gate_passed"] = result.collapse_gate_passed;
  report["embedding_std"] = result.embedding_std;
  report["warnings"] = result.warnings;
  if (!result.vicreg_terms.empty()) {
    json terms = json::array();
    for (const VicEpochTerms& t : result.vicreg_terms) {
      terms.push_back({{"invariance", t.invariance},
                       {"variance_a", t.variance_a},
                       {"variance_b", t.variance_b},
                       {"covariance_a", t.covariance_a},
                       {"covariance_b", t.covariance_b}});
    }
    report["vicreg_terms"] = std::move(terms);
  }
  write_text_file((fs::path(out_dir) / "report.json").string(),
                  report.dump(2) + "\n");
  std::cout << "pretrained " << report["algorithm"].get<std::string>()
            << ": final loss = " << result.epoch_losses.back()
            << ", collapse gate "
            << (result.collapse_gate_passed ? "passed" : "FLAGGED") << "\n";
  return 0;
}

// ------------------------------------------------------------------- probe

int run_probe(const std::string& config_path, const std::string& out_dir,
              std::uint64_t seed) {
  const json cfg = parse_json_file(config_path);
  check_keys(cfg, {"data_dir", "checkpoint", "control", "experiment"},
             "probe config");
  const std::string data_dir = require_string(cfg, "data_dir", "probe");
  const std::string checkpoint = require_string(cfg, "checkpoint", "probe");
  const ExperimentConfig config = experiment_from(cfg);
  ensure_out_dir(out_dir);

  const SampleDataset data = load_labeled_dataset(data_dir);
  const SplitIndices split =
      stratified_split(data.labels(), config.train_ratio, seed);
  const SampleDataset train = subset(data, split.train);
  const SampleDataset test = subset(data, split.test);

  RandomStream init_rng(seed);
  nn::Encoder encoder(
      choose_encoder_config(data.channels(), data.height(), data.width()),
      init_rng);
  std::vector<nn::NamedTensor> state;
  encoder.append_state("encoder", state);
  nn::load_checkpoint_into(checkpoint, state);

  std::vector<CurvePoint> curves;
  std::vector<ProbeSeedStats> runs;
  for (std::size_t i = 0; i < config.num_seeds; ++i) {
    runs.push_back(
        few_shot_probe(encoder, train, test, config, seed + i, &curves));
  }
  const ProbeReport report = aggregate_probe_report(runs);
  write_text_file((fs::path(out_dir) / "report.json").string(),
                  probe_report_to_json(report) + "\n");
  if (cfg.value("control", false)) {
    const ProbeReport control =
        run_random_baseline(config, train, test, seed, &curves);
    write_text_file((fs::path(out_dir) / "control.json").string(),
                    probe_report_to_json(control) + "\n");
    std::cout << "random control accuracy = " << control.accuracy << "\n";
  }
  write_text_file((fs::path(out_dir) / "curves.csv").string(),
                  curves_to_csv(curves));
  std::cout << "probe accuracy over " << config.num_seeds
            << " seed(s) = " << report.accuracy << "\n";
  return 0;
}

// ---------------------------------------------------------------- transfer

int run_transfer(const std::string& config_path, const std::string& out_dir,
                 std::uint64_t seed) {
  const json cfg = parse_json_file(config_path);
  check_keys(cfg, {"source_dir", "target_dir", "experiment"},
             "transfer config");
  const std::string source_dir =
      require_string(cfg, "source_dir", "transfer");
  const std::string target_dir =
      require_string(cfg, "target_dir", "transfer");
  ExperimentConfig config = cfg.contains("experiment")
                                ? experiment_from(cfg)
                                : ExperimentConfig::transfer_defaults();
  ensure_out_dir(out_dir);

  const std::vector<nn::Tensor> source = load_unlabeled_inputs(source_dir);
  const SampleDataset target = load_labeled_dataset(target_dir);
  const SplitIndices split =
      stratified_split(target.labels(), config.train_ratio, seed);
  const SampleDataset target_train = subset(target, split.train);
  const SampleDataset target_test = subset(target, split.test);

  std::vector<CurvePoint> curves;
  std::vector<ProbeSeedStats> runs;
  json pretrain_summaries = json::array();
  for (std::size_t i = 0; i < config.num_seeds; ++i) {
    TransferResult result = transfer_run(config, source, target_train,
                                         target_test, seed + i, &curves);
    pretrain_summaries.push_back(
        {{"seed", seed + i},
         {"final_loss", result.pretrain.epoch_losses.back()},
         {"collapse_fraction", result.pretrain.collapse_fraction},
         {"collapse_gate_passed", result.pretrain.collapse_gate_passed}});
    runs.push_back(std::move(result.probe));
    if (i + 1 == config.num_seeds) {
      std::vector<nn::NamedTensor> state;
      result.pretrain.encoder.append_state("encoder", state);
      nn::write_checkpoint_file(
          state, (fs::path(out_dir) / "encoder.ckpt").string());
    }
  }
  const ProbeReport report = aggregate_probe_report(runs);
  write_text_file((fs::path(out_dir) / "report.json").string(),
                  probe_report_to_json(report) + "\n");
  write_text_file((fs::path(out_dir) / "pretrain.json").string(),
                  pretrain_summaries.dump(2) + "\n");
  write_text_file((fs::path(out_dir) / "curves.csv").string(),
                  curves_to_csv(curves));
  std::cout << "transfer probe accuracy over " << config.num_seeds
            << " seed(s) = " << report.accuracy << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"CSI sensing workbench: simulation, preprocessing, features, "
               "and self-supervised training"};
  app.require_subcommand(1);

  std::string scene_path, config_path, pipeline_path, in_path, out_path;
  std::string method;
  std::uint64_t seed = 0;

  CLI::App* simulate = app.add_subcommand(
      "simulate", "Generate synthetic CSI records (--scene or --config)");
  simulate->add_option("--scene", scene_path, "Scene template JSON");
  simulate->add_option("--config", config_path, "Dataset recipe JSON");
  simulate->add_option("--out", out_path, "Output directory")->required();
  CLI::Option* seed_opt =
      simulate->add_option("--seed", seed, "Random seed (default 0)");

  CLI::App* preprocess =
      app.add_subcommand("preprocess", "Run a preprocessing pipeline");
  preprocess->add_option("--pipeline,--config", pipeline_path,
                         "Pipeline spec JSON")
      ->required();
  preprocess->add_option("--in", in_path, "Input .csit record")->required();
  preprocess->add_option("--out", out_path, "Output .csit path")->required();

  CLI::App* features =
      app.add_subcommand("features", "Emit feature matrices as CSV");
  features
      ->add_option("--method", method,
                   "Feature family: minirocket | stft | music")
      ->required()
      ->check(CLI::IsMember({"minirocket", "stft", "music"}));
  features->add_option("--in", in_path, ".csit record (minirocket: or dir)")
      ->required();
  features->add_option("--out", out_path, "Output CSV path")->required();
  features->add_option("--config", config_path, "Method options JSON");

  const auto add_harness_options = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "Run configuration JSON")
        ->required();
    cmd->add_option("--out", out_path, "Output directory")->required();
    cmd->add_option("--seed", seed, "Base seed (default 0)");
  };
  CLI::App* baseline = app.add_subcommand(
      "baseline", "Supervised or minirocket+ridge reference");
  add_harness_options(baseline);
  CLI::App* train_ssl = app.add_subcommand(
      "train-ssl", "Self-supervised pretraining on unlabeled records");
  add_harness_options(train_ssl);
  CLI::App* probe = app.add_subcommand(
      "probe", "Few-shot linear probe on a frozen pretrained encoder");
  add_harness_options(probe);
  CLI::App* transfer = app.add_subcommand(
      "transfer", "Pretrain on one domain, probe on another");
  add_harness_options(transfer);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (simulate->parsed()) {
      return run_simulate(scene_path, config_path, out_path, seed,
                          seed_opt->count() > 0);
    }
    if (preprocess->parsed()) {
      return run_preprocess(pipeline_path, in_path, out_path);
    }
    if (features->parsed()) {
      return run_features(method, in_path, out_path, config_path);
    }
    if (baseline->parsed()) return run_baseline(config_path, out_path, seed);
    if (train_ssl->parsed()) {
      return run_train_ssl(config_path, out_path, seed);
    }
    if (probe->parsed()) return run_probe(config_path, out_path, seed);
    if (transfer->parsed()) return run_transfer(config_path, out_path, seed);
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
