#include "csisense/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <numeric>
#include <set>
#include <sstream>
#include <utility>

#include <json.hpp>

#include "csisense/error.hpp"
#include "csisense/nn/augment.hpp"
#include "csisense/nn/optim.hpp"
#include "csisense/random.hpp"

namespace csisense {
namespace {

void log_point(std::vector<CurvePoint>* curves, const char* phase,
               std::uint64_t seed, std::size_t epoch, double value) {
  if (curves != nullptr) {
    curves->push_back({phase, seed, epoch, value});
  }
}

void shuffle_in_place(std::vector<std::size_t>& order, RandomStream& rng) {
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.next_below(i)]);
  }
}

std::string format_fixed(double v, int digits) {
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(digits);
  out << v;
  return out.str();
}

// Every input a 3-d tensor of the same shape; returns that shape.
const std::vector<std::size_t>& check_input_shapes(
    const std::vector<nn::Tensor>& inputs, const char* what) {
  if (inputs.empty()) {
    throw ValidationError(std::string(what) + " inputs are empty");
  }
  const auto& shape = inputs.front().shape();
  if (shape.size() != 3) {
    throw ValidationError(std::string(what) +
                          " inputs must be 3-d {C,H,W} tensors");
  }
  for (const nn::Tensor& x : inputs) {
    if (x.shape() != shape) {
      throw ValidationError(std::string(what) + " inputs disagree in shape");
    }
  }
  return shape;
}

// {C,H,W} samples stacked into one {B,C,H,W} batch.
nn::Tensor stack_views(const std::vector<nn::Tensor>& views) {
  const auto& s = views.front().shape();
  nn::Tensor out({views.size(), s[0], s[1], s[2]});
  const std::size_t per = s[0] * s[1] * s[2];
  for (std::size_t i = 0; i < views.size(); ++i) {
    std::memcpy(out.data() + i * per, views[i].data(), per * sizeof(double));
  }
  return out;
}

// Frozen-encoder embeddings of the referenced inputs, chunked to bound the
// transient graph size.  The result is a plain tensor: nothing that later
// backpropagates through it can reach the encoder.
nn::Tensor embed_all(const nn::Encoder& encoder,
                     const std::vector<const nn::Tensor*>& inputs,
                     std::size_t batch) {
  const auto& cfg = encoder.config();
  const std::size_t d = cfg.embedding_dim();
  const std::size_t per = cfg.in_channels * cfg.input_height * cfg.input_width;
  nn::Tensor out({inputs.size(), d});
  for (std::size_t start = 0; start < inputs.size(); start += batch) {
    const std::size_t stop = std::min(inputs.size(), start + batch);
    nn::Tensor xb(
        {stop - start, cfg.in_channels, cfg.input_height, cfg.input_width});
    for (std::size_t i = start; i < stop; ++i) {
      std::memcpy(xb.data() + (i - start) * per, inputs[i]->data(),
                  per * sizeof(double));
    }
    const nn::Value emb = encoder.forward(nn::Value::constant(xb));
    std::memcpy(out.data() + start * d, emb.tensor().data(),
                (stop - start) * d * sizeof(double));
  }
  return out;
}

std::vector<const nn::Tensor*> input_pointers(
    const std::vector<nn::Tensor>& inputs) {
  std::vector<const nn::Tensor*> ptrs;
  ptrs.reserve(inputs.size());
  for (const nn::Tensor& x : inputs) ptrs.push_back(&x);
  return ptrs;
}

std::vector<const nn::Tensor*> input_pointers(const SampleDataset& data) {
  std::vector<const nn::Tensor*> ptrs;
  ptrs.reserve(data.samples.size());
  for (const LabeledSample& s : data.samples) ptrs.push_back(&s.input);
  return ptrs;
}

// Population standard deviation of each column of an {N,D} matrix.
std::vector<double> per_dim_std(const nn::Tensor& rows) {
  const std::size_t n = rows.dim(0);
  const std::size_t d = rows.dim(1);
  std::vector<double> out(d, 0.0);
  for (std::size_t c = 0; c < d; ++c) {
    double mean = 0.0;
    for (std::size_t r = 0; r < n; ++r) mean += rows.at(r, c);
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
      const double dev = rows.at(r, c) - mean;
      var += dev * dev;
    }
    out[c] = std::sqrt(var / static_cast<double>(n));
  }
  return out;
}

std::size_t argmax_row(const nn::Tensor& logits, std::size_t row) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < logits.cols(); ++c) {
    if (logits.at(row, c) > logits.at(row, best)) best = c;
  }
  return best;
}

double accuracy_of(const nn::Tensor& logits,
                   const std::vector<std::size_t>& labels,
                   std::size_t num_classes,
                   std::vector<double>* per_class) {
  std::vector<std::size_t> hits(num_classes, 0);
  std::vector<std::size_t> counts(num_classes, 0);
  std::size_t correct = 0;
  for (std::size_t r = 0; r < labels.size(); ++r) {
    ++counts[labels[r]];
    if (argmax_row(logits, r) == labels[r]) {
      ++correct;
      ++hits[labels[r]];
    }
  }
  if (per_class != nullptr) {
    per_class->assign(num_classes, 0.0);
    for (std::size_t c = 0; c < num_classes; ++c) {
      if (counts[c] > 0) {
        (*per_class)[c] = static_cast<double>(hits[c]) /
                          static_cast<double>(counts[c]);
      }
    }
  }
  return static_cast<double>(correct) / static_cast<double>(labels.size());
}

bool tensors_bit_identical(const nn::Tensor& a, const nn::Tensor& b) {
  if (!a.same_shape(b)) return false;
  if (a.numel() == 0) return true;
  return std::memcmp(a.data(), b.data(), a.numel() * sizeof(double)) == 0;
}

void require_matching_datasets(const SampleDataset& train,
                               const SampleDataset& test, const char* what) {
  train.validate();
  test.validate();
  if (train.num_classes != test.num_classes) {
    throw ValidationError(std::string(what) +
                          ": train and test class counts disagree");
  }
  if (train.channels() != test.channels() ||
      train.height() != test.height() || train.width() != test.width()) {
    throw ValidationError(std::string(what) +
                          ": train and test sample shapes disagree");
  }
}

}  // namespace

const char* experiment_mode_name(ExperimentMode mode) {
  switch (mode) {
    case ExperimentMode::supervised: return "supervised";
    case ExperimentMode::ssl_pretrain: return "ssl_pretrain";
    case ExperimentMode::few_shot_probe: return "few_shot_probe";
    case ExperimentMode::transfer: return "transfer";
  }
  throw ValidationError("unknown experiment mode");
}

ExperimentMode experiment_mode_from_name(const std::string& name) {
  if (name == "supervised") return ExperimentMode::supervised;
  if (name == "ssl_pretrain") return ExperimentMode::ssl_pretrain;
  if (name == "few_shot_probe") return ExperimentMode::few_shot_probe;
  if (name == "transfer") return ExperimentMode::transfer;
  throw ValidationError("unknown experiment mode \"" + name + "\"");
}

ExperimentConfig ExperimentConfig::transfer_defaults() {
  ExperimentConfig config;
  config.mode = ExperimentMode::transfer;
  config.batch_size = 128;
  config.probe_epochs = 100;
  return config;
}

void ExperimentConfig::validate() const {
  algorithm.validate();
  if (ssl_epochs == 0) throw ValidationError("ssl_epochs must be positive");
  if (probe_epochs == 0) {
    throw ValidationError("probe_epochs must be positive");
  }
  if (!(ssl_lr > 0.0)) throw ValidationError("ssl_lr must be positive");
  if (!(probe_lr > 0.0)) throw ValidationError("probe_lr must be positive");
  if (!(supervised_lr > 0.0)) {
    throw ValidationError("supervised_lr must be positive");
  }
  if (batch_size < 2) {
    throw ValidationError(
        "batch_size must be at least 2 (pairwise objectives and batch "
        "normalization need company)");
  }
  if (!(train_ratio > 0.0 && train_ratio < 1.0)) {
    throw ValidationError("train_ratio must lie in (0, 1)");
  }
  if (num_seeds == 0) throw ValidationError("seeds must be positive");
}

namespace {

double json_double(const nlohmann::json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number()) {
    throw ValidationError(std::string("experiment config key \"") + key +
                          "\" must be a number");
  }
  return j[key].get<double>();
}

std::size_t json_size(const nlohmann::json& j, const char* key,
                      std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_unsigned()) {
    throw ValidationError(std::string("experiment config key \"") + key +
                          "\" must be a non-negative integer");
  }
  return j[key].get<std::size_t>();
}

bool json_bool(const nlohmann::json& j, const char* key, bool fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_boolean()) {
    throw ValidationError(std::string("experiment config key \"") + key +
                          "\" must be a boolean");
  }
  return j[key].get<bool>();
}

std::string json_string(const nlohmann::json& j, const char* key,
                        const std::string& fallback) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_string()) {
    throw ValidationError(std::string("experiment config key \"") + key +
                          "\" must be a string");
  }
  return j[key].get<std::string>();
}

}  // namespace

ExperimentConfig experiment_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("experiment config parse error: ") +
                          e.what());
  }
  if (!j.is_object()) {
    throw ValidationError("experiment config must be a JSON object");
  }
  static const std::set<std::string> known = {
      "mode",        "algorithm",     "temperature", "bt_lambda",
      "vic_weights", "ssl_epochs",    "probe_epochs", "ssl_lr",
      "probe_lr",    "supervised_lr", "batch_size",  "shots",
      "train_ratio", "seeds",         "augment_probe"};
  for (const auto& [key, value] : j.items()) {
    if (known.find(key) == known.end()) {
      throw ValidationError("unknown experiment config key \"" + key + "\"");
    }
  }

  ExperimentConfig config;
  config.mode = experiment_mode_from_name(
      json_string(j, "mode", experiment_mode_name(config.mode)));
  config.algorithm.algorithm = nn::ssl_algorithm_from_name(json_string(
      j, "algorithm", nn::ssl_algorithm_name(config.algorithm.algorithm)));
  config.algorithm.temperature =
      json_double(j, "temperature", config.algorithm.temperature);
  config.algorithm.bt_lambda =
      json_double(j, "bt_lambda", config.algorithm.bt_lambda);
  if (j.contains("vic_weights")) {
    const nlohmann::json& v = j["vic_weights"];
    if (!v.is_object()) {
      throw ValidationError("vic_weights must be a JSON object");
    }
    static const std::set<std::string> vic_known = {"invariance", "variance",
                                                    "covariance", "gamma"};
    for (const auto& [key, value] : v.items()) {
      if (vic_known.find(key) == vic_known.end()) {
        throw ValidationError("unknown vic_weights key \"" + key + "\"");
      }
    }
    config.algorithm.vic.inv_weight =
        json_double(v, "invariance", config.algorithm.vic.inv_weight);
    config.algorithm.vic.var_weight =
        json_double(v, "variance", config.algorithm.vic.var_weight);
    config.algorithm.vic.cov_weight =
        json_double(v, "covariance", config.algorithm.vic.cov_weight);
    config.algorithm.vic.gamma =
        json_double(v, "gamma", config.algorithm.vic.gamma);
  }
  config.ssl_epochs = json_size(j, "ssl_epochs", config.ssl_epochs);
  config.probe_epochs = json_size(j, "probe_epochs", config.probe_epochs);
  config.ssl_lr = json_double(j, "ssl_lr", config.ssl_lr);
  config.probe_lr = json_double(j, "probe_lr", config.probe_lr);
  config.supervised_lr =
      json_double(j, "supervised_lr", config.supervised_lr);
  config.batch_size = json_size(j, "batch_size", config.batch_size);
  config.shots = json_size(j, "shots", config.shots);
  config.train_ratio = json_double(j, "train_ratio", config.train_ratio);
  config.num_seeds = json_size(j, "seeds", config.num_seeds);
  config.augment_probe = json_bool(j, "augment_probe", config.augment_probe);
  config.validate();
  return config;
}

std::string experiment_config_to_json(const ExperimentConfig& config) {
  nlohmann::json j;
  j["mode"] = experiment_mode_name(config.mode);
  j["algorithm"] = nn::ssl_algorithm_name(config.algorithm.algorithm);
  j["temperature"] = config.algorithm.temperature;
  j["bt_lambda"] = config.algorithm.bt_lambda;
  j["vic_weights"] = {{"invariance", config.algorithm.vic.inv_weight},
                      {"variance", config.algorithm.vic.var_weight},
                      {"covariance", config.algorithm.vic.cov_weight},
                      {"gamma", config.algorithm.vic.gamma}};
  j["ssl_epochs"] = config.ssl_epochs;
  j["probe_epochs"] = config.probe_epochs;
  j["ssl_lr"] = config.ssl_lr;
  j["probe_lr"] = config.probe_lr;
  j["supervised_lr"] = config.supervised_lr;
  j["batch_size"] = config.batch_size;
  j["shots"] = config.shots;
  j["train_ratio"] = config.train_ratio;
  j["seeds"] = config.num_seeds;
  j["augment_probe"] = config.augment_probe;
  return j.dump(2);
}

nn::EncoderConfig choose_encoder_config(std::size_t channels,
                                        std::size_t height,
                                        std::size_t width) {
  nn::EncoderConfig cfg =
      std::min(height, width) < 32
          ? nn::EncoderConfig::reduced(channels, height, width)
          : nn::EncoderConfig::standard(channels, height, width);
  cfg.validate();
  return cfg;
}

std::string curves_to_csv(const std::vector<CurvePoint>& points) {
  std::ostringstream out;
  out.precision(17);
  out << "phase,seed,epoch,value\n";
  for (const CurvePoint& p : points) {
    out << p.phase << ',' << p.seed << ',' << p.epoch << ',' << p.value
        << '\n';
  }
  return out.str();
}

PretrainResult pretrain_ssl(const ExperimentConfig& config,
                            const std::vector<nn::Tensor>& train_inputs,
                            const std::vector<nn::Tensor>& heldout_inputs,
                            std::uint64_t seed,
                            std::vector<CurvePoint>* curves) {
  config.validate();
  const auto& shape = check_input_shapes(train_inputs, "pretraining");
  const auto& held_shape = check_input_shapes(heldout_inputs, "held-out");
  if (held_shape != shape) {
    throw ValidationError(
        "held-out inputs do not match the training input shape");
  }
  if (train_inputs.size() < 2) {
    throw ValidationError("ssl pretraining needs at least 2 inputs");
  }
  if (heldout_inputs.size() < 2) {
    throw ValidationError(
        "the collapse gate needs at least 2 held-out inputs");
  }

  RandomStream rng(seed);
  nn::Encoder encoder(choose_encoder_config(shape[0], shape[1], shape[2]),
                      rng);
  nn::Projector projector(rng);
  std::optional<nn::Predictor> predictor;
  if (config.algorithm.algorithm == nn::SslAlgorithm::simsiam) {
    predictor.emplace(rng);
  }

  std::vector<nn::Param> params;
  encoder.append_params("encoder", params);
  projector.append_params("projector", params);
  if (predictor.has_value()) predictor->append_params("predictor", params);
  nn::AdamConfig adam_cfg;
  adam_cfg.learning_rate = config.ssl_lr;
  nn::Adam adam(std::move(params), adam_cfg);

  std::vector<double> epoch_losses;
  std::vector<VicEpochTerms> vicreg_terms;
  std::vector<std::string> warnings;
  std::vector<std::size_t> order(train_inputs.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.ssl_epochs; ++epoch) {
    shuffle_in_place(order, rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    VicEpochTerms vic_sum;
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      const std::size_t stop =
          std::min(order.size(), start + config.batch_size);
      const std::size_t b = stop - start;
      if (b < 2) continue;  // a lone sample cannot form a contrastive batch

      std::vector<nn::Tensor> views_a(b);
      std::vector<nn::Tensor> views_b(b);
      for (std::size_t i = 0; i < b; ++i) {
        auto views =
            nn::two_crop(train_inputs[order[start + i]], rng.next_u64());
        views_a[i] = std::move(views.first);
        views_b[i] = std::move(views.second);
      }

      nn::Value loss;
      switch (config.algorithm.algorithm) {
        case nn::SslAlgorithm::simclr: {
          // One interleaved forward: rows (2i, 2i+1) are the two views of
          // sample i, so both views share the batch-norm statistics.
          std::vector<nn::Tensor> interleaved(2 * b);
          for (std::size_t i = 0; i < b; ++i) {
            interleaved[2 * i] = views_a[i];
            interleaved[2 * i + 1] = views_b[i];
          }
          const auto x = nn::Value::constant(stack_views(interleaved));
          const auto z = projector.forward(encoder.forward(x), true);
          loss = nn::nt_xent(z, config.algorithm.temperature);
          break;
        }
        case nn::SslAlgorithm::simsiam: {
          const auto xa = nn::Value::constant(stack_views(views_a));
          const auto xb = nn::Value::constant(stack_views(views_b));
          const auto za = projector.forward(encoder.forward(xa), true);
          const auto zb = projector.forward(encoder.forward(xb), true);
          const auto p1 = predictor->forward(za);
          const auto p2 = predictor->forward(zb);
          loss = nn::simsiam_loss(p1, zb.detach(), p2, za.detach(),
                                  &warnings);
          break;
        }
        case nn::SslAlgorithm::barlow_twins: {
          const auto xa = nn::Value::constant(stack_views(views_a));
          const auto xb = nn::Value::constant(stack_views(views_b));
          const auto ha = projector.forward(encoder.forward(xa), true);
          const auto hb = projector.forward(encoder.forward(xb), true);
          loss = nn::barlow_twins_loss(ha, hb, config.algorithm.bt_lambda);
          break;
        }
        case nn::SslAlgorithm::vicreg: {
          const auto xa = nn::Value::constant(stack_views(views_a));
          const auto xb = nn::Value::constant(stack_views(views_b));
          const auto ha = projector.forward(encoder.forward(xa), true);
          const auto hb = projector.forward(encoder.forward(xb), true);
          nn::VicRegTerms terms =
              nn::vicreg_loss(ha, hb, config.algorithm.vic);
          loss = terms.total;
          vic_sum.invariance += terms.invariance;
          vic_sum.variance_a += terms.variance_a;
          vic_sum.variance_b += terms.variance_b;
          vic_sum.covariance_a += terms.covariance_a;
          vic_sum.covariance_b += terms.covariance_b;
          break;
        }
      }

      const double loss_value = loss.tensor()[0];
      if (!std::isfinite(loss_value)) {
        throw NumericError(
            "ssl pretraining diverged: non-finite loss in epoch " +
            std::to_string(epoch) + " (" +
            std::string(nn::ssl_algorithm_name(config.algorithm.algorithm)) +
            ", lr " + format_fixed(config.ssl_lr, 6) + ")");
      }
      nn::backward(loss);
      adam.step();
      adam.zero_grad();
      loss_sum += loss_value;
      ++batches;
    }
    if (batches == 0) {
      throw ValidationError(
          "batch size leaves no usable pretraining batch");
    }
    const double epoch_loss = loss_sum / static_cast<double>(batches);
    epoch_losses.push_back(epoch_loss);
    log_point(curves, "ssl_loss", seed, epoch, epoch_loss);
    if (config.algorithm.algorithm == nn::SslAlgorithm::vicreg) {
      const double inv_batches = 1.0 / static_cast<double>(batches);
      VicEpochTerms mean{vic_sum.invariance * inv_batches,
                         vic_sum.variance_a * inv_batches,
                         vic_sum.variance_b * inv_batches,
                         vic_sum.covariance_a * inv_batches,
                         vic_sum.covariance_b * inv_batches};
      vicreg_terms.push_back(mean);
      log_point(curves, "ssl_vicreg_invariance", seed, epoch,
                mean.invariance);
      log_point(curves, "ssl_vicreg_variance", seed, epoch,
                0.5 * (mean.variance_a + mean.variance_b));
      log_point(curves, "ssl_vicreg_covariance", seed, epoch,
                0.5 * (mean.covariance_a + mean.covariance_b));
    }
  }

  const nn::Tensor held_emb =
      embed_all(encoder, input_pointers(heldout_inputs), config.batch_size);
  std::vector<double> embedding_std = per_dim_std(held_emb);
  std::size_t spread = 0;
  for (double s : embedding_std) {
    if (s > kCollapseStdThreshold) ++spread;
  }
  const double fraction =
      static_cast<double>(spread) / static_cast<double>(embedding_std.size());
  const bool gate = fraction >= kCollapseDimFraction;
  log_point(curves, "collapse_fraction", seed, config.ssl_epochs, fraction);
  if (!gate) {
    warnings.push_back(
        "collapse gate failed: only " + std::to_string(spread) + " of " +
        std::to_string(embedding_std.size()) +
        " embedding dimensions exceed std " +
        format_fixed(kCollapseStdThreshold, 2) + " on held-out data");
  }

  return PretrainResult{std::move(encoder),
                        std::move(epoch_losses),
                        std::move(vicreg_terms),
                        std::move(embedding_std),
                        fraction,
                        gate,
                        std::move(warnings)};
}

ProbeSeedStats few_shot_probe(const nn::Encoder& encoder,
                              const SampleDataset& train,
                              const SampleDataset& test,
                              const ExperimentConfig& config,
                              std::uint64_t seed,
                              std::vector<CurvePoint>* curves) {
  config.validate();
  require_matching_datasets(train, test, "probe");
  const auto& enc_cfg = encoder.config();
  if (train.channels() != enc_cfg.in_channels ||
      train.height() != enc_cfg.input_height ||
      train.width() != enc_cfg.input_width) {
    throw ValidationError(
        "probe dataset shape does not match the encoder input geometry");
  }
  const auto started = std::chrono::steady_clock::now();

  // Snapshot every encoder tensor so mutations cannot go unnoticed.
  std::vector<nn::NamedTensor> state_before;
  encoder.append_state("encoder", state_before);
  std::vector<nn::Tensor> snapshot;
  snapshot.reserve(state_before.size());
  for (const nn::NamedTensor& t : state_before) {
    snapshot.push_back(t.tensor.clone());
  }

  RandomStream rng(seed);
  const std::vector<std::size_t> train_labels = train.labels();
  const std::vector<std::size_t> shot_indices =
      sample_n_per_class(train_labels, config.shots, rng.next_u64());

  std::vector<std::size_t> shot_labels;
  shot_labels.reserve(shot_indices.size());
  std::vector<const nn::Tensor*> shot_inputs;
  shot_inputs.reserve(shot_indices.size());
  for (std::size_t i : shot_indices) {
    shot_labels.push_back(train.samples[i].label);
    shot_inputs.push_back(&train.samples[i].input);
  }

  // Embeddings never carry graph history, so the probe cannot reach the
  // encoder weights even in principle.
  nn::Tensor shot_emb;
  if (!config.augment_probe) {
    shot_emb = embed_all(encoder, shot_inputs, config.batch_size);
  }
  const nn::Tensor test_emb =
      embed_all(encoder, input_pointers(test), config.batch_size);
  const std::vector<std::size_t> test_labels = test.labels();
  const std::size_t d = enc_cfg.embedding_dim();

  nn::Linear head(d, train.num_classes, rng);
  std::vector<nn::Param> params;
  head.append_params("probe", params);
  nn::AdamConfig adam_cfg;
  adam_cfg.learning_rate = config.probe_lr;
  nn::Adam adam(std::move(params), adam_cfg);

  std::vector<double> test_curve;
  std::vector<std::size_t> order(shot_indices.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.probe_epochs; ++epoch) {
    shuffle_in_place(order, rng);
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      const std::size_t stop =
          std::min(order.size(), start + config.batch_size);
      const std::size_t b = stop - start;
      nn::Tensor xb({b, d});
      std::vector<std::size_t> yb(b);
      for (std::size_t i = 0; i < b; ++i) {
        const std::size_t member = order[start + i];
        yb[i] = shot_labels[member];
        if (config.augment_probe) {
          const nn::Tensor view =
              nn::augment_view(*shot_inputs[member], rng);
          const nn::Tensor emb =
              embed_all(encoder, {&view}, config.batch_size);
          std::memcpy(xb.data() + i * d, emb.data(), d * sizeof(double));
        } else {
          std::memcpy(xb.data() + i * d, shot_emb.data() + member * d,
                      d * sizeof(double));
        }
      }
      const auto logits = head.forward(nn::Value::constant(xb));
      const auto loss = nn::softmax_cross_entropy(logits, yb);
      if (!std::isfinite(loss.tensor()[0])) {
        throw NumericError("probe training diverged: non-finite loss in "
                           "epoch " +
                           std::to_string(epoch));
      }
      nn::backward(loss);
      adam.step();
      adam.zero_grad();
    }
    const auto logits = head.forward(nn::Value::constant(test_emb));
    test_curve.push_back(accuracy_of(logits.tensor(), test_labels,
                                     test.num_classes, nullptr));
    log_point(curves, "probe_test_accuracy", seed, epoch, test_curve.back());
  }

  ProbeSeedStats stats;
  stats.seed = seed;
  std::vector<double> per_class;
  const auto final_logits = head.forward(nn::Value::constant(test_emb));
  stats.accuracy = accuracy_of(final_logits.tensor(), test_labels,
                               test.num_classes, &per_class);
  stats.per_class_accuracy = std::move(per_class);
  stats.embedding_std = per_dim_std(test_emb);
  stats.test_curve = std::move(test_curve);

  std::vector<nn::NamedTensor> state_after;
  encoder.append_state("encoder", state_after);
  bool frozen = state_after.size() == snapshot.size();
  for (std::size_t i = 0; frozen && i < snapshot.size(); ++i) {
    frozen = tensors_bit_identical(snapshot[i], state_after[i].tensor);
  }
  stats.encoder_frozen = frozen;
  stats.runtime_s = std::chrono::duration<double>(
                        std::chrono::steady_clock::now() - started)
                        .count();
  return stats;
}

ProbeSeedStats random_baseline_probe(const SampleDataset& train,
                                     const SampleDataset& test,
                                     const ExperimentConfig& config,
                                     std::uint64_t seed,
                                     std::vector<CurvePoint>* curves) {
  config.validate();
  require_matching_datasets(train, test, "random baseline");
  RandomStream rng(seed);
  const nn::Encoder untrained(
      choose_encoder_config(train.channels(), train.height(), train.width()),
      rng);
  return few_shot_probe(untrained, train, test, config, seed, curves);
}

double chance_floor(std::size_t num_classes, std::size_t test_count) {
  if (num_classes < 2) {
    throw ValidationError("chance floor needs at least 2 classes");
  }
  if (test_count == 0) {
    throw ValidationError("chance floor needs a non-empty test set");
  }
  const double p = 1.0 / static_cast<double>(num_classes);
  const double sigma =
      std::sqrt(p * (1.0 - p) / static_cast<double>(test_count));
  return p - 3.0 * sigma;
}

ProbeReport aggregate_probe_report(const std::vector<ProbeSeedStats>& runs) {
  if (runs.empty()) {
    throw ValidationError("cannot aggregate zero probe runs");
  }
  const std::size_t num_classes = runs.front().per_class_accuracy.size();
  const std::size_t d = runs.front().embedding_std.size();
  for (const ProbeSeedStats& r : runs) {
    if (r.per_class_accuracy.size() != num_classes ||
        r.embedding_std.size() != d) {
      throw ValidationError("probe runs disagree in report dimensions");
    }
  }
  ProbeReport report;
  report.per_class_accuracy.assign(num_classes, 0.0);
  report.embedding_std.assign(d, 0.0);
  const double inv = 1.0 / static_cast<double>(runs.size());
  for (const ProbeSeedStats& r : runs) {
    report.accuracy += r.accuracy * inv;
    report.runtime_s += r.runtime_s * inv;
    for (std::size_t c = 0; c < num_classes; ++c) {
      report.per_class_accuracy[c] += r.per_class_accuracy[c] * inv;
    }
    for (std::size_t k = 0; k < d; ++k) {
      report.embedding_std[k] += r.embedding_std[k] * inv;
    }
    report.seeds_used.push_back(r.seed);
  }
  report.per_seed = runs;
  return report;
}

std::string probe_report_to_json(const ProbeReport& report) {
  nlohmann::json j;
  j["accuracy"] = report.accuracy;
  j["per_class_accuracy"] = report.per_class_accuracy;
  j["embedding_std"] = report.embedding_std;
  j["seeds_used"] = report.seeds_used;
  j["runtime_s"] = report.runtime_s;
  nlohmann::json seeds = nlohmann::json::array();
  for (const ProbeSeedStats& r : report.per_seed) {
    seeds.push_back({{"seed", r.seed},
                     {"accuracy", r.accuracy},
                     {"per_class_accuracy", r.per_class_accuracy},
                     {"embedding_std", r.embedding_std},
                     {"test_curve", r.test_curve},
                     {"runtime_s", r.runtime_s},
                     {"encoder_frozen", r.encoder_frozen}});
  }
  j["per_seed"] = std::move(seeds);
  return j.dump(2);
}

ProbeReport run_ssl_probe_experiment(const ExperimentConfig& config,
                                     const SampleDataset& train,
                                     const SampleDataset& test,
                                     std::uint64_t base_seed,
                                     std::vector<CurvePoint>* curves) {
  config.validate();
  require_matching_datasets(train, test, "ssl probe experiment");
  // Only the bare inputs cross into pretraining; labels stay behind.
  std::vector<nn::Tensor> train_inputs;
  train_inputs.reserve(train.samples.size());
  for (const LabeledSample& s : train.samples) {
    train_inputs.push_back(s.input);
  }
  std::vector<nn::Tensor> heldout_inputs;
  heldout_inputs.reserve(test.samples.size());
  for (const LabeledSample& s : test.samples) {
    heldout_inputs.push_back(s.input);
  }
  std::vector<ProbeSeedStats> runs;
  runs.reserve(config.num_seeds);
  for (std::size_t i = 0; i < config.num_seeds; ++i) {
    const std::uint64_t seed = base_seed + i;
    PretrainResult pre =
        pretrain_ssl(config, train_inputs, heldout_inputs, seed, curves);
    runs.push_back(
        few_shot_probe(pre.encoder, train, test, config, seed, curves));
  }
  return aggregate_probe_report(runs);
}

ProbeReport run_random_baseline(const ExperimentConfig& config,
                                const SampleDataset& train,
                                const SampleDataset& test,
                                std::uint64_t base_seed,
                                std::vector<CurvePoint>* curves) {
  config.validate();
  require_matching_datasets(train, test, "random baseline");
  std::vector<ProbeSeedStats> runs;
  runs.reserve(config.num_seeds);
  for (std::size_t i = 0; i < config.num_seeds; ++i) {
    runs.push_back(
        random_baseline_probe(train, test, config, base_seed + i, curves));
  }
  return aggregate_probe_report(runs);
}

std::optional<std::string> shot_monotonicity_flag(double accuracy_5shot,
                                                  double accuracy_10shot) {
  if (accuracy_10shot + 0.02 >= accuracy_5shot) return std::nullopt;
  return "10-shot accuracy " + format_fixed(accuracy_10shot, 4) +
         " fell more than 2 points below 5-shot accuracy " +
         format_fixed(accuracy_5shot, 4);
}

namespace {

double supervised_accuracy(const nn::Encoder& encoder,
                           nn::Projector& projector,
                           const nn::Linear& classifier,
                           const SampleDataset& data, std::size_t batch) {
  const std::vector<std::size_t> labels = data.labels();
  std::size_t correct = 0;
  const auto ptrs = input_pointers(data);
  for (std::size_t start = 0; start < ptrs.size(); start += batch) {
    const std::size_t stop = std::min(ptrs.size(), start + batch);
    std::vector<nn::Tensor> chunk;
    chunk.reserve(stop - start);
    for (std::size_t i = start; i < stop; ++i) chunk.push_back(*ptrs[i]);
    const auto x = nn::Value::constant(stack_views(chunk));
    const auto logits =
        classifier.forward(projector.forward(encoder.forward(x), false));
    const nn::Tensor& lt = logits.tensor();
    for (std::size_t r = 0; r < stop - start; ++r) {
      if (argmax_row(lt, r) == labels[start + r]) ++correct;
    }
  }
  return static_cast<double>(correct) / static_cast<double>(ptrs.size());
}

}  // namespace

SupervisedResult train_supervised(const ExperimentConfig& config,
                                  const SampleDataset& train,
                                  const SampleDataset& test,
                                  std::uint64_t seed,
                                  std::vector<CurvePoint>* curves) {
  config.validate();
  require_matching_datasets(train, test, "supervised");

  RandomStream rng(seed);
  nn::Encoder encoder(
      choose_encoder_config(train.channels(), train.height(), train.width()),
      rng);
  nn::Projector projector(rng);
  nn::Linear classifier(nn::kEmbeddingDim, train.num_classes, rng);

  std::vector<nn::Param> params;
  encoder.append_params("encoder", params);
  projector.append_params("projector", params);
  classifier.append_params("classifier", params);
  nn::AdamConfig adam_cfg;
  adam_cfg.learning_rate = config.supervised_lr;
  nn::Adam adam(std::move(params), adam_cfg);

  std::vector<double> epoch_losses;
  std::vector<std::string> warnings;
  std::vector<std::size_t> order(train.samples.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t epoch = 0; epoch < config.ssl_epochs; ++epoch) {
    shuffle_in_place(order, rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();
         start += config.batch_size) {
      const std::size_t stop =
          std::min(order.size(), start + config.batch_size);
      const std::size_t b = stop - start;
      if (b < 2) continue;  // batch norm needs a populated batch
      std::vector<nn::Tensor> views(b);
      std::vector<std::size_t> yb(b);
      for (std::size_t i = 0; i < b; ++i) {
        const LabeledSample& s = train.samples[order[start + i]];
        views[i] = nn::augment_view(s.input, rng);
        yb[i] = s.label;
      }
      const auto x = nn::Value::constant(stack_views(views));
      const auto logits =
          classifier.forward(projector.forward(encoder.forward(x), true));
      const auto loss = nn::softmax_cross_entropy(logits, yb);
      const double loss_value = loss.tensor()[0];
      if (!std::isfinite(loss_value)) {
        throw NumericError(
            "supervised training diverged: non-finite loss in epoch " +
            std::to_string(epoch) + " (lr " +
            format_fixed(config.supervised_lr, 6) + ")");
      }
      nn::backward(loss);
      adam.step();
      adam.zero_grad();
      loss_sum += loss_value;
      ++batches;
    }
    if (batches == 0) {
      throw ValidationError("batch size leaves no usable supervised batch");
    }
    const double epoch_loss = loss_sum / static_cast<double>(batches);
    epoch_losses.push_back(epoch_loss);
    log_point(curves, "supervised_loss", seed, epoch, epoch_loss);
  }

  const double train_accuracy = supervised_accuracy(
      encoder, projector, classifier, train, config.batch_size);
  const double test_accuracy = supervised_accuracy(
      encoder, projector, classifier, test, config.batch_size);
  return SupervisedResult{std::move(encoder),  std::move(projector),
                          std::move(classifier), std::move(epoch_losses),
                          train_accuracy,      test_accuracy,
                          std::move(warnings)};
}

TransferResult transfer_run(const ExperimentConfig& config,
                            const std::vector<nn::Tensor>& source_inputs,
                            const SampleDataset& target_train,
                            const SampleDataset& target_test,
                            std::uint64_t seed,
                            std::vector<CurvePoint>* curves) {
  config.validate();
  const auto& src_shape = check_input_shapes(source_inputs, "source");
  require_matching_datasets(target_train, target_test, "transfer");
  if (source_inputs.size() < 4) {
    throw ValidationError(
        "transfer needs at least 4 source inputs to split into "
        "pretraining and held-out parts");
  }
  if (target_train.channels() != src_shape[0]) {
    throw ValidationError(
        "transfer: channel counts disagree (source " +
        std::to_string(src_shape[0]) + ", target " +
        std::to_string(target_train.channels()) + ")");
  }

  // Unlabeled source split for the collapse gate, seeded independently of
  // the phases that re-derive their streams from the same seed.
  RandomStream rng(seed);
  RandomStream split_rng = rng.fork(1);
  std::vector<std::size_t> order(source_inputs.size());
  std::iota(order.begin(), order.end(), 0);
  shuffle_in_place(order, split_rng);
  std::size_t take = static_cast<std::size_t>(
      config.train_ratio * static_cast<double>(order.size()));
  take = std::max<std::size_t>(2, std::min(take, order.size() - 2));
  std::vector<nn::Tensor> src_train;
  std::vector<nn::Tensor> src_held;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < take ? src_train : src_held).push_back(source_inputs[order[i]]);
  }

  PretrainResult pre = pretrain_ssl(config, src_train, src_held, seed, curves);

  const auto reconcile = [&](const SampleDataset& data) {
    if (data.height() == src_shape[1] && data.width() == src_shape[2]) {
      return data;
    }
    SampleDataset fitted;
    fitted.num_classes = data.num_classes;
    fitted.samples.reserve(data.samples.size());
    for (const LabeledSample& s : data.samples) {
      fitted.samples.push_back(
          {crop_or_pad(s.input, src_shape[1], src_shape[2]), s.label});
    }
    return fitted;
  };
  const SampleDataset fit_train = reconcile(target_train);
  const SampleDataset fit_test = reconcile(target_test);

  ProbeSeedStats probe =
      few_shot_probe(pre.encoder, fit_train, fit_test, config, seed, curves);
  return TransferResult{std::move(pre), std::move(probe)};
}

}  // namespace csisense
