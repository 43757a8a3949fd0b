#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "csisense/dataset.hpp"
#include "csisense/nn/layers.hpp"
#include "csisense/nn/losses.hpp"

namespace csisense {

enum class ExperimentMode { supervised, ssl_pretrain, few_shot_probe, transfer };

const char* experiment_mode_name(ExperimentMode mode);
ExperimentMode experiment_mode_from_name(const std::string& name);

// A pretrained encoder collapses when its embedding dimensions stop varying
// across inputs.  The gate requires at least kCollapseDimFraction of the
// dimensions to spread beyond kCollapseStdThreshold on held-out data.
inline constexpr double kCollapseStdThreshold = 0.01;
inline constexpr double kCollapseDimFraction = 0.9;

// One experiment recipe.  The defaults are the reference operating point;
// transfer_defaults() switches to the wider pretraining batch and the longer
// probe schedule used for cross-domain runs.
struct ExperimentConfig {
  ExperimentMode mode = ExperimentMode::ssl_pretrain;
  nn::SslLossConfig algorithm;

  std::size_t ssl_epochs = 50;
  std::size_t probe_epochs = 20;
  double ssl_lr = 0.01;
  double probe_lr = 0.001;
  double supervised_lr = 0.001;
  std::size_t batch_size = 64;
  std::size_t shots = 10;  // per-class probe examples; 0 = use every sample
  double train_ratio = 0.8;
  std::size_t num_seeds = 5;
  bool augment_probe = false;

  static ExperimentConfig transfer_defaults();
  void validate() const;
};

// Strict JSON codec: unknown keys are rejected, absent keys keep their
// defaults.  Flat layout except "vic_weights", which nests the four VICReg
// coefficients.
ExperimentConfig experiment_config_from_json(const std::string& text);
std::string experiment_config_to_json(const ExperimentConfig& config);

// Reduced geometry when either spatial extent is too small for the standard
// kernels, standard otherwise.  The returned plan is already validated.
nn::EncoderConfig choose_encoder_config(std::size_t channels,
                                        std::size_t height,
                                        std::size_t width);

// One logged scalar of a training or evaluation curve.
struct CurvePoint {
  std::string phase;
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
  double value = 0.0;
};

// "phase,seed,epoch,value" rows, full double precision.
std::string curves_to_csv(const std::vector<CurvePoint>& points);

// Unweighted per-epoch VICReg diagnostics (both branches kept separate).
struct VicEpochTerms {
  double invariance = 0.0;
  double variance_a = 0.0;
  double variance_b = 0.0;
  double covariance_a = 0.0;
  double covariance_b = 0.0;
};

struct PretrainResult {
  nn::Encoder encoder;
  std::vector<double> epoch_losses;
  std::vector<VicEpochTerms> vicreg_terms;  // one per epoch, vicreg only
  std::vector<double> embedding_std;        // per-dim, held-out embeddings
  double collapse_fraction = 0.0;  // dims spreading beyond the threshold
  bool collapse_gate_passed = false;
  std::vector<std::string> warnings;
};

// Self-supervised pretraining.  Deliberately label-free: the signature
// accepts bare input tensors, so no label can leak into this path.  Two
// augmented views per sample feed the configured objective; encoder and
// projector (plus predictor where the objective needs one) train jointly.
// A non-finite loss aborts with NumericError.  Deterministic in the seed.
PretrainResult pretrain_ssl(const ExperimentConfig& config,
                            const std::vector<nn::Tensor>& train_inputs,
                            const std::vector<nn::Tensor>& heldout_inputs,
                            std::uint64_t seed,
                            std::vector<CurvePoint>* curves = nullptr);

struct ProbeSeedStats {
  std::uint64_t seed = 0;
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  std::vector<double> embedding_std;  // per-dim, test embeddings
  std::vector<double> test_curve;     // test accuracy after each epoch
  double runtime_s = 0.0;
  bool encoder_frozen = false;  // state bit-identical before and after
};

// Linear evaluation on the frozen encoder output (the embedding before any
// projection head).  `config.shots` examples per class are drawn without
// replacement (0 = all); a class with fewer samples is an error naming the
// class.  Probe inputs are not augmented unless config.augment_probe is set.
// Encoder weights are snapshotted and compared bit-for-bit afterwards.
ProbeSeedStats few_shot_probe(const nn::Encoder& encoder,
                              const SampleDataset& train,
                              const SampleDataset& test,
                              const ExperimentConfig& config,
                              std::uint64_t seed,
                              std::vector<CurvePoint>* curves = nullptr);

// Control: identical probe on a freshly initialized, never-trained encoder.
ProbeSeedStats random_baseline_probe(const SampleDataset& train,
                                     const SampleDataset& test,
                                     const ExperimentConfig& config,
                                     std::uint64_t seed,
                                     std::vector<CurvePoint>* curves = nullptr);

// Lower sanity bound for the random control: chance minus three binomial
// standard errors at the test-set size.
double chance_floor(std::size_t num_classes, std::size_t test_count);

// Multi-seed reduce.  Scalar and vector fields are arithmetic means over
// seeds (runtime included); the per-seed records are retained verbatim.
struct ProbeReport {
  double accuracy = 0.0;
  std::vector<double> per_class_accuracy;
  std::vector<double> embedding_std;
  std::vector<std::uint64_t> seeds_used;
  double runtime_s = 0.0;
  std::vector<ProbeSeedStats> per_seed;
};

ProbeReport aggregate_probe_report(const std::vector<ProbeSeedStats>& runs);
std::string probe_report_to_json(const ProbeReport& report);

// Pretrains and probes once per seed (base_seed, base_seed + 1, ...) as
// independent jobs, then reduces.  Labels of `train` reach only the probe.
ProbeReport run_ssl_probe_experiment(const ExperimentConfig& config,
                                     const SampleDataset& train,
                                     const SampleDataset& test,
                                     std::uint64_t base_seed,
                                     std::vector<CurvePoint>* curves = nullptr);

// The matching multi-seed random-encoder control.
ProbeReport run_random_baseline(const ExperimentConfig& config,
                                const SampleDataset& train,
                                const SampleDataset& test,
                                std::uint64_t base_seed,
                                std::vector<CurvePoint>* curves = nullptr);

// Advisory check that more shots did not cost more than two points of mean
// accuracy; returns the flag message rather than failing.
std::optional<std::string> shot_monotonicity_flag(double accuracy_5shot,
                                                  double accuracy_10shot);

struct SupervisedResult {
  nn::Encoder encoder;
  nn::Projector projector;
  nn::Linear classifier;
  std::vector<double> epoch_losses;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
  std::vector<std::string> warnings;
};

// Fully supervised reference: encoder, projector and linear classifier
// trained jointly with cross entropy on single-view augmented batches for
// ssl_epochs.  A non-finite loss aborts with NumericError.
SupervisedResult train_supervised(const ExperimentConfig& config,
                                  const SampleDataset& train,
                                  const SampleDataset& test,
                                  std::uint64_t seed,
                                  std::vector<CurvePoint>* curves = nullptr);

struct TransferResult {
  PretrainResult pretrain;
  ProbeSeedStats probe;
};

// Pretrains on unlabeled source inputs, then probes on the target dataset.
// Target samples must match the source channel count; spatial mismatches
// are reconciled by center crop / zero pad onto the source geometry.  With
// identical shapes this reduces to pretrain_ssl + few_shot_probe.
TransferResult transfer_run(const ExperimentConfig& config,
                            const std::vector<nn::Tensor>& source_inputs,
                            const SampleDataset& target_train,
                            const SampleDataset& target_test,
                            std::uint64_t seed,
                            std::vector<CurvePoint>* curves = nullptr);

}  // namespace csisense
