#pragma once

#include <map>
#include <string>
#include <vector>

#include "csisense/csi_tensor.hpp"

namespace csisense {

enum class StageKind {
  moving_average,
  weighted_ma,
  ewma,
  median,
  hampel,
  lof,
  lowpass,
  dwt_denoise,
  cpe,
  phase_diff,
  csi_ratio,
  pca,
  lrf,
};

struct PipelineStage {
  StageKind kind;
  std::map<std::string, double> params;
};

// Ordered, serializable preprocessing recipe.  Every stage maps a tensor to
// a tensor: trace filters act on each amplitude trace and keep phases;
// phase_diff re-emits unit phasors of the differences; csi_ratio collapses
// the rx axis; pca projects per-timestamp amplitude vectors onto component
// scores; lrf rebuilds amplitudes from the low-rank factors.
struct PipelineSpec {
  std::vector<PipelineStage> stages;

  // Throws ValidationError when a stage carries an unknown or ill-typed
  // parameter for its kind.
  void validate() const;
};

PipelineSpec pipeline_from_json(const std::string& text);
std::string pipeline_to_json(const PipelineSpec& spec);

const char* stage_kind_name(StageKind kind);

// Runs the stages in order; pure — identical spec and input give a
// bit-identical result.
CsiTensor run_pipeline(const PipelineSpec& spec, const CsiTensor& input);

}  // namespace csisense
