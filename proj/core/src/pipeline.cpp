#include "csisense/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <set>

#include <json.hpp>

#include "csisense/denoise.hpp"
#include "csisense/error.hpp"
#include "csisense/outliers.hpp"
#include "csisense/phase_clean.hpp"
#include "csisense/reduction.hpp"
#include "csisense/smoothing.hpp"

namespace csisense {
namespace {

struct StageInfo {
  const char* name;
  // Accepted parameter keys; anything else is rejected up front.
  std::set<std::string> keys;
};

const std::map<StageKind, StageInfo>& stage_table() {
  static const std::map<StageKind, StageInfo> table = {
      {StageKind::moving_average, {"moving_average", {"window"}}},
      {StageKind::weighted_ma, {"weighted_ma", {"window"}}},
      {StageKind::ewma, {"ewma", {"alpha"}}},
      {StageKind::median, {"median", {"window"}}},
      {StageKind::hampel, {"hampel", {"window", "n_sigma"}}},
      {StageKind::lof, {"lof", {"k", "threshold"}}},
      {StageKind::lowpass, {"lowpass", {"cutoff_hz"}}},
      {StageKind::dwt_denoise, {"dwt_denoise", {"wavelet", "levels", "threshold"}}},
      {StageKind::cpe, {"cpe", {}}},
      {StageKind::phase_diff, {"phase_diff", {"axis"}}},
      {StageKind::csi_ratio, {"csi_ratio", {"rx_i", "rx_j"}}},
      {StageKind::pca, {"pca", {"k"}}},
      {StageKind::lrf, {"lrf", {"rank"}}},
  };
  return table;
}

double param_or(const PipelineStage& stage, const std::string& key,
                double fallback) {
  const auto it = stage.params.find(key);
  return it == stage.params.end() ? fallback : it->second;
}

std::size_t size_param(const PipelineStage& stage, const std::string& key,
                       double fallback) {
  const double v = param_or(stage, key, fallback);
  if (!(v >= 0.0) || v != std::floor(v)) {
    throw ValidationError(std::string(stage_kind_name(stage.kind)) + "." +
                          key + " must be a non-negative integer");
  }
  return static_cast<std::size_t>(v);
}

// Applies a real filter to every amplitude trace, keeping phases.
CsiTensor map_amplitude_traces(
    const CsiTensor& csi, const std::function<Series(const Series&)>& fn) {
  AmpPhaseView view = split_amp_phase(csi);
  const std::size_t t = csi.t();
  for (std::size_t s = 0; s < csi.s(); ++s) {
    for (std::size_t m = 0; m < csi.m(); ++m) {
      for (std::size_t n = 0; n < csi.n(); ++n) {
        Series trace(t);
        for (std::size_t k = 0; k < t; ++k) {
          trace[k] = view.amplitude.at(k, s, m, n);
        }
        const Series filtered = fn(trace);
        for (std::size_t k = 0; k < t; ++k) {
          view.amplitude.at(k, s, m, n) = filtered[k];
        }
      }
    }
  }
  return merge_amp_phase(view, csi);
}

// Per-timestamp amplitude feature matrix (T x S*M*N).
RealMatrix amplitude_rows(const CsiTensor& csi) {
  RealMatrix x(csi.t(), csi.s() * csi.m() * csi.n());
  const AmpPhaseView view = split_amp_phase(csi);
  for (std::size_t k = 0; k < view.amplitude.data.size(); ++k) {
    x.data[k] = view.amplitude.data[k];
  }
  return x;
}

CsiTensor run_stage(const PipelineStage& stage, const CsiTensor& input) {
  switch (stage.kind) {
    case StageKind::moving_average: {
      const std::size_t w = size_param(stage, "window", 5);
      return map_amplitude_traces(
          input, [w](const Series& s) { return moving_average(s, w); });
    }
    case StageKind::weighted_ma: {
      const std::size_t w = size_param(stage, "window", 5);
      if (w < 1 || w % 2 == 0) {
        throw ValidationError("weighted_ma.window must be odd and >= 1");
      }
      // Triangular taps, normalized to one.
      std::vector<double> weights(w);
      const std::size_t h = (w - 1) / 2;
      double total = 0.0;
      for (std::size_t i = 0; i < w; ++i) {
        weights[i] = static_cast<double>(h + 1) -
                     std::abs(static_cast<double>(i) - static_cast<double>(h));
        total += weights[i];
      }
      for (double& v : weights) v /= total;
      return map_amplitude_traces(input, [&weights](const Series& s) {
        return weighted_ma(s, weights);
      });
    }
    case StageKind::ewma: {
      const double alpha = param_or(stage, "alpha", 0.5);
      return map_amplitude_traces(
          input, [alpha](const Series& s) { return ewma(s, alpha); });
    }
    case StageKind::median: {
      const std::size_t w = size_param(stage, "window", 5);
      return map_amplitude_traces(
          input, [w](const Series& s) { return median_filter(s, w); });
    }
    case StageKind::hampel: {
      const std::size_t w = size_param(stage, "window", 5);
      const double n_sigma = param_or(stage, "n_sigma", 3.0);
      return map_amplitude_traces(input, [w, n_sigma](const Series& s) {
        return hampel(s, w, n_sigma).values;
      });
    }
    case StageKind::lof: {
      const std::size_t k = size_param(stage, "k", 10);
      const double threshold = param_or(stage, "threshold", 1.5);
      const std::vector<double> scores = lof_scores(amplitude_rows(input), k);
      // Replace flagged timestamps with the nearest unflagged slice.
      std::vector<std::size_t> keep;
      for (std::size_t t = 0; t < input.t(); ++t) {
        if (scores[t] <= threshold) keep.push_back(t);
      }
      if (keep.empty()) {
        throw NumericError("lof stage flagged every timestamp");
      }
      CsiTensor out = input;
      std::string flagged;
      for (std::size_t t = 0; t < input.t(); ++t) {
        if (scores[t] <= threshold) continue;
        const auto it = std::min_element(
            keep.begin(), keep.end(), [t](std::size_t a, std::size_t b) {
              const auto da = a > t ? a - t : t - a;
              const auto db = b > t ? b - t : t - b;
              return da < db;
            });
        for (std::size_t s = 0; s < input.s(); ++s)
          for (std::size_t m = 0; m < input.m(); ++m)
            for (std::size_t n = 0; n < input.n(); ++n)
              out.at(t, s, m, n) = input.at(*it, s, m, n);
        if (!flagged.empty()) flagged += ',';
        flagged += std::to_string(t);
      }
      if (!flagged.empty()) out.meta["lof_flagged"] = flagged;
      return out;
    }
    case StageKind::lowpass: {
      const double cutoff = param_or(stage, "cutoff_hz", 0.0);
      const double dt = input.sample_interval;
      return map_amplitude_traces(input, [dt, cutoff](const Series& s) {
        return lowpass(s, dt, cutoff);
      });
    }
    case StageKind::dwt_denoise: {
      const std::size_t wavelet_id = size_param(stage, "wavelet", 0);
      if (wavelet_id > 1) {
        throw ValidationError("dwt_denoise.wavelet must be 0 (haar) or 1 "
                              "(db4)");
      }
      const Wavelet wavelet = wavelet_id == 0 ? Wavelet::haar : Wavelet::db4;
      const std::size_t levels = size_param(stage, "levels", 2);
      std::optional<double> threshold;
      if (stage.params.count("threshold") != 0) {
        threshold = stage.params.at("threshold");
      }
      return map_amplitude_traces(
          input, [wavelet, levels, threshold](const Series& s) {
            return dwt_denoise(s, wavelet, levels, threshold);
          });
    }
    case StageKind::cpe:
      return cpe_compensate(input);
    case StageKind::phase_diff: {
      const std::size_t axis_id = size_param(stage, "axis", 0);
      if (axis_id > 1) {
        throw ValidationError("phase_diff.axis must be 0 (subcarrier) or 1 "
                              "(time)");
      }
      const PhaseDiffAxis axis =
          axis_id == 0 ? PhaseDiffAxis::subcarrier : PhaseDiffAxis::time;
      const RealField d = phase_diff(input, axis);
      // Differences re-enter the tensor domain as unit phasors.
      CsiTensor out(d.t, d.s, d.m, d.n);
      out.sample_interval = input.sample_interval;
      out.carrier_freqs.assign(input.carrier_freqs.begin(),
                               input.carrier_freqs.begin() +
                                   static_cast<std::ptrdiff_t>(d.s));
      out.meta = input.meta;
      for (std::size_t i = 0; i < d.data.size(); ++i) {
        out.data()[i] = std::polar(1.0, d.data[i]);
      }
      return out;
    }
    case StageKind::csi_ratio: {
      const std::size_t rx_i = size_param(stage, "rx_i", 0);
      const std::size_t rx_j = size_param(stage, "rx_j", 1);
      const CsiRatioResult r = csi_ratio(input, rx_i, rx_j);
      CsiTensor out(r.t, r.s, 1, 1);
      out.sample_interval = input.sample_interval;
      out.carrier_freqs = input.carrier_freqs;
      out.meta = input.meta;
      for (std::size_t i = 0; i < r.values.size(); ++i) {
        out.data()[i] = r.values[i];
      }
      if (!r.underflow_timestamps.empty()) {
        std::string ts;
        for (std::size_t t : r.underflow_timestamps) {
          if (!ts.empty()) ts += ',';
          ts += std::to_string(t);
        }
        out.meta["csi_ratio_underflow_timestamps"] = ts;
      }
      return out;
    }
    case StageKind::pca: {
      const std::size_t k = size_param(stage, "k", 2);
      const RealMatrix x = amplitude_rows(input);
      const PcaModel model = pca_fit(x, k);
      const RealMatrix z = pca_transform(model, x);
      // Component scores become k virtual per-timestamp channels.
      CsiTensor out(input.t(), k, 1, 1);
      out.sample_interval = input.sample_interval;
      out.carrier_freqs.assign(input.carrier_freqs.begin(),
                               input.carrier_freqs.begin() +
                                   static_cast<std::ptrdiff_t>(
                                       std::min(k, input.s())));
      while (out.carrier_freqs.size() < k) {
        out.carrier_freqs.push_back(out.carrier_freqs.back());
      }
      out.meta = input.meta;
      for (std::size_t t = 0; t < input.t(); ++t) {
        for (std::size_t j = 0; j < k; ++j) {
          out.at(t, j, 0, 0) = {z.at(t, j), 0.0};
        }
      }
      return out;
    }
    case StageKind::lrf: {
      const std::size_t rank = size_param(stage, "rank", 1);
      const RealMatrix x = amplitude_rows(input);
      const LowRankFactors f = lrf(x, rank);
      // Low-rank amplitude reconstruction; phases pass through.
      AmpPhaseView view = split_amp_phase(input);
      for (std::size_t t = 0; t < x.rows; ++t) {
        for (std::size_t c = 0; c < x.cols; ++c) {
          double acc = 0.0;
          for (std::size_t j = 0; j < rank; ++j) {
            acc += f.u.at(t, j) * f.v.at(c, j);
          }
          view.amplitude.data[t * x.cols + c] = std::max(0.0, acc);
        }
      }
      return merge_amp_phase(view, input);
    }
  }
  throw ValidationError("unknown pipeline stage kind");
}

}  // namespace

const char* stage_kind_name(StageKind kind) {
  return stage_table().at(kind).name;
}

void PipelineSpec::validate() const {
  for (const PipelineStage& stage : stages) {
    const auto it = stage_table().find(stage.kind);
    if (it == stage_table().end()) {
      throw ValidationError("unknown pipeline stage kind");
    }
    for (const auto& [key, value] : stage.params) {
      if (it->second.keys.count(key) == 0) {
        throw ValidationError(std::string("stage ") + it->second.name +
                              " does not accept parameter \"" + key + "\"");
      }
      if (!std::isfinite(value)) {
        throw ValidationError(std::string("stage ") + it->second.name +
                              " parameter \"" + key + "\" must be finite");
      }
    }
  }
}

PipelineSpec pipeline_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("pipeline JSON parse error: ") +
                          e.what());
  }
  if (!j.is_object() || !j.contains("stages") || !j["stages"].is_array()) {
    throw ValidationError("pipeline JSON must be {\"stages\": [...]}");
  }

  PipelineSpec spec;
  for (const auto& js : j["stages"]) {
    if (!js.is_object() || !js.contains("kind") || !js["kind"].is_string()) {
      throw ValidationError("pipeline stage needs a string \"kind\"");
    }
    const std::string kind_name = js["kind"].get<std::string>();
    PipelineStage stage{};
    bool found = false;
    for (const auto& [kind, info] : stage_table()) {
      if (kind_name == info.name) {
        stage.kind = kind;
        found = true;
        break;
      }
    }
    if (!found) {
      throw ValidationError("unknown pipeline stage kind \"" + kind_name +
                            "\"");
    }
    if (js.contains("params")) {
      if (!js["params"].is_object()) {
        throw ValidationError("pipeline stage params must be an object");
      }
      for (const auto& [key, value] : js["params"].items()) {
        if (!value.is_number()) {
          throw ValidationError("pipeline stage parameter \"" + key +
                                "\" must be a number");
        }
        stage.params[key] = value.get<double>();
      }
    }
    spec.stages.push_back(std::move(stage));
  }
  spec.validate();
  return spec;
}

std::string pipeline_to_json(const PipelineSpec& spec) {
  nlohmann::json stages = nlohmann::json::array();
  for (const PipelineStage& stage : spec.stages) {
    nlohmann::json js;
    js["kind"] = stage_kind_name(stage.kind);
    js["params"] = nlohmann::json::object();
    for (const auto& [key, value] : stage.params) {
      js["params"][key] = value;
    }
    stages.push_back(std::move(js));
  }
  nlohmann::json j;
  j["stages"] = std::move(stages);
  return j.dump(2);
}

CsiTensor run_pipeline(const PipelineSpec& spec, const CsiTensor& input) {
  spec.validate();
  input.validate();
  CsiTensor current = input;
  for (const PipelineStage& stage : spec.stages) {
    current = run_stage(stage, current);
  }
  return current;
}

}  // namespace csisense
