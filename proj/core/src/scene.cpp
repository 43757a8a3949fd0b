#include "csisense/scene.hpp"

#include <cmath>

#include <json.hpp>

#include "csisense/error.hpp"
#include "csisense/simulate.hpp"

namespace csisense {

void ScattererScene::validate() const {
  if (num_samples < 1) {
    throw ValidationError("scene.num_samples must be >= 1");
  }
  if (!(sample_interval > 0.0) || !std::isfinite(sample_interval)) {
    throw ValidationError("scene.sample_interval must be positive and finite");
  }
  if (carrier_freqs.empty()) {
    throw ValidationError("scene.carrier_freqs must not be empty");
  }
  for (double f : carrier_freqs) {
    if (!(f > 0.0) || !std::isfinite(f)) {
      throw ValidationError("scene.carrier_freqs entries must be positive "
                            "and finite");
    }
  }
  if (!(noise_std >= 0.0) || !std::isfinite(noise_std)) {
    throw ValidationError("scene.noise_std must be >= 0");
  }
  if (!cpe_offsets.empty() && cpe_offsets.size() != num_samples) {
    throw ValidationError("scene.cpe_offsets must have num_samples entries "
                          "when present");
  }
  for (double o : cpe_offsets) {
    if (!std::isfinite(o)) {
      throw ValidationError("scene.cpe_offsets entries must be finite");
    }
  }
  if (scatterers.empty()) {
    throw ValidationError("scene.scatterers must not be empty");
  }
  for (const Scatterer& sc : scatterers) {
    if (!std::isfinite(sc.velocity) || std::abs(sc.velocity) >= kSpeedOfLight) {
      throw ValidationError("scatterer.velocity must satisfy |v| < c");
    }
    if (sc.initial_csi.size() != carrier_freqs.size()) {
      throw ValidationError("scatterer.initial_csi must have one entry per "
                            "subcarrier");
    }
    if (!std::isfinite(sc.amplitude_decay)) {
      throw ValidationError("scatterer.amplitude_decay must be finite");
    }
    bool all_zero = true;
    for (const auto& z : sc.initial_csi) {
      if (!std::isfinite(z.real()) || !std::isfinite(z.imag())) {
        throw ValidationError("scatterer.initial_csi must be finite");
      }
      if (z != std::complex<double>(0.0, 0.0)) all_zero = false;
    }
    if (all_zero) {
      throw ValidationError("scatterer.initial_csi must not be all-zero");
    }
  }
}

namespace {

using nlohmann::json;

double require_number(const json& j, const char* key) {
  if (!j.contains(key) || !j[key].is_number()) {
    throw ValidationError(std::string("scene JSON: missing or non-numeric \"") +
                          key + "\"");
  }
  return j[key].get<double>();
}

std::complex<double> complex_from_json(const json& j, const char* key) {
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number()) {
    return {j[0].get<double>(), j[1].get<double>()};
  }
  throw ValidationError(std::string("scene JSON: \"") + key +
                        "\" entries must be [re, im] pairs");
}

}  // namespace

ScattererScene scene_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("scene JSON parse error: ") + e.what());
  }
  if (!j.is_object()) {
    throw ValidationError("scene JSON must be an object");
  }

  ScattererScene scene;
  if (!j.contains("carrier_freqs") || !j["carrier_freqs"].is_array()) {
    throw ValidationError("scene JSON: missing array \"carrier_freqs\"");
  }
  for (const auto& f : j["carrier_freqs"]) {
    if (!f.is_number()) {
      throw ValidationError("scene JSON: \"carrier_freqs\" must be numeric");
    }
    scene.carrier_freqs.push_back(f.get<double>());
  }
  scene.sample_interval = require_number(j, "sample_interval");
  scene.num_samples = static_cast<std::size_t>(require_number(j, "num_samples"));
  if (j.contains("noise_std")) scene.noise_std = require_number(j, "noise_std");
  if (j.contains("label")) {
    scene.label = static_cast<int>(require_number(j, "label"));
  }
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) {
      throw ValidationError("scene JSON: \"seed\" must be an unsigned integer");
    }
    scene.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("cpe_offsets")) {
    if (!j["cpe_offsets"].is_array()) {
      throw ValidationError("scene JSON: \"cpe_offsets\" must be an array");
    }
    for (const auto& o : j["cpe_offsets"]) {
      if (!o.is_number()) {
        throw ValidationError("scene JSON: \"cpe_offsets\" must be numeric");
      }
      scene.cpe_offsets.push_back(o.get<double>());
    }
  }
  if (!j.contains("scatterers") || !j["scatterers"].is_array()) {
    throw ValidationError("scene JSON: missing array \"scatterers\"");
  }
  for (const auto& js : j["scatterers"]) {
    Scatterer sc;
    sc.velocity = require_number(js, "velocity");
    if (js.contains("amplitude_decay")) {
      sc.amplitude_decay = require_number(js, "amplitude_decay");
    }
    if (!js.contains("initial_csi") || !js["initial_csi"].is_array()) {
      throw ValidationError("scene JSON: scatterer missing array "
                            "\"initial_csi\"");
    }
    for (const auto& z : js["initial_csi"]) {
      sc.initial_csi.push_back(complex_from_json(z, "initial_csi"));
    }
    scene.scatterers.push_back(std::move(sc));
  }
  scene.validate();
  return scene;
}

std::string scene_to_json(const ScattererScene& scene) {
  json j;
  j["carrier_freqs"] = scene.carrier_freqs;
  j["sample_interval"] = scene.sample_interval;
  j["num_samples"] = scene.num_samples;
  j["noise_std"] = scene.noise_std;
  j["label"] = scene.label;
  j["seed"] = scene.seed;
  if (!scene.cpe_offsets.empty()) j["cpe_offsets"] = scene.cpe_offsets;
  j["scatterers"] = json::array();
  for (const Scatterer& sc : scene.scatterers) {
    json js;
    js["velocity"] = sc.velocity;
    js["amplitude_decay"] = sc.amplitude_decay;
    js["initial_csi"] = json::array();
    for (const auto& z : sc.initial_csi) {
      js["initial_csi"].push_back({z.real(), z.imag()});
    }
    j["scatterers"].push_back(std::move(js));
  }
  return j.dump(2);
}

}  // namespace csisense
