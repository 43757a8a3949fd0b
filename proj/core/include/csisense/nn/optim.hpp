#pragma once

#include <cstddef>
#include <vector>

#include "csisense/nn/layers.hpp"

namespace csisense::nn {

struct AdamConfig {
  double learning_rate = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;  // decoupled: theta -= weight_decay * theta

  void validate() const;
};

// Adam with decoupled weight decay over a fixed parameter list.  One step
// counter is shared by all parameters; a parameter with no gradient this
// step sees a zero gradient (decay still applies).  A non-finite gradient
// anywhere refuses the whole step and leaves parameters, moments, and the
// step counter untouched.
class Adam {
 public:
  Adam(std::vector<Param> params, AdamConfig config);

  // Returns true when the step was applied, false when refused.
  bool step();
  void zero_grad();

  std::size_t step_count() const { return step_count_; }
  std::size_t refused_steps() const { return refused_steps_; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<Param> params_;
  std::vector<Tensor> m_;
  std::vector<Tensor> v_;
  AdamConfig config_;
  std::size_t step_count_ = 0;
  std::size_t refused_steps_ = 0;
};

}  // namespace csisense::nn
