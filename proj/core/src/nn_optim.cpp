#include "csisense/nn/optim.hpp"

#include <cmath>
#include <utility>

#include "csisense/error.hpp"

namespace csisense::nn {

void AdamConfig::validate() const {
  if (!std::isfinite(learning_rate) || learning_rate <= 0.0) {
    throw ValidationError("adam learning rate must be positive");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ValidationError("adam betas must lie in [0, 1)");
  }
  if (!std::isfinite(epsilon) || epsilon <= 0.0) {
    throw ValidationError("adam epsilon must be positive");
  }
  if (!std::isfinite(weight_decay) || weight_decay < 0.0) {
    throw ValidationError("adam weight decay must be non-negative");
  }
}

Adam::Adam(std::vector<Param> params, AdamConfig config)
    : params_(std::move(params)), config_(config) {
  config_.validate();
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const Param& p : params_) {
    if (!p.value.defined() || !p.value.requires_grad()) {
      throw ValidationError("adam parameter '" + p.name +
                            "' must be a trainable leaf");
    }
    m_.emplace_back(p.value.tensor().shape());
    v_.emplace_back(p.value.tensor().shape());
  }
}

bool Adam::step() {
  // Refuse the whole step if any gradient entry is non-finite, before any
  // parameter has been touched.
  for (const Param& p : params_) {
    const Tensor& g = p.value.grad();
    for (std::size_t i = 0; i < g.numel(); ++i) {
      if (!std::isfinite(g[i])) {
        ++refused_steps_;
        return false;
      }
    }
  }

  ++step_count_;
  const double bc1 = 1.0 - std::pow(config_.beta1,
                                    static_cast<double>(step_count_));
  const double bc2 = 1.0 - std::pow(config_.beta2,
                                    static_cast<double>(step_count_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& theta = params_[k].value.node()->value;
    const Tensor& g = params_[k].value.grad();
    const bool has_grad = g.numel() != 0;
    for (std::size_t i = 0; i < theta.numel(); ++i) {
      const double gi = has_grad ? g[i] : 0.0;
      m_[k][i] = config_.beta1 * m_[k][i] + (1.0 - config_.beta1) * gi;
      v_[k][i] = config_.beta2 * v_[k][i] + (1.0 - config_.beta2) * gi * gi;
      const double m_hat = m_[k][i] / bc1;
      const double v_hat = v_[k][i] / bc2;
      theta[i] -= config_.learning_rate * m_hat / (std::sqrt(v_hat) +
                                                   config_.epsilon) +
                  config_.weight_decay * theta[i];
    }
  }
  return true;
}

void Adam::zero_grad() {
  for (Param& p : params_) {
    p.value.node()->grad = Tensor();
    p.value.node()->backward_ran = false;
  }
}

}  // namespace csisense::nn
