#include "csisense/nn/layers.hpp"

#include <cmath>
#include <string>
#include <utility>

#include "csisense/error.hpp"

namespace csisense::nn {
namespace {

Tensor he_init(std::vector<std::size_t> shape, std::size_t fan_in,
               RandomStream& rng) {
  Tensor t(std::move(shape));
  const double scale = std::sqrt(2.0 / static_cast<double>(fan_in));
  for (std::size_t i = 0; i < t.numel(); ++i) t[i] = scale * rng.gaussian();
  return t;
}

}  // namespace

Linear::Linear(std::size_t in, std::size_t out, RandomStream& rng)
    : w_(Value::leaf(he_init({in, out}, in, rng))),
      b_(Value::leaf(Tensor({1, out}))) {
  if (in == 0 || out == 0) {
    throw ValidationError("linear layer dimensions must be positive");
  }
}

Value Linear::forward(const Value& x) const {
  return add_rowvec(matmul(x, w_), b_);
}

void Linear::append_params(const std::string& prefix,
                           std::vector<Param>& out) {
  out.push_back({prefix + ".w", w_});
  out.push_back({prefix + ".b", b_});
}

void Linear::append_state(const std::string& prefix,
                          std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".w", w_.tensor()});
  out.push_back({prefix + ".b", b_.tensor()});
}

Conv2dLayer::Conv2dLayer(std::size_t in_channels, std::size_t out_channels,
                         std::size_t kernel, std::size_t stride,
                         RandomStream& rng)
    : w_(Value::leaf(he_init({out_channels, in_channels, kernel, kernel},
                             in_channels * kernel * kernel, rng))),
      b_(Value::leaf(Tensor({out_channels}))),
      stride_(stride) {
  if (in_channels == 0 || out_channels == 0) {
    throw ValidationError("conv layer channel counts must be positive");
  }
  if (kernel % 2 == 0 || kernel == 0) {
    throw ValidationError("conv layer kernel must be odd");
  }
  if (stride == 0) {
    throw ValidationError("conv layer stride must be >= 1");
  }
}

Value Conv2dLayer::forward(const Value& x) const {
  return bias_channel_add(conv2d(x, w_, stride_), b_);
}

void Conv2dLayer::append_params(const std::string& prefix,
                                std::vector<Param>& out) {
  out.push_back({prefix + ".w", w_});
  out.push_back({prefix + ".b", b_});
}

void Conv2dLayer::append_state(const std::string& prefix,
                               std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".w", w_.tensor()});
  out.push_back({prefix + ".b", b_.tensor()});
}

BatchNorm1d::BatchNorm1d(std::size_t dim)
    : gamma_(Value::leaf(Tensor({1, dim}))),
      beta_(Value::leaf(Tensor({1, dim}))),
      running_mean_(Tensor({1, dim})),
      running_var_(Tensor({1, dim})) {
  if (dim == 0) {
    throw ValidationError("batch norm dimension must be positive");
  }
  gamma_.tensor().fill(1.0);
  running_var_.fill(1.0);
}

Value BatchNorm1d::forward(const Value& x, bool training) {
  const Tensor& xt = x.tensor();
  if (xt.ndim() != 2 || xt.cols() != dim()) {
    throw ValidationError("batch norm expects a B x " +
                          std::to_string(dim()) + " input");
  }
  const std::size_t batch = xt.rows();
  if (training) {
    if (batch < 2) {
      throw ValidationError("batch norm needs batch size >= 2 in training");
    }
    const double inv_b = 1.0 / static_cast<double>(batch);
    Value mean = mul_scalar(sum_axis0(x), inv_b);
    Value centered = sub(x, broadcast_row(mean, batch));
    Value var = mul_scalar(sum_axis0(square(centered)), inv_b);
    Value inv_std = recip(sqrt_op(add_scalar(var, eps_)));
    Value normed = mul(centered, broadcast_row(inv_std, batch));

    // Fold this batch into the running averages outside the graph; the
    // running variance keeps the unbiased estimate.
    const double bessel =
        static_cast<double>(batch) / static_cast<double>(batch - 1);
    const Tensor& mt = mean.tensor();
    const Tensor& vt = var.tensor();
    for (std::size_t c = 0; c < dim(); ++c) {
      running_mean_[c] =
          (1.0 - momentum_) * running_mean_[c] + momentum_ * mt[c];
      running_var_[c] =
          (1.0 - momentum_) * running_var_[c] + momentum_ * vt[c] * bessel;
    }
    return add_rowvec(mul_rowvec(normed, gamma_), beta_);
  }

  Tensor inv_std({1, dim()});
  for (std::size_t c = 0; c < dim(); ++c) {
    inv_std[c] = 1.0 / std::sqrt(running_var_[c] + eps_);
  }
  Value centered =
      sub(x, broadcast_row(Value::constant(running_mean_.clone()), batch));
  Value normed =
      mul(centered, broadcast_row(Value::constant(std::move(inv_std)), batch));
  return add_rowvec(mul_rowvec(normed, gamma_), beta_);
}

void BatchNorm1d::append_params(const std::string& prefix,
                                std::vector<Param>& out) {
  out.push_back({prefix + ".gamma", gamma_});
  out.push_back({prefix + ".beta", beta_});
}

void BatchNorm1d::append_state(const std::string& prefix,
                               std::vector<NamedTensor>& out) const {
  out.push_back({prefix + ".gamma", gamma_.tensor()});
  out.push_back({prefix + ".beta", beta_.tensor()});
  out.push_back({prefix + ".running_mean", running_mean_});
  out.push_back({prefix + ".running_var", running_var_});
}

EncoderConfig EncoderConfig::standard(std::size_t in_channels,
                                      std::size_t height, std::size_t width) {
  EncoderConfig cfg;
  cfg.in_channels = in_channels;
  cfg.input_height = height;
  cfg.input_width = width;
  cfg.stages = {{32, 27, 7}, {64, 15, 3}, {128, 7, 1}};
  return cfg;
}

EncoderConfig EncoderConfig::reduced(std::size_t in_channels,
                                     std::size_t height, std::size_t width) {
  EncoderConfig cfg;
  cfg.in_channels = in_channels;
  cfg.input_height = height;
  cfg.input_width = width;
  cfg.stages = {{32, 7, 3}, {64, 5, 2}, {128, 3, 1}};
  return cfg;
}

void EncoderConfig::validate() const {
  if (in_channels == 0 || input_height == 0 || input_width == 0) {
    throw ValidationError("encoder input shape must be positive");
  }
  if (stages.empty()) {
    throw ValidationError("encoder needs at least one conv stage");
  }
  std::size_t h = input_height;
  std::size_t w = input_width;
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const ConvStageSpec& s = stages[i];
    if (s.out_channels == 0) {
      throw ValidationError("encoder stage " + std::to_string(i) +
                            " needs positive channels");
    }
    if (s.kernel == 0 || s.kernel % 2 == 0) {
      throw ValidationError("encoder stage " + std::to_string(i) +
                            " needs an odd kernel");
    }
    if (s.stride == 0) {
      throw ValidationError("encoder stage " + std::to_string(i) +
                            " needs stride >= 1");
    }
    h = (h + s.stride - 1) / s.stride;
    w = (w + s.stride - 1) / s.stride;
    if (h == 0 || w == 0) {
      throw ValidationError("encoder stage " + std::to_string(i) +
                            " collapses the input below 1x1");
    }
  }
  if (embedding_dim() != kEmbeddingDim) {
    throw ValidationError("encoder must end in " +
                          std::to_string(kEmbeddingDim) + " channels, got " +
                          std::to_string(embedding_dim()));
  }
}

Encoder::Encoder(EncoderConfig cfg, RandomStream& rng) : cfg_(std::move(cfg)) {
  cfg_.validate();
  std::size_t channels = cfg_.in_channels;
  stages_.reserve(cfg_.stages.size());
  for (const ConvStageSpec& s : cfg_.stages) {
    stages_.emplace_back(channels, s.out_channels, s.kernel, s.stride, rng);
    channels = s.out_channels;
  }
}

Value Encoder::forward(const Value& x) const {
  const Tensor& xt = x.tensor();
  if (xt.ndim() != 4 || xt.dim(1) != cfg_.in_channels ||
      xt.dim(2) != cfg_.input_height || xt.dim(3) != cfg_.input_width) {
    throw ValidationError("encoder input does not match the configured shape");
  }
  Value h = x;
  for (const Conv2dLayer& stage : stages_) {
    h = relu(stage.forward(h));
  }
  return global_avg_pool(h);
}

void Encoder::append_params(const std::string& prefix,
                            std::vector<Param>& out) {
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    stages_[i].append_params(prefix + ".stage" + std::to_string(i), out);
  }
}

void Encoder::append_state(const std::string& prefix,
                           std::vector<NamedTensor>& out) const {
  for (std::size_t i = 0; i < stages_.size(); ++i) {
    stages_[i].append_state(prefix + ".stage" + std::to_string(i), out);
  }
}

Projector::Projector(RandomStream& rng)
    : fc1_(kEmbeddingDim, 512, rng), bn_(512), fc2_(512, kEmbeddingDim, rng) {}

Value Projector::forward(const Value& z, bool training) {
  return fc2_.forward(relu(bn_.forward(fc1_.forward(z), training)));
}

void Projector::append_params(const std::string& prefix,
                              std::vector<Param>& out) {
  fc1_.append_params(prefix + ".fc1", out);
  bn_.append_params(prefix + ".bn", out);
  fc2_.append_params(prefix + ".fc2", out);
}

void Projector::append_state(const std::string& prefix,
                             std::vector<NamedTensor>& out) const {
  fc1_.append_state(prefix + ".fc1", out);
  bn_.append_state(prefix + ".bn", out);
  fc2_.append_state(prefix + ".fc2", out);
}

Predictor::Predictor(RandomStream& rng)
    : fc1_(kEmbeddingDim, 64, rng), fc2_(64, kEmbeddingDim, rng) {}

Value Predictor::forward(const Value& z) const {
  return fc2_.forward(relu(fc1_.forward(z)));
}

void Predictor::append_params(const std::string& prefix,
                              std::vector<Param>& out) {
  fc1_.append_params(prefix + ".fc1", out);
  fc2_.append_params(prefix + ".fc2", out);
}

void Predictor::append_state(const std::string& prefix,
                             std::vector<NamedTensor>& out) const {
  fc1_.append_state(prefix + ".fc1", out);
  fc2_.append_state(prefix + ".fc2", out);
}

}  // namespace csisense::nn
