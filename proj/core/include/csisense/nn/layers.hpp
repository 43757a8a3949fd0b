#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "csisense/nn/autodiff.hpp"
#include "csisense/random.hpp"

namespace csisense::nn {

inline constexpr std::size_t kEmbeddingDim = 128;

// A trainable leaf with the name it is checkpointed and optimized under.
struct Param {
  std::string name;
  Value value;
};

// A named tensor aliasing module storage; writing through it updates the
// module.  Covers both trainable parameters and running buffers.
struct NamedTensor {
  std::string name;
  Tensor tensor;
};

// Fully connected y = x W + b with He-initialized W (N(0, sqrt(2/fan_in)))
// and zero bias.
class Linear {
 public:
  Linear(std::size_t in, std::size_t out, RandomStream& rng);

  Value forward(const Value& x) const;  // B x in -> B x out
  std::size_t in_dim() const { return w_.tensor().rows(); }
  std::size_t out_dim() const { return w_.tensor().cols(); }

  void append_params(const std::string& prefix, std::vector<Param>& out);
  void append_state(const std::string& prefix,
                    std::vector<NamedTensor>& out) const;

 private:
  Value w_;  // in x out
  Value b_;  // 1 x out
};

// 2-d convolution with channel bias; zero padding kernel/2, He init.
class Conv2dLayer {
 public:
  Conv2dLayer(std::size_t in_channels, std::size_t out_channels,
              std::size_t kernel, std::size_t stride, RandomStream& rng);

  Value forward(const Value& x) const;  // {B,Ci,H,W} -> {B,Co,ceil(H/s),ceil(W/s)}
  std::size_t stride() const { return stride_; }

  void append_params(const std::string& prefix, std::vector<Param>& out);
  void append_state(const std::string& prefix,
                    std::vector<NamedTensor>& out) const;

 private:
  Value w_;  // {Co, Ci, k, k}
  Value b_;  // {Co}
  std::size_t stride_;
};

// 1-d batch normalization over B x D activations.  Training batches are
// normalized with their own per-batch statistics (population variance) and
// fold into running averages; eval batches are normalized with the running
// averages, which enter the graph as constants.
class BatchNorm1d {
 public:
  explicit BatchNorm1d(std::size_t dim);

  Value forward(const Value& x, bool training);
  std::size_t dim() const { return gamma_.tensor().cols(); }

  const Tensor& running_mean() const { return running_mean_; }
  const Tensor& running_var() const { return running_var_; }

  void append_params(const std::string& prefix, std::vector<Param>& out);
  void append_state(const std::string& prefix,
                    std::vector<NamedTensor>& out) const;

 private:
  Value gamma_;  // 1 x D, ones
  Value beta_;   // 1 x D, zeros
  Tensor running_mean_;  // 1 x D
  Tensor running_var_;   // 1 x D, unbiased batch variance average
  double momentum_ = 0.1;
  double eps_ = 1e-5;
};

struct ConvStageSpec {
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 0;
};

// Convolutional encoder plan.  validate() runs the stride arithmetic for the
// configured input shape so bad geometry fails at build, not per batch.
struct EncoderConfig {
  std::size_t in_channels = 1;
  std::size_t input_height = 0;
  std::size_t input_width = 0;
  std::vector<ConvStageSpec> stages;

  // Three stages (32, k27, s7), (64, k15, s3), (128, k7, s1).
  static EncoderConfig standard(std::size_t in_channels, std::size_t height,
                                std::size_t width);
  // Same channel progression with kernels (7, 5, 3) and strides (3, 2, 1),
  // for inputs too small for the standard kernels.
  static EncoderConfig reduced(std::size_t in_channels, std::size_t height,
                               std::size_t width);

  std::size_t embedding_dim() const {
    return stages.empty() ? 0 : stages.back().out_channels;
  }
  void validate() const;
};

// Conv stages with ReLU after each, closed by global average pooling down to
// a B x 128 embedding.
class Encoder {
 public:
  Encoder(EncoderConfig cfg, RandomStream& rng);

  Value forward(const Value& x) const;  // {B,C,H,W} -> B x 128
  const EncoderConfig& config() const { return cfg_; }

  void append_params(const std::string& prefix, std::vector<Param>& out);
  void append_state(const std::string& prefix,
                    std::vector<NamedTensor>& out) const;

 private:
  EncoderConfig cfg_;
  std::vector<Conv2dLayer> stages_;
};

// Projection head g: 128 -> 512 linear, batch norm, ReLU, 512 -> 128 linear.
class Projector {
 public:
  explicit Projector(RandomStream& rng);

  Value forward(const Value& z, bool training);

  void append_params(const std::string& prefix, std::vector<Param>& out);
  void append_state(const std::string& prefix,
                    std::vector<NamedTensor>& out) const;

 private:
  Linear fc1_;
  BatchNorm1d bn_;
  Linear fc2_;
};

// Prediction head h: 128 -> 64 linear, ReLU, 64 -> 128 linear.
class Predictor {
 public:
  explicit Predictor(RandomStream& rng);

  Value forward(const Value& z) const;

  void append_params(const std::string& prefix, std::vector<Param>& out);
  void append_state(const std::string& prefix,
                    std::vector<NamedTensor>& out) const;

 private:
  Linear fc1_;
  Linear fc2_;
};

}  // namespace csisense::nn
