#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <vector>

namespace csisense::nn {

// Dense n-d array over a shared buffer.  Copies are shallow (they alias the
// same storage); clone() makes them deep.  Forward values are written once
// at node creation, so aliasing is only ever observable where it is wanted:
// a detached view shares its source's storage by design.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t ndim() const { return shape_.size(); }
  std::size_t dim(std::size_t i) const { return shape_[i]; }
  std::size_t numel() const;

  double* data() { return buf_->data(); }
  const double* data() const { return buf_->data(); }
  double& operator[](std::size_t i) { return (*buf_)[i]; }
  double operator[](std::size_t i) const { return (*buf_)[i]; }

  // 2-d accessors (valid when ndim() == 2).
  std::size_t rows() const { return shape_[0]; }
  std::size_t cols() const { return shape_[1]; }
  double& at(std::size_t r, std::size_t c) { return (*buf_)[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const {
    return (*buf_)[r * cols() + c];
  }

  Tensor clone() const;
  void fill(double v);
  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

 private:
  std::vector<std::size_t> shape_;
  std::shared_ptr<std::vector<double>> buf_;
};

struct Node;
using NodePtr = std::shared_ptr<Node>;

// One vertex of the computation graph: a value, its gradient accumulator,
// and the closure that pushes the gradient to the parents.
struct Node {
  Tensor value;
  Tensor grad;  // allocated on first use; always shaped like value
  std::vector<NodePtr> parents;
  std::function<void(Node&)> backward_fn;  // empty on leaves/constants
  bool requires_grad = false;
  bool backward_ran = false;  // set on the root by backward()

  Tensor& grad_buf();  // lazily zero-initialized, shaped like value
};

// Handle to a graph node.  Ops build new nodes; backward() walks the graph.
class Value {
 public:
  Value() = default;
  explicit Value(NodePtr node) : node_(std::move(node)) {}

  static Value leaf(Tensor t, bool requires_grad = true);
  static Value constant(Tensor t);

  bool defined() const { return node_ != nullptr; }
  const Tensor& tensor() const { return node_->value; }
  Tensor& tensor() { return node_->value; }
  const Tensor& grad() const { return node_->grad; }
  bool requires_grad() const { return node_->requires_grad; }
  const NodePtr& node() const { return node_; }

  // Stop-gradient view: shares this value's storage, carries no history.
  Value detach() const;

 private:
  NodePtr node_;
};

// Reverse-mode sweep from a scalar root: visits each node exactly once in
// reverse topological order.  Throws ValidationError on a non-scalar root
// or a second backward through the same root without reset_graph().
void backward(const Value& root);

// Clears every gradient reachable from root and re-arms backward().
void reset_graph(const Value& root);

// ---- elementwise ----
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value neg(const Value& a);
Value add_scalar(const Value& a, double c);
Value mul_scalar(const Value& a, double c);
Value recip(const Value& a);
Value exp_op(const Value& a);
Value log_op(const Value& a);
Value sqrt_op(const Value& a);
Value square(const Value& a);
Value sin_op(const Value& a);
Value cos_op(const Value& a);
Value relu(const Value& a);

// ---- 2-d linear algebra and reductions ----
Value matmul(const Value& a, const Value& b);  // (n x k) * (k x m)
Value transpose(const Value& a);
Value sum_all(const Value& a);                        // -> shape {1}
Value sum_axis0(const Value& a);                      // B x D -> 1 x D
Value sum_axis1(const Value& a);                      // B x D -> B x 1
Value broadcast_row(const Value& r, std::size_t b);   // 1 x D -> B x D
Value add_rowvec(const Value& a, const Value& r);     // B x D + 1 x D
Value mul_rowvec(const Value& a, const Value& r);     // B x D * 1 x D

// Row-wise x / ||x||; zero-norm rows map to zero rows with zero gradient,
// and their indices are appended to zero_rows when given.
Value rows_l2_normalize(const Value& a,
                        std::vector<std::size_t>* zero_rows = nullptr);

// ---- convolutional stack ----
// x: {B, C, H, W}; w: {Co, C, k, k}; zero padding k/2 on both axes, so the
// output is {B, Co, ceil(H/stride), ceil(W/stride)}.
Value conv2d(const Value& x, const Value& w, std::size_t stride);
Value bias_channel_add(const Value& x, const Value& bias);  // bias: {Co}
Value global_avg_pool(const Value& x);  // {B, C, H, W} -> {B, C}

// Fused stable softmax + mean negative log-likelihood over the batch.
Value softmax_cross_entropy(const Value& logits,
                            const std::vector<std::size_t>& labels);

}  // namespace csisense::nn
