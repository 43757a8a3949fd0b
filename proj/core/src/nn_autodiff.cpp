#include "csisense/nn/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_set>
#include <utility>

#include <Eigen/Dense>

#include "csisense/error.hpp"

namespace csisense::nn {
namespace {

using MatRM =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapRM = Eigen::Map<MatRM>;
using ConstMapRM = Eigen::Map<const MatRM>;

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

NodePtr make_node(Tensor value, std::vector<NodePtr> parents,
                  std::function<void(Node&)> backward_fn) {
  auto node = std::make_shared<Node>();
  node->value = std::move(value);
  for (const NodePtr& p : parents) {
    node->requires_grad = node->requires_grad || p->requires_grad;
  }
  if (node->requires_grad) {
    node->parents = std::move(parents);
    node->backward_fn = std::move(backward_fn);
  }
  return node;
}

void check_same_shape(const Value& a, const Value& b, const char* op) {
  if (!a.tensor().same_shape(b.tensor())) {
    throw ValidationError(std::string(op) + " needs matching shapes");
  }
}

void check_2d(const Value& a, const char* op) {
  if (a.tensor().ndim() != 2) {
    throw ValidationError(std::string(op) + " needs a 2-d tensor");
  }
}

// Elementwise y = f(x) with dx += g * dfn(index).
template <typename Fwd, typename Bwd>
Value unary_op(const Value& a, Fwd&& f, Bwd&& df) {
  const Tensor& x = a.tensor();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) y[i] = f(x[i]);
  return Value(make_node(std::move(y), {a.node()},
                         [df](Node& self) {
                           Node& p = *self.parents[0];
                           Tensor& dx = p.grad_buf();
                           const Tensor& x = p.value;
                           const Tensor& yv = self.value;
                           for (std::size_t i = 0; i < x.numel(); ++i) {
                             dx[i] += self.grad[i] * df(x[i], yv[i]);
                           }
                         }));
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)),
      buf_(std::make_shared<std::vector<double>>(shape_product(shape_), 0.0)) {
}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : shape_(std::move(shape)),
      buf_(std::make_shared<std::vector<double>>(std::move(values))) {
  if (buf_->size() != shape_product(shape_)) {
    throw ValidationError("Tensor payload does not match its shape");
  }
}

std::size_t Tensor::numel() const { return buf_ ? buf_->size() : 0; }

Tensor Tensor::clone() const {
  Tensor out;
  out.shape_ = shape_;
  out.buf_ = std::make_shared<std::vector<double>>(*buf_);
  return out;
}

void Tensor::fill(double v) {
  if (buf_) std::fill(buf_->begin(), buf_->end(), v);
}

Tensor& Node::grad_buf() {
  if (grad.numel() == 0) grad = Tensor(value.shape());
  return grad;
}

Value Value::leaf(Tensor t, bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->value = std::move(t);
  node->requires_grad = requires_grad;
  return Value(std::move(node));
}

Value Value::constant(Tensor t) { return leaf(std::move(t), false); }

Value Value::detach() const {
  auto node = std::make_shared<Node>();
  node->value = node_->value;  // shares storage, drops history
  node->requires_grad = false;
  return Value(std::move(node));
}

void backward(const Value& root) {
  if (!root.defined()) {
    throw ValidationError("backward needs a defined root");
  }
  if (root.tensor().numel() != 1) {
    throw ValidationError("backward root must be scalar, got " +
                          std::to_string(root.tensor().numel()) + " entries");
  }
  Node* root_node = root.node().get();
  if (root_node->backward_ran) {
    throw ValidationError(
        "backward already ran on this graph; call reset_graph first");
  }
  root_node->backward_ran = true;

  // Iterative post-order over requires-grad nodes.
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, std::size_t>> stack;
  if (root_node->requires_grad) {
    stack.emplace_back(root_node, 0);
    seen.insert(root_node);
  }
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && seen.insert(parent).second) {
        stack.emplace_back(parent, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root_node->grad_buf()[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward_fn && node->grad.numel() != 0) {
      node->backward_fn(*node);
    }
  }
}

void reset_graph(const Value& root) {
  std::vector<Node*> stack = {root.node().get()};
  std::unordered_set<Node*> seen = {root.node().get()};
  while (!stack.empty()) {
    Node* node = stack.back();
    stack.pop_back();
    node->grad = Tensor();
    node->backward_ran = false;
    for (const NodePtr& p : node->parents) {
      if (seen.insert(p.get()).second) stack.push_back(p.get());
    }
  }
}

Value add(const Value& a, const Value& b) {
  check_same_shape(a, b, "add");
  const Tensor& x = a.tensor();
  const Tensor& y = b.tensor();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] + y[i];
  return Value(make_node(std::move(out), {a.node(), b.node()},
                         [](Node& self) {
                           for (int side : {0, 1}) {
                             Node& p = *self.parents[side];
                             if (!p.requires_grad) continue;
                             Tensor& d = p.grad_buf();
                             for (std::size_t i = 0; i < d.numel(); ++i) {
                               d[i] += self.grad[i];
                             }
                           }
                         }));
}

Value sub(const Value& a, const Value& b) {
  check_same_shape(a, b, "sub");
  const Tensor& x = a.tensor();
  const Tensor& y = b.tensor();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] - y[i];
  return Value(make_node(std::move(out), {a.node(), b.node()},
                         [](Node& self) {
                           Node& pa = *self.parents[0];
                           Node& pb = *self.parents[1];
                           if (pa.requires_grad) {
                             Tensor& d = pa.grad_buf();
                             for (std::size_t i = 0; i < d.numel(); ++i) {
                               d[i] += self.grad[i];
                             }
                           }
                           if (pb.requires_grad) {
                             Tensor& d = pb.grad_buf();
                             for (std::size_t i = 0; i < d.numel(); ++i) {
                               d[i] -= self.grad[i];
                             }
                           }
                         }));
}

Value mul(const Value& a, const Value& b) {
  check_same_shape(a, b, "mul");
  const Tensor& x = a.tensor();
  const Tensor& y = b.tensor();
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.numel(); ++i) out[i] = x[i] * y[i];
  return Value(make_node(std::move(out), {a.node(), b.node()},
                         [](Node& self) {
                           Node& pa = *self.parents[0];
                           Node& pb = *self.parents[1];
                           if (pa.requires_grad) {
                             Tensor& d = pa.grad_buf();
                             for (std::size_t i = 0; i < d.numel(); ++i) {
                               d[i] += self.grad[i] * pb.value[i];
                             }
                           }
                           if (pb.requires_grad) {
                             Tensor& d = pb.grad_buf();
                             for (std::size_t i = 0; i < d.numel(); ++i) {
                               d[i] += self.grad[i] * pa.value[i];
                             }
                           }
                         }));
}

Value neg(const Value& a) {
  return unary_op(
      a, [](double x) { return -x; },
      [](double, double) { return -1.0; });
}

Value add_scalar(const Value& a, double c) {
  return unary_op(
      a, [c](double x) { return x + c; },
      [](double, double) { return 1.0; });
}

Value mul_scalar(const Value& a, double c) {
  return unary_op(
      a, [c](double x) { return x * c; },
      [c](double, double) { return c; });
}

Value recip(const Value& a) {
  return unary_op(
      a, [](double x) { return 1.0 / x; },
      [](double, double y) { return -y * y; });
}

Value exp_op(const Value& a) {
  return unary_op(
      a, [](double x) { return std::exp(x); },
      [](double, double y) { return y; });
}

Value log_op(const Value& a) {
  return unary_op(
      a, [](double x) { return std::log(x); },
      [](double x, double) { return 1.0 / x; });
}

Value sqrt_op(const Value& a) {
  return unary_op(
      a, [](double x) { return std::sqrt(x); },
      [](double, double y) { return 0.5 / y; });
}

Value square(const Value& a) {
  return unary_op(
      a, [](double x) { return x * x; },
      [](double x, double) { return 2.0 * x; });
}

Value sin_op(const Value& a) {
  return unary_op(
      a, [](double x) { return std::sin(x); },
      [](double x, double) { return std::cos(x); });
}

Value cos_op(const Value& a) {
  return unary_op(
      a, [](double x) { return std::cos(x); },
      [](double x, double) { return -std::sin(x); });
}

Value relu(const Value& a) {
  return unary_op(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

Value matmul(const Value& a, const Value& b) {
  check_2d(a, "matmul");
  check_2d(b, "matmul");
  const Tensor& x = a.tensor();
  const Tensor& y = b.tensor();
  if (x.cols() != y.rows()) {
    throw ValidationError("matmul inner dimensions disagree: " +
                          std::to_string(x.cols()) + " vs " +
                          std::to_string(y.rows()));
  }
  Tensor out({x.rows(), y.cols()});
  {
    ConstMapRM xm(x.data(), static_cast<Eigen::Index>(x.rows()),
                  static_cast<Eigen::Index>(x.cols()));
    ConstMapRM ym(y.data(), static_cast<Eigen::Index>(y.rows()),
                  static_cast<Eigen::Index>(y.cols()));
    MapRM om(out.data(), xm.rows(), ym.cols());
    om.noalias() = xm * ym;
  }
  return Value(make_node(
      std::move(out), {a.node(), b.node()}, [](Node& self) {
        Node& pa = *self.parents[0];
        Node& pb = *self.parents[1];
        ConstMapRM g(self.grad.data(),
                     static_cast<Eigen::Index>(self.value.rows()),
                     static_cast<Eigen::Index>(self.value.cols()));
        ConstMapRM xm(pa.value.data(),
                      static_cast<Eigen::Index>(pa.value.rows()),
                      static_cast<Eigen::Index>(pa.value.cols()));
        ConstMapRM ym(pb.value.data(),
                      static_cast<Eigen::Index>(pb.value.rows()),
                      static_cast<Eigen::Index>(pb.value.cols()));
        if (pa.requires_grad) {
          MapRM d(pa.grad_buf().data(), xm.rows(), xm.cols());
          d.noalias() += g * ym.transpose();
        }
        if (pb.requires_grad) {
          MapRM d(pb.grad_buf().data(), ym.rows(), ym.cols());
          d.noalias() += xm.transpose() * g;
        }
      }));
}

Value transpose(const Value& a) {
  check_2d(a, "transpose");
  const Tensor& x = a.tensor();
  Tensor out({x.cols(), x.rows()});
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(c, r) = x.at(r, c);
  return Value(make_node(std::move(out), {a.node()},
                         [](Node& self) {
                           Node& p = *self.parents[0];
                           Tensor& d = p.grad_buf();
                           for (std::size_t r = 0; r < d.rows(); ++r)
                             for (std::size_t c = 0; c < d.cols(); ++c)
                               d.at(r, c) += self.grad.at(c, r);
                         }));
}

Value sum_all(const Value& a) {
  const Tensor& x = a.tensor();
  Tensor out({1});
  double acc = 0.0;
  for (std::size_t i = 0; i < x.numel(); ++i) acc += x[i];
  out[0] = acc;
  return Value(make_node(std::move(out), {a.node()},
                         [](Node& self) {
                           Tensor& d = self.parents[0]->grad_buf();
                           const double g = self.grad[0];
                           for (std::size_t i = 0; i < d.numel(); ++i) {
                             d[i] += g;
                           }
                         }));
}

Value sum_axis0(const Value& a) {
  check_2d(a, "sum_axis0");
  const Tensor& x = a.tensor();
  Tensor out({1, x.cols()});
  for (std::size_t r = 0; r < x.rows(); ++r)
    for (std::size_t c = 0; c < x.cols(); ++c) out[c] += x.at(r, c);
  return Value(make_node(std::move(out), {a.node()},
                         [](Node& self) {
                           Tensor& d = self.parents[0]->grad_buf();
                           for (std::size_t r = 0; r < d.rows(); ++r)
                             for (std::size_t c = 0; c < d.cols(); ++c)
                               d.at(r, c) += self.grad[c];
                         }));
}

Value sum_axis1(const Value& a) {
  check_2d(a, "sum_axis1");
  const Tensor& x = a.tensor();
  Tensor out({x.rows(), 1});
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double acc = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) acc += x.at(r, c);
    out[r] = acc;
  }
  return Value(make_node(std::move(out), {a.node()},
                         [](Node& self) {
                           Tensor& d = self.parents[0]->grad_buf();
                           for (std::size_t r = 0; r < d.rows(); ++r)
                             for (std::size_t c = 0; c < d.cols(); ++c)
                               d.at(r, c) += self.grad[r];
                         }));
}

Value broadcast_row(const Value& r, std::size_t b) {
  check_2d(r, "broadcast_row");
  const Tensor& x = r.tensor();
  if (x.rows() != 1) {
    throw ValidationError("broadcast_row needs a 1 x D tensor");
  }
  Tensor out({b, x.cols()});
  for (std::size_t i = 0; i < b; ++i)
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(i, c) = x[c];
  return Value(make_node(std::move(out), {r.node()},
                         [](Node& self) {
                           Tensor& d = self.parents[0]->grad_buf();
                           for (std::size_t i = 0; i < self.grad.rows(); ++i)
                             for (std::size_t c = 0; c < d.cols(); ++c)
                               d[c] += self.grad.at(i, c);
                         }));
}

Value add_rowvec(const Value& a, const Value& r) {
  check_2d(a, "add_rowvec");
  check_2d(r, "add_rowvec");
  const Tensor& x = a.tensor();
  const Tensor& v = r.tensor();
  if (v.rows() != 1 || v.cols() != x.cols()) {
    throw ValidationError("add_rowvec needs a 1 x D row for a B x D tensor");
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t c = 0; c < x.cols(); ++c)
      out.at(i, c) = x.at(i, c) + v[c];
  return Value(make_node(std::move(out), {a.node(), r.node()},
                         [](Node& self) {
                           Node& pa = *self.parents[0];
                           Node& pr = *self.parents[1];
                           if (pa.requires_grad) {
                             Tensor& d = pa.grad_buf();
                             for (std::size_t i = 0; i < d.numel(); ++i) {
                               d[i] += self.grad[i];
                             }
                           }
                           if (pr.requires_grad) {
                             Tensor& d = pr.grad_buf();
                             for (std::size_t i = 0; i < self.grad.rows(); ++i)
                               for (std::size_t c = 0; c < d.cols(); ++c)
                                 d[c] += self.grad.at(i, c);
                           }
                         }));
}

Value mul_rowvec(const Value& a, const Value& r) {
  check_2d(a, "mul_rowvec");
  check_2d(r, "mul_rowvec");
  const Tensor& x = a.tensor();
  const Tensor& v = r.tensor();
  if (v.rows() != 1 || v.cols() != x.cols()) {
    throw ValidationError("mul_rowvec needs a 1 x D row for a B x D tensor");
  }
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t c = 0; c < x.cols(); ++c)
      out.at(i, c) = x.at(i, c) * v[c];
  return Value(make_node(std::move(out), {a.node(), r.node()},
                         [](Node& self) {
                           Node& pa = *self.parents[0];
                           Node& pr = *self.parents[1];
                           if (pa.requires_grad) {
                             Tensor& d = pa.grad_buf();
                             for (std::size_t i = 0; i < d.rows(); ++i)
                               for (std::size_t c = 0; c < d.cols(); ++c)
                                 d.at(i, c) +=
                                     self.grad.at(i, c) * pr.value[c];
                           }
                           if (pr.requires_grad) {
                             Tensor& d = pr.grad_buf();
                             for (std::size_t i = 0; i < self.grad.rows(); ++i)
                               for (std::size_t c = 0; c < d.cols(); ++c)
                                 d[c] += self.grad.at(i, c) *
                                         pa.value.at(i, c);
                           }
                         }));
}

Value rows_l2_normalize(const Value& a, std::vector<std::size_t>* zero_rows) {
  check_2d(a, "rows_l2_normalize");
  const Tensor& x = a.tensor();
  Tensor out(x.shape());
  auto norms = std::make_shared<std::vector<double>>(x.rows(), 0.0);
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double sq = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) sq += x.at(r, c) * x.at(r, c);
    const double n = std::sqrt(sq);
    (*norms)[r] = n;
    if (n == 0.0) {
      if (zero_rows != nullptr) zero_rows->push_back(r);
      continue;  // row stays zero, gradient stays zero
    }
    for (std::size_t c = 0; c < x.cols(); ++c) out.at(r, c) = x.at(r, c) / n;
  }
  return Value(make_node(
      std::move(out), {a.node()}, [norms](Node& self) {
        Tensor& d = self.parents[0]->grad_buf();
        const Tensor& y = self.value;
        for (std::size_t r = 0; r < d.rows(); ++r) {
          const double n = (*norms)[r];
          if (n == 0.0) continue;
          double dot = 0.0;
          for (std::size_t c = 0; c < d.cols(); ++c) {
            dot += self.grad.at(r, c) * y.at(r, c);
          }
          for (std::size_t c = 0; c < d.cols(); ++c) {
            d.at(r, c) += (self.grad.at(r, c) - y.at(r, c) * dot) / n;
          }
        }
      }));
}

namespace {

struct ConvDims {
  std::size_t batch, cin, h, w;
  std::size_t cout, k, stride, pad;
  std::size_t ho, wo;
  std::size_t patch() const { return cin * k * k; }
  std::size_t positions() const { return ho * wo; }
};

ConvDims conv_dims(const Tensor& x, const Tensor& w, std::size_t stride) {
  if (x.ndim() != 4 || w.ndim() != 4) {
    throw ValidationError("conv2d needs 4-d input and weight tensors");
  }
  if (w.dim(2) != w.dim(3) || w.dim(2) % 2 == 0) {
    throw ValidationError("conv2d needs a square odd kernel");
  }
  if (w.dim(1) != x.dim(1)) {
    throw ValidationError("conv2d weight expects " + std::to_string(w.dim(1)) +
                          " input channels, input has " +
                          std::to_string(x.dim(1)));
  }
  if (stride < 1) {
    throw ValidationError("conv2d stride must be >= 1");
  }
  ConvDims d;
  d.batch = x.dim(0);
  d.cin = x.dim(1);
  d.h = x.dim(2);
  d.w = x.dim(3);
  d.cout = w.dim(0);
  d.k = w.dim(2);
  d.stride = stride;
  d.pad = d.k / 2;
  d.ho = (d.h + d.stride - 1) / d.stride;
  d.wo = (d.w + d.stride - 1) / d.stride;
  if (d.ho == 0 || d.wo == 0) {
    throw ValidationError("conv2d output collapsed to zero size");
  }
  return d;
}

// Gather the padded receptive fields of one sample into a patch x position
// column matrix.
void im2col(const double* x, const ConvDims& d, double* col) {
  const std::size_t plane = d.h * d.w;
  for (std::size_t ci = 0; ci < d.cin; ++ci) {
    for (std::size_t r = 0; r < d.k; ++r) {
      for (std::size_t c = 0; c < d.k; ++c) {
        double* row = col + ((ci * d.k + r) * d.k + c) * d.positions();
        for (std::size_t ho = 0; ho < d.ho; ++ho) {
          const std::ptrdiff_t hi =
              static_cast<std::ptrdiff_t>(ho * d.stride + r) -
              static_cast<std::ptrdiff_t>(d.pad);
          const bool h_ok = hi >= 0 && hi < static_cast<std::ptrdiff_t>(d.h);
          for (std::size_t wo = 0; wo < d.wo; ++wo) {
            const std::ptrdiff_t wi =
                static_cast<std::ptrdiff_t>(wo * d.stride + c) -
                static_cast<std::ptrdiff_t>(d.pad);
            const bool ok =
                h_ok && wi >= 0 && wi < static_cast<std::ptrdiff_t>(d.w);
            row[ho * d.wo + wo] =
                ok ? x[ci * plane + static_cast<std::size_t>(hi) * d.w +
                       static_cast<std::size_t>(wi)]
                   : 0.0;
          }
        }
      }
    }
  }
}

// Scatter-add the column-matrix gradient back onto the input plane.
void col2im_add(const double* col, const ConvDims& d, double* dx) {
  const std::size_t plane = d.h * d.w;
  for (std::size_t ci = 0; ci < d.cin; ++ci) {
    for (std::size_t r = 0; r < d.k; ++r) {
      for (std::size_t c = 0; c < d.k; ++c) {
        const double* row = col + ((ci * d.k + r) * d.k + c) * d.positions();
        for (std::size_t ho = 0; ho < d.ho; ++ho) {
          const std::ptrdiff_t hi =
              static_cast<std::ptrdiff_t>(ho * d.stride + r) -
              static_cast<std::ptrdiff_t>(d.pad);
          if (hi < 0 || hi >= static_cast<std::ptrdiff_t>(d.h)) continue;
          for (std::size_t wo = 0; wo < d.wo; ++wo) {
            const std::ptrdiff_t wi =
                static_cast<std::ptrdiff_t>(wo * d.stride + c) -
                static_cast<std::ptrdiff_t>(d.pad);
            if (wi < 0 || wi >= static_cast<std::ptrdiff_t>(d.w)) continue;
            dx[ci * plane + static_cast<std::size_t>(hi) * d.w +
               static_cast<std::size_t>(wi)] += row[ho * d.wo + wo];
          }
        }
      }
    }
  }
}

}  // namespace

Value conv2d(const Value& x, const Value& w, std::size_t stride) {
  const ConvDims d = conv_dims(x.tensor(), w.tensor(), stride);
  const Tensor& xt = x.tensor();
  const Tensor& wt = w.tensor();
  Tensor out({d.batch, d.cout, d.ho, d.wo});

  const auto kk = static_cast<Eigen::Index>(d.patch());
  const auto pp = static_cast<Eigen::Index>(d.positions());
  const auto co = static_cast<Eigen::Index>(d.cout);
  std::vector<double> col(d.patch() * d.positions());
  ConstMapRM wm(wt.data(), co, kk);
  for (std::size_t b = 0; b < d.batch; ++b) {
    im2col(xt.data() + b * d.cin * d.h * d.w, d, col.data());
    ConstMapRM cm(col.data(), kk, pp);
    MapRM om(out.data() + b * d.cout * d.positions(), co, pp);
    om.noalias() = wm * cm;
  }

  return Value(make_node(
      std::move(out), {x.node(), w.node()}, [d](Node& self) {
        Node& px = *self.parents[0];
        Node& pw = *self.parents[1];
        const auto kk = static_cast<Eigen::Index>(d.patch());
        const auto pp = static_cast<Eigen::Index>(d.positions());
        const auto co = static_cast<Eigen::Index>(d.cout);
        std::vector<double> col(d.patch() * d.positions());
        std::vector<double> dcol(d.patch() * d.positions());
        ConstMapRM wm(pw.value.data(), co, kk);
        for (std::size_t b = 0; b < d.batch; ++b) {
          ConstMapRM g(self.grad.data() + b * d.cout * d.positions(), co, pp);
          if (pw.requires_grad) {
            im2col(px.value.data() + b * d.cin * d.h * d.w, d, col.data());
            ConstMapRM cm(col.data(), kk, pp);
            MapRM dw(pw.grad_buf().data(), co, kk);
            dw.noalias() += g * cm.transpose();
          }
          if (px.requires_grad) {
            MapRM dc(dcol.data(), kk, pp);
            dc.noalias() = wm.transpose() * g;
            col2im_add(dcol.data(), d,
                       px.grad_buf().data() + b * d.cin * d.h * d.w);
          }
        }
      }));
}

Value bias_channel_add(const Value& x, const Value& bias) {
  const Tensor& xt = x.tensor();
  const Tensor& bt = bias.tensor();
  if (xt.ndim() != 4 || bt.ndim() != 1 || bt.dim(0) != xt.dim(1)) {
    throw ValidationError(
        "bias_channel_add needs a {B,C,H,W} tensor and a {C} bias");
  }
  const std::size_t plane = xt.dim(2) * xt.dim(3);
  Tensor out(xt.shape());
  for (std::size_t b = 0; b < xt.dim(0); ++b)
    for (std::size_t c = 0; c < xt.dim(1); ++c) {
      const std::size_t base = (b * xt.dim(1) + c) * plane;
      for (std::size_t i = 0; i < plane; ++i) out[base + i] = xt[base + i] + bt[c];
    }
  return Value(make_node(
      std::move(out), {x.node(), bias.node()}, [plane](Node& self) {
        Node& px = *self.parents[0];
        Node& pb = *self.parents[1];
        const std::size_t channels = self.value.dim(1);
        if (px.requires_grad) {
          Tensor& d = px.grad_buf();
          for (std::size_t i = 0; i < d.numel(); ++i) d[i] += self.grad[i];
        }
        if (pb.requires_grad) {
          Tensor& d = pb.grad_buf();
          for (std::size_t b = 0; b < self.value.dim(0); ++b)
            for (std::size_t c = 0; c < channels; ++c) {
              const std::size_t base = (b * channels + c) * plane;
              double acc = 0.0;
              for (std::size_t i = 0; i < plane; ++i) {
                acc += self.grad[base + i];
              }
              d[c] += acc;
            }
        }
      }));
}

Value global_avg_pool(const Value& x) {
  const Tensor& xt = x.tensor();
  if (xt.ndim() != 4) {
    throw ValidationError("global_avg_pool needs a {B,C,H,W} tensor");
  }
  const std::size_t plane = xt.dim(2) * xt.dim(3);
  Tensor out({xt.dim(0), xt.dim(1)});
  for (std::size_t b = 0; b < xt.dim(0); ++b)
    for (std::size_t c = 0; c < xt.dim(1); ++c) {
      const std::size_t base = (b * xt.dim(1) + c) * plane;
      double acc = 0.0;
      for (std::size_t i = 0; i < plane; ++i) acc += xt[base + i];
      out.at(b, c) = acc / static_cast<double>(plane);
    }
  return Value(make_node(
      std::move(out), {x.node()}, [plane](Node& self) {
        Tensor& d = self.parents[0]->grad_buf();
        const std::size_t channels = self.value.cols();
        const double scale = 1.0 / static_cast<double>(plane);
        for (std::size_t b = 0; b < self.value.rows(); ++b)
          for (std::size_t c = 0; c < channels; ++c) {
            const double g = self.grad.at(b, c) * scale;
            const std::size_t base = (b * channels + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) d[base + i] += g;
          }
      }));
}

Value softmax_cross_entropy(const Value& logits,
                            const std::vector<std::size_t>& labels) {
  check_2d(logits, "softmax_cross_entropy");
  const Tensor& x = logits.tensor();
  if (labels.size() != x.rows()) {
    throw ValidationError("softmax_cross_entropy needs one label per row");
  }
  for (std::size_t lab : labels) {
    if (lab >= x.cols()) {
      throw ValidationError("softmax_cross_entropy label out of range");
    }
  }
  auto probs = std::make_shared<Tensor>(x.shape());
  auto labs = std::make_shared<std::vector<std::size_t>>(labels);
  double loss = 0.0;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    double mx = x.at(r, 0);
    for (std::size_t c = 1; c < x.cols(); ++c) mx = std::max(mx, x.at(r, c));
    double denom = 0.0;
    for (std::size_t c = 0; c < x.cols(); ++c) {
      const double e = std::exp(x.at(r, c) - mx);
      probs->at(r, c) = e;
      denom += e;
    }
    for (std::size_t c = 0; c < x.cols(); ++c) probs->at(r, c) /= denom;
    loss -= std::log(probs->at(r, labels[r]));
  }
  Tensor out({1});
  out[0] = loss / static_cast<double>(x.rows());
  return Value(make_node(
      std::move(out), {logits.node()}, [probs, labs](Node& self) {
        Tensor& d = self.parents[0]->grad_buf();
        const double g = self.grad[0] / static_cast<double>(d.rows());
        for (std::size_t r = 0; r < d.rows(); ++r) {
          for (std::size_t c = 0; c < d.cols(); ++c) {
            const double onehot = (*labs)[r] == c ? 1.0 : 0.0;
            d.at(r, c) += g * (probs->at(r, c) - onehot);
          }
        }
      }));
}

}  // namespace csisense::nn
