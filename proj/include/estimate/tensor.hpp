#pragma once

// Dense float64 tensors with a dynamically recorded computation graph and
// reverse-mode differentiation.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace estimate::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node;

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from(Shape shape, std::vector<double> values, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const;

  std::span<const double> data() const;
  // Only leaves may be mutated in place (parameter updates, finite differences).
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i, std::size_t j) const;
  double operator[](std::size_t flat) const { return data()[flat]; }

  bool requires_grad() const;
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  void zero_grad();

  // Accumulates d(this)/d(leaf) into every reachable leaf that requires grad.
  void backward() const;

  // Same values, no history.
  Tensor detach() const;

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;

  friend Tensor make_result(Shape, std::vector<double>, std::vector<Tensor>,
                            std::function<void(Node&)>);
};

using BackwardFn = std::function<void(Node&)>;

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  bool consumed = false;
  std::vector<std::shared_ptr<Node>> parents;
  BackwardFn backward;

  std::vector<double>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
    return grad;
  }
};

// Builds an op result. Records parents and the backward rule only when
// gradient recording is enabled and some parent requires grad. Throws
// NonFiniteValue when the forward values are not all finite.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                   BackwardFn backward);

bool grad_enabled() noexcept;

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// ---- primitives ----------------------------------------------------------

inline constexpr double kLeakySlope = 0.01;

// Elementwise binary ops broadcast numpy-style over equal-rank operands
// (each axis equal or 1); a single-element operand broadcasts to any shape.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double factor);
Tensor add_scalar(const Tensor& a, double value);
Tensor sigmoid(const Tensor& a);
Tensor tanh(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope = kLeakySlope);
Tensor softplus(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor square(const Tensor& a);
Tensor pow(const Tensor& a, double exponent);

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
// Sum over one axis of a rank-2 tensor, keeping the axis with extent 1.
Tensor sum_axis(const Tensor& a, std::size_t axis);

// Row-wise softmax of a rank-2 tensor (max-subtracted).
Tensor softmax_rows(const Tensor& a);
// Row-wise softmax restricted to entries where mask != 0; masked-out entries
// are exactly 0. Rows with an empty mask are all zero.
Tensor masked_softmax_rows(const Tensor& a, std::span<const double> mask);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length);
// Picks one index along an axis and drops that axis.
Tensor select(const Tensor& a, std::size_t axis, std::size_t index);
Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows);

// out[b, :] = reshape(w[b, :], rows x cols) * x[b, :]
// w: (batch, rows*cols), x: (batch, cols) -> (batch, rows)
Tensor batched_matvec(const Tensor& w, const Tensor& x, std::size_t rows);

// Valid (unpadded) stride-1 1-D convolution summed over input channels.
// x: (batch, length, in_ch), kernel: (out_ch, in_ch, width), bias: (out_ch)
// -> (batch, length - width + 1, out_ch)
Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias);

// ---- verification --------------------------------------------------------

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  std::size_t coordinates = 0;
};

// Compares backward() against central differences coordinate-wise for every
// listed leaf. Relative error uses a max(1, |analytic|) denominator.
GradCheckResult grad_check(const std::function<Tensor()>& fn, std::vector<Tensor> params,
                           double step = 1e-5);

}  // namespace estimate::ad
