#include "estimate/tensor.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <unordered_set>

#include "estimate/error.hpp"

namespace estimate::ad {

namespace {

thread_local bool g_grad_enabled = true;

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMajor>;
using MutMap = Eigen::Map<RowMajor>;

[[noreturn]] void shape_error(const std::string& op, const Shape& a, const Shape& b) {
  throw Error(ErrorCode::ShapeMismatch, op + " " + shape_string(a) + " vs " + shape_string(b));
}

void require_rank(const std::string& op, const Tensor& t, std::size_t rank) {
  if (t.rank() != rank) {
    throw Error(ErrorCode::ShapeMismatch,
                op + " expects rank " + std::to_string(rank) + ", got " + shape_string(t.shape()));
  }
}

bool tracks(const std::shared_ptr<Node>& n) { return n->requires_grad; }

// Flat index maps for a broadcast binary op.
struct Broadcast {
  Shape out;
  std::vector<std::size_t> ia;
  std::vector<std::size_t> ib;
};

Broadcast broadcast(const std::string& op, const Shape& a, const Shape& b) {
  Broadcast r;
  const std::size_t na = shape_size(a);
  const std::size_t nb = shape_size(b);
  if (a == b) {
    r.out = a;
    r.ia.resize(na);
    std::iota(r.ia.begin(), r.ia.end(), 0);
    r.ib = r.ia;
    return r;
  }
  if (nb == 1 || na == 1) {
    r.out = nb == 1 ? a : b;
    const std::size_t n = std::max(na, nb);
    r.ia.resize(n);
    r.ib.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      r.ia[i] = na == 1 ? 0 : i;
      r.ib[i] = nb == 1 ? 0 : i;
    }
    return r;
  }
  if (a.size() != b.size()) shape_error(op, a, b);
  r.out.resize(a.size());
  for (std::size_t d = 0; d < a.size(); ++d) {
    if (a[d] != b[d] && a[d] != 1 && b[d] != 1) shape_error(op, a, b);
    r.out[d] = std::max(a[d], b[d]);
  }
  const std::size_t n = shape_size(r.out);
  r.ia.resize(n);
  r.ib.resize(n);
  const std::size_t rank = r.out.size();
  std::vector<std::size_t> idx(rank, 0);
  for (std::size_t flat = 0; flat < n; ++flat) {
    std::size_t fa = 0, fb = 0;
    for (std::size_t d = 0; d < rank; ++d) {
      fa = fa * a[d] + (a[d] == 1 ? 0 : idx[d]);
      fb = fb * b[d] + (b[d] == 1 ? 0 : idx[d]);
    }
    r.ia[flat] = fa;
    r.ib[flat] = fb;
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < r.out[d]) break;
      idx[d] = 0;
    }
  }
  return r;
}

template <typename F>
Tensor unary(const Tensor& a, F&& f, std::function<double(double x, double y)> dydx) {
  const auto& in = a.data();
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < in.size(); ++i) out[i] = f(in[i]);
  auto pa = a.node();
  return make_result(a.shape(), std::move(out), {a}, [pa, dydx](Node& self) {
    if (!tracks(pa)) return;
    auto& g = pa->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) {
      g[i] += self.grad[i] * dydx(pa->data[i], self.data[i]);
    }
  });
}

std::size_t normalize_axis(const Tensor& a, std::size_t axis, const std::string& op) {
  if (axis >= a.rank()) {
    throw Error(ErrorCode::ShapeMismatch,
                op + ": axis " + std::to_string(axis) + " out of range for " + shape_string(a.shape()));
  }
  return axis;
}

// (outer, extent, inner) decomposition around an axis.
struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_at(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t d = 0; d < axis; ++d) r.outer *= s[d];
  r.extent = s[axis];
  for (std::size_t d = axis + 1; d < s.size(); ++d) r.inner *= s[d];
  return r;
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ')';
  return os.str();
}

// ---- Tensor --------------------------------------------------------------

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_size(shape);
  return from(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from(Shape shape, std::vector<double> values, bool requires_grad) {
  if (values.size() != shape_size(shape)) {
    throw Error(ErrorCode::ShapeMismatch, "tensor data length " + std::to_string(values.size()) +
                                              " does not match shape " + shape_string(shape));
  }
  for (double v : values) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "tensor constructed with non-finite value");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(values);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return node_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) throw Error(ErrorCode::ShapeMismatch, "dim out of range");
  return node_->shape[axis];
}

std::size_t Tensor::size() const { return node_->data.size(); }
std::span<const double> Tensor::data() const { return node_->data; }

std::span<double> Tensor::mutable_data() {
  if (!is_leaf()) throw Error(ErrorCode::InvalidArgument, "only leaf tensors can be mutated");
  return node_->data;
}

double Tensor::item() const {
  if (size() != 1) throw Error(ErrorCode::ShapeMismatch, "item() on tensor of shape " + shape_string(shape()));
  return node_->data[0];
}

double Tensor::at(std::size_t i, std::size_t j) const {
  if (rank() != 2) throw Error(ErrorCode::ShapeMismatch, "at(i, j) needs a rank-2 tensor");
  return node_->data[i * node_->shape[1] + j];
}

bool Tensor::requires_grad() const { return node_->requires_grad; }
bool Tensor::is_leaf() const { return !node_->backward; }
bool Tensor::has_grad() const { return !node_->grad.empty(); }
std::span<const double> Tensor::grad() const { return node_->grad; }
void Tensor::zero_grad() { node_->grad.clear(); }

Tensor Tensor::detach() const {
  auto node = std::make_shared<Node>();
  node->shape = node_->shape;
  node->data = node_->data;
  return Tensor(std::move(node));
}

void Tensor::backward() const {
  if (size() != 1) throw Error(ErrorCode::NonScalarLoss, "backward on shape " + shape_string(shape()));
  if (node_->consumed) throw Error(ErrorCode::GraphConsumed, "backward already ran on this graph");
  if (!node_->requires_grad) return;

  // Iterative post-order DFS gives a topological order (parents first).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
  visited.insert(node_.get());
  while (!stack.empty()) {
    auto& [n, next] = stack.back();
    if (next < n->parents.size()) {
      Node* p = n->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) {
        if (p->consumed) throw Error(ErrorCode::GraphConsumed, "graph shares consumed nodes");
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }

  node_->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward && !n->grad.empty()) n->backward(*n);
  }
  for (Node* n : order) {
    if (n->backward) {
      n->consumed = true;
      n->grad.clear();
      n->grad.shrink_to_fit();
    }
  }
}

Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                   BackwardFn backward) {
  for (double v : data) {
    if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteValue, "op produced a non-finite value");
  }
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  if (g_grad_enabled) {
    const bool any = std::any_of(parents.begin(), parents.end(),
                                 [](const Tensor& p) { return p.requires_grad(); });
    if (any) {
      node->requires_grad = true;
      node->backward = std::move(backward);
      node->parents.reserve(parents.size());
      for (auto& p : parents) node->parents.push_back(p.node());
    }
  }
  return Tensor(std::move(node));
}

bool grad_enabled() noexcept { return g_grad_enabled; }
NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

// ---- elementwise binary --------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b) {
  auto bc = broadcast("add", a.shape(), b.shape());
  std::vector<double> out(bc.ia.size());
  const auto& da = a.data();
  const auto& db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[bc.ia[i]] + db[bc.ib[i]];
  auto pa = a.node(), pb = b.node();
  return make_result(bc.out, std::move(out), {a, b}, [pa, pb, bc](Node& self) {
    if (tracks(pa)) {
      auto& g = pa->grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[bc.ia[i]] += self.grad[i];
    }
    if (tracks(pb)) {
      auto& g = pb->grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[bc.ib[i]] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  auto bc = broadcast("sub", a.shape(), b.shape());
  std::vector<double> out(bc.ia.size());
  const auto& da = a.data();
  const auto& db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[bc.ia[i]] - db[bc.ib[i]];
  auto pa = a.node(), pb = b.node();
  return make_result(bc.out, std::move(out), {a, b}, [pa, pb, bc](Node& self) {
    if (tracks(pa)) {
      auto& g = pa->grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[bc.ia[i]] += self.grad[i];
    }
    if (tracks(pb)) {
      auto& g = pb->grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[bc.ib[i]] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  auto bc = broadcast("mul", a.shape(), b.shape());
  std::vector<double> out(bc.ia.size());
  const auto& da = a.data();
  const auto& db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[bc.ia[i]] * db[bc.ib[i]];
  auto pa = a.node(), pb = b.node();
  return make_result(bc.out, std::move(out), {a, b}, [pa, pb, bc](Node& self) {
    if (tracks(pa)) {
      auto& g = pa->grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[bc.ia[i]] += self.grad[i] * pb->data[bc.ib[i]];
    }
    if (tracks(pb)) {
      auto& g = pb->grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[bc.ib[i]] += self.grad[i] * pa->data[bc.ia[i]];
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  auto bc = broadcast("div", a.shape(), b.shape());
  std::vector<double> out(bc.ia.size());
  const auto& da = a.data();
  const auto& db = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = da[bc.ia[i]] / db[bc.ib[i]];
  auto pa = a.node(), pb = b.node();
  return make_result(bc.out, std::move(out), {a, b}, [pa, pb, bc](Node& self) {
    if (tracks(pa)) {
      auto& g = pa->grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[bc.ia[i]] += self.grad[i] / pb->data[bc.ib[i]];
    }
    if (tracks(pb)) {
      auto& g = pb->grad_buffer();
      for (std::size_t i = 0; i < self.grad.size(); ++i) {
        const double y = pb->data[bc.ib[i]];
        g[bc.ib[i]] -= self.grad[i] * pa->data[bc.ia[i]] / (y * y);
      }
    }
  });
}

// ---- elementwise unary ---------------------------------------------------

Tensor neg(const Tensor& a) {
  return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Tensor scale(const Tensor& a, double factor) {
  return unary(a, [factor](double x) { return x * factor; }, [factor](double, double) { return factor; });
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Tensor tanh(const Tensor& a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Tensor exp(const Tensor& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor relu(const Tensor& a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor leaky_relu(const Tensor& a, double slope) {
  return unary(
      a, [slope](double x) { return x > 0 ? x : slope * x; },
      [slope](double x, double) { return x > 0 ? 1.0 : slope; });
}

Tensor softplus(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); },
      [](double x, double) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      });
}

Tensor sqrt(const Tensor& a) {
  return unary(a, [](double x) { return std::sqrt(x); }, [](double, double y) { return 0.5 / y; });
}

Tensor square(const Tensor& a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor pow(const Tensor& a, double exponent) {
  return unary(
      a, [exponent](double x) { return std::pow(x, exponent); },
      [exponent](double x, double) { return exponent * std::pow(x, exponent - 1.0); });
}

// ---- linear algebra ------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
  require_rank("matmul", a, 2);
  require_rank("matmul", b, 2);
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  if (b.dim(0) != k) shape_error("matmul", a.shape(), b.shape());
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() = ConstMap(a.data().data(), m, k) * ConstMap(b.data().data(), k, n);
  auto pa = a.node(), pb = b.node();
  return make_result({m, n}, std::move(out), {a, b}, [pa, pb, m, k, n](Node& self) {
    ConstMap g(self.grad.data(), m, n);
    if (tracks(pa)) {
      MutMap(pa->grad_buffer().data(), m, k).noalias() += g * ConstMap(pb->data.data(), k, n).transpose();
    }
    if (tracks(pb)) {
      MutMap(pb->grad_buffer().data(), k, n).noalias() += ConstMap(pa->data.data(), m, k).transpose() * g;
    }
  });
}

Tensor transpose(const Tensor& a) {
  require_rank("transpose", a, 2);
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(m * n);
  MutMap(out.data(), n, m) = ConstMap(a.data().data(), m, n).transpose();
  auto pa = a.node();
  return make_result({n, m}, std::move(out), {a}, [pa, m, n](Node& self) {
    if (!tracks(pa)) return;
    MutMap(pa->grad_buffer().data(), m, n) += ConstMap(self.grad.data(), n, m).transpose();
  });
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) shape_error("reshape", a.shape(), shape);
  std::vector<double> out(a.data().begin(), a.data().end());
  auto pa = a.node();
  return make_result(std::move(shape), std::move(out), {a}, [pa](Node& self) {
    if (!tracks(pa)) return;
    auto& g = pa->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

// ---- reductions ----------------------------------------------------------

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  auto pa = a.node();
  return make_result({1}, {s}, {a}, [pa](Node& self) {
    if (!tracks(pa)) return;
    for (auto& g : pa->grad_buffer()) g += self.grad[0];
  });
}

Tensor mean(const Tensor& a) {
  if (a.size() == 0) throw Error(ErrorCode::EmptyBatch, "mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor sum_axis(const Tensor& a, std::size_t axis) {
  require_rank("sum_axis", a, 2);
  normalize_axis(a, axis, "sum_axis");
  const std::size_t m = a.dim(0), n = a.dim(1);
  const auto& d = a.data();
  Shape shape = axis == 0 ? Shape{1, n} : Shape{m, 1};
  std::vector<double> out(axis == 0 ? n : m, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[axis == 0 ? j : i] += d[i * n + j];
  auto pa = a.node();
  return make_result(std::move(shape), std::move(out), {a}, [pa, axis, m, n](Node& self) {
    if (!tracks(pa)) return;
    auto& g = pa->grad_buffer();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) g[i * n + j] += self.grad[axis == 0 ? j : i];
  });
}

// ---- softmax -------------------------------------------------------------

namespace {

Tensor softmax_impl(const Tensor& a, std::span<const double> mask) {
  require_rank("softmax", a, 2);
  const std::size_t m = a.dim(0), n = a.dim(1);
  const bool masked = !mask.empty();
  if (masked && mask.size() != m * n) {
    throw Error(ErrorCode::ShapeMismatch, "softmax mask length does not match " + shape_string(a.shape()));
  }
  std::vector<double> keep(m * n, 1.0);
  if (masked)
    for (std::size_t i = 0; i < m * n; ++i) keep[i] = mask[i] != 0.0 ? 1.0 : 0.0;
  const auto& d = a.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < n; ++j)
      if (keep[i * n + j] != 0.0) mx = std::max(mx, d[i * n + j]);
    if (!std::isfinite(mx)) continue;
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      if (keep[i * n + j] == 0.0) continue;
      out[i * n + j] = std::exp(d[i * n + j] - mx);
      z += out[i * n + j];
    }
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] /= z;
  }
  auto pa = a.node();
  return make_result({m, n}, std::move(out), {a}, [pa, m, n](Node& self) {
    if (!tracks(pa)) return;
    auto& g = pa->grad_buffer();
    for (std::size_t i = 0; i < m; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += self.grad[i * n + j] * self.data[i * n + j];
      for (std::size_t j = 0; j < n; ++j) {
        g[i * n + j] += self.data[i * n + j] * (self.grad[i * n + j] - dot);
      }
    }
  });
}

}  // namespace

Tensor softmax_rows(const Tensor& a) { return softmax_impl(a, {}); }

Tensor masked_softmax_rows(const Tensor& a, std::span<const double> mask) {
  if (mask.empty()) throw Error(ErrorCode::ShapeMismatch, "masked softmax needs a mask");
  return softmax_impl(a, mask);
}

// ---- structural ----------------------------------------------------------

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) throw Error(ErrorCode::ShapeMismatch, "concat of nothing");
  const Shape& first = parts.front().shape();
  normalize_axis(parts.front(), axis, "concat");
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> extents;
  for (const auto& p : parts) {
    if (p.rank() != first.size()) shape_error("concat", first, p.shape());
    for (std::size_t d = 0; d < first.size(); ++d)
      if (d != axis && p.shape()[d] != first[d]) shape_error("concat", first, p.shape());
    extents.push_back(p.shape()[axis]);
    out_shape[axis] += p.shape()[axis];
  }
  const auto split = split_at(out_shape, axis);
  std::vector<double> out(shape_size(out_shape));
  std::size_t offset = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const auto& src = parts[k].data();
    const std::size_t ext = extents[k];
    for (std::size_t o = 0; o < split.outer; ++o) {
      std::copy_n(src.data() + o * ext * split.inner, ext * split.inner,
                  out.data() + (o * split.extent + offset) * split.inner);
    }
    offset += ext;
  }
  std::vector<std::shared_ptr<Node>> nodes;
  for (const auto& p : parts) nodes.push_back(p.node());
  return make_result(out_shape, std::move(out), parts, [nodes, extents, split](Node& self) {
    std::size_t offset = 0;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
      const std::size_t ext = extents[k];
      if (tracks(nodes[k])) {
        auto& g = nodes[k]->grad_buffer();
        for (std::size_t o = 0; o < split.outer; ++o) {
          const double* src = self.grad.data() + (o * split.extent + offset) * split.inner;
          double* dst = g.data() + o * ext * split.inner;
          for (std::size_t i = 0; i < ext * split.inner; ++i) dst[i] += src[i];
        }
      }
      offset += ext;
    }
  });
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t start, std::size_t length) {
  normalize_axis(a, axis, "slice");
  if (start + length > a.shape()[axis]) {
    throw Error(ErrorCode::ShapeMismatch, "slice [" + std::to_string(start) + ", " +
                                              std::to_string(start + length) + ") out of " +
                                              shape_string(a.shape()));
  }
  const auto split = split_at(a.shape(), axis);
  Shape out_shape = a.shape();
  out_shape[axis] = length;
  std::vector<double> out(shape_size(out_shape));
  const auto& src = a.data();
  for (std::size_t o = 0; o < split.outer; ++o) {
    std::copy_n(src.data() + (o * split.extent + start) * split.inner, length * split.inner,
                out.data() + o * length * split.inner);
  }
  auto pa = a.node();
  return make_result(std::move(out_shape), std::move(out), {a}, [pa, split, start, length](Node& self) {
    if (!tracks(pa)) return;
    auto& g = pa->grad_buffer();
    for (std::size_t o = 0; o < split.outer; ++o) {
      const double* src = self.grad.data() + o * length * split.inner;
      double* dst = g.data() + (o * split.extent + start) * split.inner;
      for (std::size_t i = 0; i < length * split.inner; ++i) dst[i] += src[i];
    }
  });
}

Tensor select(const Tensor& a, std::size_t axis, std::size_t index) {
  Tensor s = slice(a, axis, index, 1);
  Shape shape = a.shape();
  shape.erase(shape.begin() + static_cast<std::ptrdiff_t>(axis));
  if (shape.empty()) shape = {1};
  return reshape(s, std::move(shape));
}

Tensor gather_rows(const Tensor& a, std::span<const std::size_t> rows) {
  require_rank("gather_rows", a, 2);
  const std::size_t m = a.dim(0), n = a.dim(1);
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  std::vector<double> out(idx.size() * n);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= m) throw Error(ErrorCode::ShapeMismatch, "gather_rows index out of range");
    std::copy_n(a.data().data() + idx[r] * n, n, out.data() + r * n);
  }
  auto pa = a.node();
  return make_result({idx.size(), n}, std::move(out), {a}, [pa, idx, n](Node& self) {
    if (!tracks(pa)) return;
    auto& g = pa->grad_buffer();
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t j = 0; j < n; ++j) g[idx[r] * n + j] += self.grad[r * n + j];
  });
}

Tensor batched_matvec(const Tensor& w, const Tensor& x, std::size_t rows) {
  require_rank("batched_matvec", w, 2);
  require_rank("batched_matvec", x, 2);
  const std::size_t batch = x.dim(0), cols = x.dim(1);
  if (w.dim(0) != batch || w.dim(1) != rows * cols) shape_error("batched_matvec", w.shape(), x.shape());
  std::vector<double> out(batch * rows);
  const auto& wd = w.data();
  const auto& xd = x.data();
  for (std::size_t b = 0; b < batch; ++b) {
    Eigen::Map<Eigen::VectorXd>(out.data() + b * rows, rows).noalias() =
        ConstMap(wd.data() + b * rows * cols, rows, cols) *
        Eigen::Map<const Eigen::VectorXd>(xd.data() + b * cols, cols);
  }
  auto pw = w.node(), px = x.node();
  return make_result({batch, rows}, std::move(out), {w, x}, [pw, px, batch, rows, cols](Node& self) {
    for (std::size_t b = 0; b < batch; ++b) {
      Eigen::Map<const Eigen::VectorXd> g(self.grad.data() + b * rows, rows);
      if (tracks(pw)) {
        MutMap(pw->grad_buffer().data() + b * rows * cols, rows, cols).noalias() +=
            g * Eigen::Map<const Eigen::VectorXd>(px->data.data() + b * cols, cols).transpose();
      }
      if (tracks(px)) {
        Eigen::Map<Eigen::VectorXd>(px->grad_buffer().data() + b * cols, cols).noalias() +=
            ConstMap(pw->data.data() + b * rows * cols, rows, cols).transpose() * g;
      }
    }
  });
}

Tensor conv1d(const Tensor& x, const Tensor& kernel, const Tensor& bias) {
  require_rank("conv1d", x, 3);
  require_rank("conv1d", kernel, 3);
  const std::size_t batch = x.dim(0), length = x.dim(1), in_ch = x.dim(2);
  const std::size_t out_ch = kernel.dim(0), width = kernel.dim(2);
  if (kernel.dim(1) != in_ch) shape_error("conv1d", x.shape(), kernel.shape());
  if (bias.size() != out_ch) shape_error("conv1d bias", kernel.shape(), bias.shape());
  if (width == 0 || length < width) {
    throw Error(ErrorCode::WindowTooShort, "conv1d window " + std::to_string(length) +
                                               " shorter than kernel " + std::to_string(width));
  }
  const std::size_t out_len = length - width + 1;
  const auto& xd = x.data();
  const auto& kd = kernel.data();
  const auto& bd = bias.data();
  std::vector<double> out(batch * out_len * out_ch);
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t t = 0; t < out_len; ++t)
      for (std::size_t o = 0; o < out_ch; ++o) {
        double acc = bd[o];
        for (std::size_t i = 0; i < in_ch; ++i)
          for (std::size_t k = 0; k < width; ++k)
            acc += kd[(o * in_ch + i) * width + k] * xd[(b * length + t + k) * in_ch + i];
        out[(b * out_len + t) * out_ch + o] = acc;
      }
  auto px = x.node(), pk = kernel.node(), pb = bias.node();
  return make_result(
      {batch, out_len, out_ch}, std::move(out), {x, kernel, bias},
      [px, pk, pb, batch, length, in_ch, out_ch, width, out_len](Node& self) {
        std::vector<double>* gx = tracks(px) ? &px->grad_buffer() : nullptr;
        std::vector<double>* gk = tracks(pk) ? &pk->grad_buffer() : nullptr;
        std::vector<double>* gb = tracks(pb) ? &pb->grad_buffer() : nullptr;
        for (std::size_t b = 0; b < batch; ++b)
          for (std::size_t t = 0; t < out_len; ++t)
            for (std::size_t o = 0; o < out_ch; ++o) {
              const double g = self.grad[(b * out_len + t) * out_ch + o];
              if (gb) (*gb)[o] += g;
              for (std::size_t i = 0; i < in_ch; ++i)
                for (std::size_t k = 0; k < width; ++k) {
                  const std::size_t xi = (b * length + t + k) * in_ch + i;
                  const std::size_t ki = (o * in_ch + i) * width + k;
                  if (gk) (*gk)[ki] += g * px->data[xi];
                  if (gx) (*gx)[xi] += g * pk->data[ki];
                }
            }
      });
}

// ---- grad check ----------------------------------------------------------

GradCheckResult grad_check(const std::function<Tensor()>& fn, std::vector<Tensor> params, double step) {
  for (auto& p : params) p.zero_grad();
  Tensor loss = fn();
  loss.backward();
  std::vector<std::vector<double>> analytic;
  for (auto& p : params) {
    if (p.has_grad()) {
      analytic.emplace_back(p.grad().begin(), p.grad().end());
    } else {
      analytic.emplace_back(p.size(), 0.0);
    }
  }

  GradCheckResult result;
  NoGradGuard guard;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto values = params[pi].mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double original = values[i];
      values[i] = original + step;
      const double up = fn().item();
      values[i] = original - step;
      const double down = fn().item();
      values[i] = original;
      const double numeric = (up - down) / (2.0 * step);
      const double a = analytic[pi][i];
      const double rel = std::abs(a - numeric) / std::max(1.0, std::abs(a));
      ++result.coordinates;
      if (rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = pi;
        result.worst_index = i;
      }
    }
  }
  for (auto& p : params) p.zero_grad();
  return result;
}

}  // namespace estimate::ad
