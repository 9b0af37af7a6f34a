// Reverse-mode automatic differentiation over dense 1-D/2-D double arrays,
// plus the optimizer pieces the training loop needs (Adam, gradient
// clipping, plateau scheduler, finite-difference gradient checking).
//
// Design: dynamic tape. Every operation allocates a fresh node holding its
// value, the producing op kind, parent links, and a backward closure that
// accumulates into the parents' gradients. backward() walks the graph in
// reverse topological order, visiting each node exactly once.
#ifndef BCF_TENSOR_HPP
#define BCF_TENSOR_HPP

#include <cstddef>
#include <functional>
#include <limits>
#include <memory>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "bcf/common.hpp"

namespace bcf {

enum class OpKind {
  leaf,
  matmul,
  add,
  sub,
  mul_elementwise,
  div_elementwise,
  scalar_mul,
  sigmoid,
  tanh_fn,
  relu,
  softplus,
  log_fn,
  sqrt_fn,
  tent,
  concat_cols,
  slice_cols,
  mean_all,
  sum_all,
  mean_rows,
  transpose,
  row_select,
};

inline const char* op_name(OpKind k) {
  switch (k) {
    case OpKind::leaf: return "leaf";
    case OpKind::matmul: return "matmul";
    case OpKind::add: return "add";
    case OpKind::sub: return "sub";
    case OpKind::mul_elementwise: return "mul_elementwise";
    case OpKind::div_elementwise: return "div_elementwise";
    case OpKind::scalar_mul: return "scalar_mul";
    case OpKind::sigmoid: return "sigmoid";
    case OpKind::tanh_fn: return "tanh";
    case OpKind::relu: return "relu";
    case OpKind::softplus: return "softplus";
    case OpKind::log_fn: return "log";
    case OpKind::sqrt_fn: return "sqrt";
    case OpKind::tent: return "tent";
    case OpKind::concat_cols: return "concat_cols";
    case OpKind::slice_cols: return "slice_cols";
    case OpKind::mean_all: return "mean_all";
    case OpKind::sum_all: return "sum_all";
    case OpKind::mean_rows: return "mean_rows";
    case OpKind::transpose: return "transpose";
    case OpKind::row_select: return "row_select";
  }
  return "?";
}

namespace detail {

struct TensorNode {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> values;
  std::vector<double> grad;  // sized lazily by ensure_grad()
  bool requires_grad = false;
  OpKind op = OpKind::leaf;
  std::vector<std::shared_ptr<TensorNode>> parents;
  // Reads this node's grad and accumulates into the parents' grads.
  std::function<void(const TensorNode&)> backprop;

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), 0.0);
  }
};

}  // namespace detail

/// Value-semantic handle to a node in the computation graph.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::size_t rows, std::size_t cols, bool requires_grad = false) {
    return filled(rows, cols, 0.0, requires_grad);
  }

  static Tensor filled(std::size_t rows, std::size_t cols, double value,
                       bool requires_grad = false) {
    auto n = std::make_shared<detail::TensorNode>();
    n->rows = rows;
    n->cols = cols;
    n->values.assign(rows * cols, value);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor from_values(std::size_t rows, std::size_t cols,
                            std::vector<double> values, bool requires_grad = false) {
    if (values.size() != rows * cols)
      throw config_error("Tensor::from_values: size does not match shape");
    auto n = std::make_shared<detail::TensorNode>();
    n->rows = rows;
    n->cols = cols;
    n->values = std::move(values);
    n->requires_grad = requires_grad;
    return Tensor(std::move(n));
  }

  static Tensor from_array(const Array2D& a, bool requires_grad = false) {
    return from_values(a.rows, a.cols, a.data, requires_grad);
  }

  static Tensor scalar(double v, bool requires_grad = false) {
    return from_values(1, 1, {v}, requires_grad);
  }

  bool valid() const { return static_cast<bool>(n_); }
  std::size_t rows() const { return n_->rows; }
  std::size_t cols() const { return n_->cols; }
  std::size_t size() const { return n_->values.size(); }
  bool requires_grad() const { return n_->requires_grad; }
  OpKind op() const { return n_->op; }

  std::vector<double>& values() { return n_->values; }
  const std::vector<double>& values() const { return n_->values; }
  double at(std::size_t r, std::size_t c) const { return n_->values[r * n_->cols + c]; }

  std::vector<double>& grad() {
    n_->ensure_grad();
    return n_->grad;
  }
  bool grad_allocated() const { return n_->grad.size() == n_->values.size(); }
  void zero_grad() {
    if (grad_allocated()) std::fill(n_->grad.begin(), n_->grad.end(), 0.0);
  }

  /// Value of a 1x1 tensor.
  double item() const {
    if (size() != 1) throw usage_error("item(): tensor is not scalar");
    return n_->values[0];
  }

  Array2D to_array() const {
    Array2D a(rows(), cols());
    a.data = n_->values;
    return a;
  }

  detail::TensorNode* node() const { return n_.get(); }
  const std::shared_ptr<detail::TensorNode>& shared_node() const { return n_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> n) : n_(std::move(n)) {}
  std::shared_ptr<detail::TensorNode> n_;

  friend Tensor make_op_result(OpKind, std::size_t, std::size_t,
                               std::vector<double>,
                               std::vector<Tensor>,
                               std::function<void(const detail::TensorNode&)>);
};

// ---------------------------------------------------------------------------
// Op construction helpers

/// Builds a result node, wires parents, and enforces the finite-values
/// invariant (NaN/Inf after a forward op is an error, never a silent state).
inline Tensor make_op_result(OpKind kind, std::size_t rows, std::size_t cols,
                             std::vector<double> values,
                             std::vector<Tensor> parents,
                             std::function<void(const detail::TensorNode&)> backprop) {
  for (double v : values) {
    if (!std::isfinite(v))
      throw numeric_error(std::string("non-finite output in op '") + op_name(kind) + "'");
  }
  auto n = std::make_shared<detail::TensorNode>();
  n->rows = rows;
  n->cols = cols;
  n->values = std::move(values);
  n->op = kind;
  bool rg = false;
  for (const auto& p : parents) rg = rg || p.requires_grad();
  n->requires_grad = rg;
  if (rg) {
    n->parents.reserve(parents.size());
    for (auto& p : parents) n->parents.push_back(p.shared_node());
    n->backprop = std::move(backprop);
  }
  struct Access : Tensor {
    explicit Access(std::shared_ptr<detail::TensorNode> p) : Tensor(std::move(p)) {}
  };
  return Access(std::move(n));
}

namespace detail {

// Broadcast index for binary elementwise ops: an operand with extent 1 along
// a dimension is replicated along it.
inline std::size_t bcast_index(const TensorNode& t, std::size_t i, std::size_t j) {
  const std::size_t r = (t.rows == 1) ? 0 : i;
  const std::size_t c = (t.cols == 1) ? 0 : j;
  return r * t.cols + c;
}

inline void check_broadcastable(const Tensor& a, const Tensor& b, const char* op) {
  const bool rows_ok = a.rows() == b.rows() || a.rows() == 1 || b.rows() == 1;
  const bool cols_ok = a.cols() == b.cols() || a.cols() == 1 || b.cols() == 1;
  if (!rows_ok || !cols_ok)
    throw config_error(std::string(op) + ": shapes " + std::to_string(a.rows()) + "x" +
                       std::to_string(a.cols()) + " and " + std::to_string(b.rows()) + "x" +
                       std::to_string(b.cols()) + " are not broadcastable");
}

template <typename Fwd, typename DLhs, typename DRhs>
Tensor binary_broadcast(OpKind kind, const Tensor& a, const Tensor& b, Fwd f,
                        DLhs df_da, DRhs df_db) {
  check_broadcastable(a, b, op_name(kind));
  const std::size_t rows = std::max(a.rows(), b.rows());
  const std::size_t cols = std::max(a.cols(), b.cols());
  std::vector<double> out(rows * cols);
  const auto* an = a.node();
  const auto* bn = b.node();
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      out[i * cols + j] = f(an->values[bcast_index(*an, i, j)],
                            bn->values[bcast_index(*bn, i, j)]);
  auto backprop = [rows, cols, df_da, df_db](const TensorNode& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) pa.ensure_grad();
    if (pb.requires_grad) pb.ensure_grad();
    for (std::size_t i = 0; i < rows; ++i) {
      for (std::size_t j = 0; j < cols; ++j) {
        const double g = self.grad[i * cols + j];
        const std::size_t ia = bcast_index(pa, i, j);
        const std::size_t ib = bcast_index(pb, i, j);
        const double av = pa.values[ia];
        const double bv = pb.values[ib];
        if (pa.requires_grad) pa.grad[ia] += g * df_da(av, bv);
        if (pb.requires_grad) pb.grad[ib] += g * df_db(av, bv);
      }
    }
  };
  return make_op_result(kind, rows, cols, std::move(out), {a, b}, backprop);
}

template <typename Fwd, typename Deriv>
Tensor unary_elementwise(OpKind kind, const Tensor& x, Fwd f, Deriv dfdx) {
  std::vector<double> out(x.size());
  const auto& xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(xv[i]);
  auto backprop = [dfdx](const TensorNode& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.values.size(); ++i)
      p.grad[i] += self.grad[i] * dfdx(p.values[i], self.values[i]);
  };
  return make_op_result(kind, x.rows(), x.cols(), std::move(out), {x}, backprop);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Primitives

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows())
    throw config_error("matmul: inner dimensions mismatch (" + std::to_string(a.rows()) +
                       "x" + std::to_string(a.cols()) + " * " + std::to_string(b.rows()) +
                       "x" + std::to_string(b.cols()) + ")");
  const std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  std::vector<double> out(m * n, 0.0);
  {
    const double* A = a.values().data();
    const double* B = b.values().data();
    double* C = out.data();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t kk = 0; kk < k; ++kk) {
        const double aik = A[i * k + kk];
        const double* Brow = B + kk * n;
        double* Crow = C + i * n;
        for (std::size_t j = 0; j < n; ++j) Crow[j] += aik * Brow[j];
      }
  }
  auto backprop = [m, k, n](const detail::TensorNode& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    const double* G = self.grad.data();
    if (pa.requires_grad) {
      pa.ensure_grad();
      // dA = G * B^T
      const double* B = pb.values.data();
      double* dA = pa.grad.data();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t kk = 0; kk < k; ++kk) {
          const double* Grow = G + i * n;
          const double* Brow = B + kk * n;
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += Grow[j] * Brow[j];
          dA[i * k + kk] += acc;
        }
    }
    if (pb.requires_grad) {
      pb.ensure_grad();
      // dB = A^T * G
      const double* A = pa.values.data();
      double* dB = pb.grad.data();
      for (std::size_t kk = 0; kk < k; ++kk)
        for (std::size_t i = 0; i < m; ++i) {
          const double aik = A[i * k + kk];
          const double* Grow = G + i * n;
          double* dBrow = dB + kk * n;
          for (std::size_t j = 0; j < n; ++j) dBrow[j] += aik * Grow[j];
        }
    }
  };
  return make_op_result(OpKind::matmul, m, n, std::move(out), {a, b}, backprop);
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary_broadcast(
      OpKind::add, a, b, [](double x, double y) { return x + y; },
      [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary_broadcast(
      OpKind::sub, a, b, [](double x, double y) { return x - y; },
      [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary_broadcast(
      OpKind::mul_elementwise, a, b, [](double x, double y) { return x * y; },
      [](double, double y) { return y; }, [](double x, double) { return x; });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
  return detail::binary_broadcast(
      OpKind::div_elementwise, a, b, [](double x, double y) { return x / y; },
      [](double, double y) { return 1.0 / y; },
      [](double x, double y) { return -x / (y * y); });
}

inline Tensor scalar_mul(const Tensor& x, double c) {
  std::vector<double> out(x.size());
  const auto& xv = x.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * c;
  auto backprop = [c](const detail::TensorNode& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < self.values.size(); ++i) p.grad[i] += self.grad[i] * c;
  };
  return make_op_result(OpKind::scalar_mul, x.rows(), x.cols(), std::move(out), {x}, backprop);
}

inline double sigmoid_value(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

/// Numerically stable ln(1 + e^x).
inline double softplus_value(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

inline Tensor sigmoid(const Tensor& x) {
  return detail::unary_elementwise(
      OpKind::sigmoid, x, [](double v) { return sigmoid_value(v); },
      [](double, double y) { return y * (1.0 - y); });
}

inline Tensor tanh(const Tensor& x) {
  return detail::unary_elementwise(
      OpKind::tanh_fn, x, [](double v) { return std::tanh(v); },
      [](double, double y) { return 1.0 - y * y; });
}

// Subgradient 0 at the kink.
inline Tensor relu(const Tensor& x) {
  return detail::unary_elementwise(
      OpKind::relu, x, [](double v) { return v > 0.0 ? v : 0.0; },
      [](double v, double) { return v > 0.0 ? 1.0 : 0.0; });
}

inline Tensor softplus(const Tensor& x) {
  return detail::unary_elementwise(
      OpKind::softplus, x, [](double v) { return softplus_value(v); },
      [](double v, double) { return sigmoid_value(v); });
}

inline Tensor log(const Tensor& x) {
  return detail::unary_elementwise(
      OpKind::log_fn, x, [](double v) { return std::log(v); },
      [](double v, double) { return 1.0 / v; });
}

inline Tensor sqrt(const Tensor& x) {
  return detail::unary_elementwise(
      OpKind::sqrt_fn, x, [](double v) { return std::sqrt(v); },
      [](double, double y) { return 0.5 / y; });
}

/// Tent map at slope 2: 2x for x < 0.5, 2(1-x) for x >= 0.5.
/// Subgradient at the kink is taken from the left branch (+2).
inline Tensor tent(const Tensor& x) {
  return detail::unary_elementwise(
      OpKind::tent, x,
      [](double v) { return v < 0.5 ? 2.0 * v : 2.0 * (1.0 - v); },
      [](double v, double) { return v <= 0.5 ? 2.0 : -2.0; });
}

inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.rows() != b.rows()) throw config_error("concat_cols: row counts differ");
  const std::size_t r = a.rows(), ca = a.cols(), cb = b.cols();
  std::vector<double> out(r * (ca + cb));
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < ca; ++j) out[i * (ca + cb) + j] = a.values()[i * ca + j];
    for (std::size_t j = 0; j < cb; ++j) out[i * (ca + cb) + ca + j] = b.values()[i * cb + j];
  }
  auto backprop = [r, ca, cb](const detail::TensorNode& self) {
    auto& pa = *self.parents[0];
    auto& pb = *self.parents[1];
    if (pa.requires_grad) pa.ensure_grad();
    if (pb.requires_grad) pb.ensure_grad();
    for (std::size_t i = 0; i < r; ++i) {
      if (pa.requires_grad)
        for (std::size_t j = 0; j < ca; ++j)
          pa.grad[i * ca + j] += self.grad[i * (ca + cb) + j];
      if (pb.requires_grad)
        for (std::size_t j = 0; j < cb; ++j)
          pb.grad[i * cb + j] += self.grad[i * (ca + cb) + ca + j];
    }
  };
  return make_op_result(OpKind::concat_cols, r, ca + cb, std::move(out), {a, b}, backprop);
}

/// Columns [begin, end) of x.
inline Tensor slice_cols(const Tensor& x, std::size_t begin, std::size_t end) {
  if (begin >= end || end > x.cols()) throw config_error("slice_cols: bad range");
  const std::size_t r = x.rows(), c = x.cols(), w = end - begin;
  std::vector<double> out(r * w);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < w; ++j) out[i * w + j] = x.values()[i * c + begin + j];
  auto backprop = [r, c, w, begin](const detail::TensorNode& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < w; ++j)
        p.grad[i * c + begin + j] += self.grad[i * w + j];
  };
  return make_op_result(OpKind::slice_cols, r, w, std::move(out), {x}, backprop);
}

inline Tensor mean_all(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  const double n = static_cast<double>(x.size());
  auto backprop = [n](const detail::TensorNode& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    const double g = self.grad[0] / n;
    for (double& gv : p.grad) gv += g;
  };
  return make_op_result(OpKind::mean_all, 1, 1, {s / n}, {x}, backprop);
}

inline Tensor sum_all(const Tensor& x) {
  double s = 0.0;
  for (double v : x.values()) s += v;
  auto backprop = [](const detail::TensorNode& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    const double g = self.grad[0];
    for (double& gv : p.grad) gv += g;
  };
  return make_op_result(OpKind::sum_all, 1, 1, {s}, {x}, backprop);
}

/// Column means over rows: RxC -> 1xC.
inline Tensor mean_rows(const Tensor& x) {
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(c, 0.0);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j] += x.values()[i * c + j];
  for (std::size_t j = 0; j < c; ++j) out[j] /= static_cast<double>(r);
  auto backprop = [r, c](const detail::TensorNode& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j)
        p.grad[i * c + j] += self.grad[j] / static_cast<double>(r);
  };
  return make_op_result(OpKind::mean_rows, 1, c, std::move(out), {x}, backprop);
}

inline Tensor transpose(const Tensor& x) {
  const std::size_t r = x.rows(), c = x.cols();
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = x.values()[i * c + j];
  auto backprop = [r, c](const detail::TensorNode& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j)
        p.grad[i * c + j] += self.grad[j * r + i];
  };
  return make_op_result(OpKind::transpose, c, r, std::move(out), {x}, backprop);
}

inline Tensor row_select(const Tensor& x, std::size_t row) {
  if (row >= x.rows()) throw config_error("row_select: row out of range");
  const std::size_t c = x.cols();
  std::vector<double> out(c);
  for (std::size_t j = 0; j < c; ++j) out[j] = x.values()[row * c + j];
  auto backprop = [row, c](const detail::TensorNode& self) {
    auto& p = *self.parents[0];
    p.ensure_grad();
    for (std::size_t j = 0; j < c; ++j) p.grad[row * c + j] += self.grad[j];
  };
  return make_op_result(OpKind::row_select, 1, c, std::move(out), {x}, backprop);
}

// ---------------------------------------------------------------------------
// Backward pass

/// Backpropagates from a scalar root. Every requires_grad tensor reachable
/// from the root accumulates dRoot/dTensor into its grad buffer (additive
/// across multiple uses and across repeated backward calls).
inline void backward(const Tensor& root) {
  if (root.size() != 1) throw usage_error("backward: root must be a 1x1 scalar");
  if (!root.requires_grad()) return;

  // Reverse postorder over parent edges = topological order with every
  // consumer visited before its producers.
  std::vector<detail::TensorNode*> order;
  std::unordered_set<detail::TensorNode*> visited;
  struct Frame {
    detail::TensorNode* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({root.node(), 0});
  visited.insert(root.node());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      detail::TensorNode* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }

  root.node()->ensure_grad();
  root.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::TensorNode* n = *it;
    if (n->backprop) {
      n->ensure_grad();
      n->backprop(*n);
    }
  }
}

inline void zero_grads(std::vector<Tensor>& params) {
  for (auto& p : params) p.zero_grad();
}

// ---------------------------------------------------------------------------
// Gradient clipping

/// Scales all gradients so the global L2 norm does not exceed max_norm.
/// Returns the pre-clip norm. Missing gradients count as zero.
inline double clip_grad_norm(std::vector<Tensor>& params, double max_norm = 3.0) {
  double sq = 0.0;
  for (auto& p : params) {
    if (!p.grad_allocated()) continue;
    for (double g : p.grad()) sq += g * g;
  }
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double scale = max_norm / norm;
    for (auto& p : params) {
      if (!p.grad_allocated()) continue;
      for (double& g : p.grad()) g *= scale;
    }
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Adam optimizer

struct AdamConfig {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0001;
};

/// Per-parameter moment state. Initialized lazily from the first step() call;
/// shape drift afterwards is an internal error.
struct AdamState {
  AdamConfig cfg;
  long long t = 0;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
};

/// One Adam update with bias correction and decoupled weight decay
/// (an extra lr*wd*param subtraction). Gradients are zeroed afterward.
inline void adam_step(std::vector<Tensor>& params, AdamState& state) {
  if (state.m.empty()) {
    state.m.resize(params.size());
    state.v.resize(params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      state.m[i].assign(params[i].size(), 0.0);
      state.v[i].assign(params[i].size(), 0.0);
    }
  }
  if (state.m.size() != params.size())
    throw error("adam_step: parameter count drifted from optimizer state");
  state.t += 1;
  const double b1 = state.cfg.beta1, b2 = state.cfg.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& p = params[i];
    if (state.m[i].size() != p.size())
      throw error("adam_step: parameter shape drifted from optimizer state");
    auto& vals = p.values();
    auto& g = p.grad();  // allocates zeros if the param was unused
    auto& m = state.m[i];
    auto& v = state.v[i];
    for (std::size_t j = 0; j < vals.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      const double step = state.cfg.lr * mhat / (std::sqrt(vhat) + state.cfg.eps) +
                          state.cfg.lr * state.cfg.weight_decay * vals[j];
      vals[j] -= step;
    }
    std::fill(g.begin(), g.end(), 0.0);
  }
}

// ---------------------------------------------------------------------------
// ReduceLROnPlateau

/// Multiplies lr by `factor` after `patience` consecutive epochs without
/// improvement of the monitored metric. lr never increases and never goes
/// below `floor`.
struct PlateauScheduler {
  double lr;
  double factor = 0.5;
  int patience = 10;
  double floor = 1e-5;

  double best = std::numeric_limits<double>::infinity();
  int wait = 0;

  explicit PlateauScheduler(double initial_lr) : lr(initial_lr) {}
  PlateauScheduler(double initial_lr, double f, int pat, double fl)
      : lr(initial_lr), factor(f), patience(pat), floor(fl) {}

  /// Observes one epoch's metric (lower is better). Returns true if lr was
  /// reduced this call.
  bool observe(double metric) {
    if (metric < best) {
      best = metric;
      wait = 0;
      return false;
    }
    ++wait;
    if (wait >= patience) {
      lr = std::max(floor, lr * factor);
      wait = 0;
      return true;
    }
    return false;
  }
};

// ---------------------------------------------------------------------------
// Finite-difference gradient checking

struct FdCheckOptions {
  double eps = 1e-6;
  /// Cap on checked coordinates per parameter (all if the cap is larger).
  std::size_t max_coords_per_param = std::numeric_limits<std::size_t>::max();
  std::uint64_t sample_seed = 20240901;
  /// Skip coordinates where both slopes fall below this magnitude. Central
  /// differences resolve a slope only down to roundoff(f)/eps, so for deep
  /// graphs coordinates with near-zero influence drown in noise; 0 checks all.
  double grad_floor = 0.0;
};

/// Compares analytic gradients against central finite differences.
/// loss_fn must rebuild its graph from the current parameter values and
/// return a scalar. Returns max over sampled coordinates of
/// |analytic - central| / max(1e-8, |central|).
inline double finite_difference_check(const std::function<Tensor()>& loss_fn,
                                      std::vector<Tensor>& params,
                                      FdCheckOptions opt = {}) {
  zero_grads(params);
  Tensor loss = loss_fn();
  backward(loss);

  std::vector<std::vector<double>> analytic(params.size());
  for (std::size_t i = 0; i < params.size(); ++i)
    analytic[i] = params[i].grad_allocated() ? params[i].grad()
                                             : std::vector<double>(params[i].size(), 0.0);

  RngStream rng(opt.sample_seed);
  double max_rel = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto& vals = params[i].values();
    std::vector<std::size_t> coords;
    if (vals.size() <= opt.max_coords_per_param) {
      coords.resize(vals.size());
      for (std::size_t j = 0; j < vals.size(); ++j) coords[j] = j;
    } else {
      coords = rng.sample_without_replacement(vals.size(), opt.max_coords_per_param);
    }
    for (std::size_t j : coords) {
      const double saved = vals[j];
      vals[j] = saved + opt.eps;
      const double fp = loss_fn().item();
      vals[j] = saved - opt.eps;
      const double fm = loss_fn().item();
      vals[j] = saved;
      const double fd = (fp - fm) / (2.0 * opt.eps);
      if (std::abs(analytic[i][j]) < opt.grad_floor && std::abs(fd) < opt.grad_floor) continue;
      const double rel = std::abs(analytic[i][j] - fd) / std::max(1e-8, std::abs(fd));
      max_rel = std::max(max_rel, rel);
    }
  }
  zero_grads(params);
  return max_rel;
}

}  // namespace bcf

#endif  // BCF_TENSOR_HPP
