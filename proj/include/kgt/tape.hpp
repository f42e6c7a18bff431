#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "kgt/common.hpp"

namespace kgt {

// Reverse-mode tape over dense Eigen matrices. Graphs are built per step by
// free functions on Var handles; node creation order is a valid topological
// order, so backward is a single reverse sweep. Leaves may alias external
// storage (parameters), which must outlive the tape.
template <typename Scalar>
class Tape {
 public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  struct Node {
    Mat value;
    const Mat* external = nullptr;
    Mat grad;  // empty until touched
    bool needs_grad = false;
    std::function<void(Tape&)> backward;
  };

  int make(Mat value, bool needs_grad) {
    nodes_.push_back({std::move(value), nullptr, {}, needs_grad, {}});
    return static_cast<int>(nodes_.size()) - 1;
  }

  int leaf(const Mat* value, bool needs_grad) {
    nodes_.push_back({{}, value, {}, needs_grad, {}});
    return static_cast<int>(nodes_.size()) - 1;
  }

  void set_backward(int id, std::function<void(Tape&)> f) {
    nodes_[static_cast<std::size_t>(id)].backward = std::move(f);
  }

  const Mat& val(int id) const {
    const Node& n = nodes_[static_cast<std::size_t>(id)];
    return n.external ? *n.external : n.value;
  }

  bool needs_grad(int id) const { return nodes_[static_cast<std::size_t>(id)].needs_grad; }

  // Gradient accumulator, zero-initialized to the value's shape on demand.
  Mat& grad(int id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.grad.size() == 0) n.grad = Mat::Zero(val(id).rows(), val(id).cols());
    return n.grad;
  }

  void backward(int root) {
    if (val(root).rows() != 1 || val(root).cols() != 1)
      throw NumericError("backward: root must be a scalar");
    grad(root)(0, 0) = Scalar(1);
    for (int i = root; i >= 0; --i) {
      Node& n = nodes_[static_cast<std::size_t>(i)];
      if (n.needs_grad && n.grad.size() != 0 && n.backward) n.backward(*this);
    }
  }

  std::size_t size() const { return nodes_.size(); }

 private:
  std::vector<Node> nodes_;
};

template <typename Scalar>
struct Var {
  Tape<Scalar>* tape = nullptr;
  int id = -1;
  const typename Tape<Scalar>::Mat& val() const { return tape->val(id); }
  Eigen::Index rows() const { return val().rows(); }
  Eigen::Index cols() const { return val().cols(); }
};

namespace detail {
inline void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(std::string("tape op shape mismatch: ") + what);
}
}  // namespace detail

template <typename S>
Var<S> constant(Tape<S>& t, typename Tape<S>::Mat value) {
  return {&t, t.make(std::move(value), false)};
}

template <typename S>
Var<S> scalar_constant(Tape<S>& t, S value) {
  typename Tape<S>::Mat m(1, 1);
  m(0, 0) = value;
  return {&t, t.make(std::move(m), false)};
}

// ---- binary ops ------------------------------------------------------------

template <typename S>
Var<S> add(Var<S> a, Var<S> b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "add");
  Tape<S>& t = *a.tape;
  bool ng = t.needs_grad(a.id) || t.needs_grad(b.id);
  int id = t.make(a.val() + b.val(), ng);
  if (ng)
    t.set_backward(id, [ai = a.id, bi = b.id, oi = id](Tape<S>& tp) {
      if (tp.needs_grad(ai)) tp.grad(ai) += tp.grad(oi);
      if (tp.needs_grad(bi)) tp.grad(bi) += tp.grad(oi);
    });
  return {&t, id};
}

template <typename S>
Var<S> sub(Var<S> a, Var<S> b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "sub");
  Tape<S>& t = *a.tape;
  bool ng = t.needs_grad(a.id) || t.needs_grad(b.id);
  int id = t.make(a.val() - b.val(), ng);
  if (ng)
    t.set_backward(id, [ai = a.id, bi = b.id, oi = id](Tape<S>& tp) {
      if (tp.needs_grad(ai)) tp.grad(ai) += tp.grad(oi);
      if (tp.needs_grad(bi)) tp.grad(bi) -= tp.grad(oi);
    });
  return {&t, id};
}

template <typename S>
Var<S> cmul(Var<S> a, Var<S> b) {
  detail::require(a.rows() == b.rows() && a.cols() == b.cols(), "cmul");
  Tape<S>& t = *a.tape;
  bool ng = t.needs_grad(a.id) || t.needs_grad(b.id);
  int id = t.make(a.val().cwiseProduct(b.val()), ng);
  if (ng)
    t.set_backward(id, [ai = a.id, bi = b.id, oi = id](Tape<S>& tp) {
      if (tp.needs_grad(ai)) tp.grad(ai) += tp.grad(oi).cwiseProduct(tp.val(bi));
      if (tp.needs_grad(bi)) tp.grad(bi) += tp.grad(oi).cwiseProduct(tp.val(ai));
    });
  return {&t, id};
}

template <typename S>
Var<S> matmul(Var<S> a, Var<S> b) {
  detail::require(a.cols() == b.rows(), "matmul");
  Tape<S>& t = *a.tape;
  bool ng = t.needs_grad(a.id) || t.needs_grad(b.id);
  int id = t.make(a.val() * b.val(), ng);
  if (ng)
    t.set_backward(id, [ai = a.id, bi = b.id, oi = id](Tape<S>& tp) {
      if (tp.needs_grad(ai)) tp.grad(ai) += tp.grad(oi) * tp.val(bi).transpose();
      if (tp.needs_grad(bi)) tp.grad(bi) += tp.val(ai).transpose() * tp.grad(oi);
    });
  return {&t, id};
}

// ---- unary elementwise -----------------------------------------------------

namespace detail {

template <typename S, typename Fwd, typename Bwd>
Var<S> cwise(Var<S> a, Fwd fwd, Bwd bwd_factor) {
  Tape<S>& t = *a.tape;
  bool ng = t.needs_grad(a.id);
  typename Tape<S>::Mat v = a.val().unaryExpr(fwd);
  int id = t.make(std::move(v), ng);
  if (ng)
    t.set_backward(id, [ai = a.id, oi = id, bwd_factor](Tape<S>& tp) {
      const auto& x = tp.val(ai);
      const auto& y = tp.val(oi);
      tp.grad(ai).array() +=
          tp.grad(oi).array() * x.binaryExpr(y, bwd_factor).array();
    });
  return {&t, id};
}

}  // namespace detail

template <typename S>
Var<S> neg(Var<S> a) {
  return detail::cwise(
      a, [](S x) { return -x; }, [](S, S) { return S(-1); });
}

template <typename S>
Var<S> scale(Var<S> a, S c) {
  return detail::cwise(
      a, [c](S x) { return c * x; }, [c](S, S) { return c; });
}

template <typename S>
Var<S> add_scalar(Var<S> a, S c) {
  return detail::cwise(
      a, [c](S x) { return x + c; }, [](S, S) { return S(1); });
}

template <typename S>
Var<S> sigmoid(Var<S> a) {
  return detail::cwise(
      a,
      [](S x) {
        if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
        S e = std::exp(x);
        return e / (S(1) + e);
      },
      [](S, S y) { return y * (S(1) - y); });
}

template <typename S>
Var<S> tanh_(Var<S> a) {
  return detail::cwise(
      a, [](S x) { return std::tanh(x); }, [](S, S y) { return S(1) - y * y; });
}

template <typename S>
Var<S> relu(Var<S> a) {
  return detail::cwise(
      a, [](S x) { return x > S(0) ? x : S(0); }, [](S x, S) { return x > S(0) ? S(1) : S(0); });
}

template <typename S>
Var<S> exp_(Var<S> a) {
  return detail::cwise(
      a, [](S x) { return std::exp(x); }, [](S, S y) { return y; });
}

template <typename S>
Var<S> log_(Var<S> a) {
  return detail::cwise(
      a, [](S x) { return std::log(x); }, [](S x, S) { return S(1) / x; });
}

// log(max(a, floor)); gradient is zero where the floor binds.
template <typename S>
Var<S> log_floor(Var<S> a, S floor) {
  return detail::cwise(
      a, [floor](S x) { return std::log(x < floor ? floor : x); },
      [floor](S x, S) { return x < floor ? S(0) : S(1) / x; });
}

template <typename S>
Var<S> sqrt_(Var<S> a) {
  return detail::cwise(
      a, [](S x) { return std::sqrt(x); }, [](S, S y) { return S(0.5) / y; });
}

template <typename S>
Var<S> square(Var<S> a) {
  return detail::cwise(
      a, [](S x) { return x * x; }, [](S x, S) { return S(2) * x; });
}

template <typename S>
Var<S> reciprocal(Var<S> a) {
  return detail::cwise(
      a, [](S x) { return S(1) / x; }, [](S, S y) { return -y * y; });
}

// softplus(x) = log(1 + exp(x)), stably; d/dx = sigmoid(x).
template <typename S>
Var<S> softplus(Var<S> a) {
  return detail::cwise(
      a,
      [](S x) {
        S m = x > S(0) ? x : S(0);
        return m + std::log1p(std::exp(-std::abs(x)));
      },
      [](S x, S) {
        if (x >= S(0)) return S(1) / (S(1) + std::exp(-x));
        S e = std::exp(x);
        return e / (S(1) + e);
      });
}

// ---- reductions ------------------------------------------------------------

template <typename S>
Var<S> sum_all(Var<S> a) {
  Tape<S>& t = *a.tape;
  bool ng = t.needs_grad(a.id);
  typename Tape<S>::Mat v(1, 1);
  v(0, 0) = a.val().sum();
  int id = t.make(std::move(v), ng);
  if (ng)
    t.set_backward(id, [ai = a.id, oi = id](Tape<S>& tp) {
      tp.grad(ai).array() += tp.grad(oi)(0, 0);
    });
  return {&t, id};
}

template <typename S>
Var<S> mean_all(Var<S> a) {
  Tape<S>& t = *a.tape;
  bool ng = t.needs_grad(a.id);
  auto count = static_cast<S>(a.val().size());
  typename Tape<S>::Mat v(1, 1);
  v(0, 0) = a.val().sum() / count;
  int id = t.make(std::move(v), ng);
  if (ng)
    t.set_backward(id, [ai = a.id, oi = id, count](Tape<S>& tp) {
      tp.grad(ai).array() += tp.grad(oi)(0, 0) / count;
    });
  return {&t, id};
}

template <typename S>
Var<S> row_sum(Var<S> a) {
  Tape<S>& t = *a.tape;
  bool ng = t.needs_grad(a.id);
  int id = t.make(a.val().rowwise().sum(), ng);
  if (ng)
    t.set_backward(id, [ai = a.id, oi = id](Tape<S>& tp) {
      tp.grad(ai).colwise() += tp.grad(oi).col(0);
    });
  return {&t, id};
}

template <typename S>
Var<S> row_mean(Var<S> a) {
  Tape<S>& t = *a.tape;
  bool ng = t.needs_grad(a.id);
  auto d = static_cast<S>(a.cols());
  int id = t.make(a.val().rowwise().sum() / d, ng);
  if (ng)
    t.set_backward(id, [ai = a.id, oi = id, d](Tape<S>& tp) {
      tp.grad(ai).colwise() += (tp.grad(oi) / d).col(0).eval();
    });
  return {&t, id};
}

// Row-wise max as a constant (softmax shift; softmax(x + c) == softmax(x),
// so detaching is exact).
template <typename S>
Var<S> row_max_detached(Var<S> a) {
  return constant(*a.tape, typename Tape<S>::Mat(a.val().rowwise().maxCoeff()));
}

// ---- broadcasts ------------------------------------------------------------

template <typename S>
Var<S> add_colvec(Var<S> a, Var<S> v) {
  detail::require(v.cols() == 1 && v.rows() == a.rows(), "add_colvec");
  Tape<S>& t = *a.tape;
  bool ng = t.needs_grad(a.id) || t.needs_grad(v.id);
  typename Tape<S>::Mat out = a.val();
  out.colwise() += v.val().col(0);
  int id = t.make(std::move(out), ng);
  if (ng)
    t.set_backward(id, [ai = a.id, vi = v.id, oi = id](Tape<S>& tp) {
      if (tp.needs_grad(ai)) tp.grad(ai) += tp.grad(oi);
      if (tp.needs_grad(vi)) tp.grad(vi).col(0) += tp.grad(oi).rowwise().sum();
    });
  return {&t, id};
}

template <typename S>
Var<S> sub_colvec(Var<S> a, Var<S> v) {
  detail::require(v.cols() == 1 && v.rows() == a.rows(), "sub_colvec");
  Tape<S>& t = *a.tape;
  bool ng = t.needs_grad(a.id) || t.needs_grad(v.id);
  typename Tape<S>::Mat out = a.val();
  out.colwise() -= v.val().col(0);
  int id = t.make(std::move(out), ng);
  if (ng)
    t.set_backward(id, [ai = a.id, vi = v.id, oi = id](Tape<S>& tp) {
      if (tp.needs_grad(ai)) tp.grad(ai) += tp.grad(oi);
      if (tp.needs_grad(vi)) tp.grad(vi).col(0) -= tp.grad(oi).rowwise().sum();
    });
  return {&t, id};
}

template <typename S>
Var<S> mul_colvec(Var<S> a, Var<S> v) {
  detail::require(v.cols() == 1 && v.rows() == a.rows(), "mul_colvec");
  Tape<S>& t = *a.tape;
  bool ng = t.needs_grad(a.id) || t.needs_grad(v.id);
  typename Tape<S>::Mat out = a.val().array().colwise() * v.val().col(0).array();
  int id = t.make(std::move(out), ng);
  if (ng)
    t.set_backward(id, [ai = a.id, vi = v.id, oi = id](Tape<S>& tp) {
      if (tp.needs_grad(ai))
        tp.grad(ai).array() += tp.grad(oi).array().colwise() * tp.val(vi).col(0).array();
      if (tp.needs_grad(vi))
        tp.grad(vi).col(0) += tp.grad(oi).cwiseProduct(tp.val(ai)).rowwise().sum();
    });
  return {&t, id};
}

template <typename S>
Var<S> add_rowvec(Var<S> a, Var<S> v) {
  detail::require(v.rows() == 1 && v.cols() == a.cols(), "add_rowvec");
  Tape<S>& t = *a.tape;
  bool ng = t.needs_grad(a.id) || t.needs_grad(v.id);
  typename Tape<S>::Mat out = a.val();
  out.rowwise() += v.val().row(0);
  int id = t.make(std::move(out), ng);
  if (ng)
    t.set_backward(id, [ai = a.id, vi = v.id, oi = id](Tape<S>& tp) {
      if (tp.needs_grad(ai)) tp.grad(ai) += tp.grad(oi);
      if (tp.needs_grad(vi)) tp.grad(vi).row(0) += tp.grad(oi).colwise().sum();
    });
  return {&t, id};
}

template <typename S>
Var<S> mul_rowvec(Var<S> a, Var<S> v) {
  detail::require(v.rows() == 1 && v.cols() == a.cols(), "mul_rowvec");
  Tape<S>& t = *a.tape;
  bool ng = t.needs_grad(a.id) || t.needs_grad(v.id);
  typename Tape<S>::Mat out = a.val().array().rowwise() * v.val().row(0).array();
  int id = t.make(std::move(out), ng);
  if (ng)
    t.set_backward(id, [ai = a.id, vi = v.id, oi = id](Tape<S>& tp) {
      if (tp.needs_grad(ai))
        tp.grad(ai).array() += tp.grad(oi).array().rowwise() * tp.val(vi).row(0).array();
      if (tp.needs_grad(vi))
        tp.grad(vi).row(0) += tp.grad(oi).cwiseProduct(tp.val(ai)).colwise().sum();
    });
  return {&t, id};
}

template <typename S>
Var<S> broadcast_row(Var<S> v, Eigen::Index n) {
  detail::require(v.rows() == 1, "broadcast_row");
  Tape<S>& t = *v.tape;
  bool ng = t.needs_grad(v.id);
  int id = t.make(v.val().replicate(n, 1), ng);
  if (ng)
    t.set_backward(id, [vi = v.id, oi = id](Tape<S>& tp) {
      tp.grad(vi).row(0) += tp.grad(oi).colwise().sum();
    });
  return {&t, id};
}

// ---- structural ------------------------------------------------------------

template <typename S>
Var<S> rows_gather(Var<S> table, std::vector<std::int32_t> ids) {
  Tape<S>& t = *table.tape;
  bool ng = t.needs_grad(table.id);
  typename Tape<S>::Mat out(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    detail::require(ids[i] >= 0 && ids[i] < table.rows(), "rows_gather index");
    out.row(static_cast<Eigen::Index>(i)) = table.val().row(ids[i]);
  }
  int id = t.make(std::move(out), ng);
  if (ng)
    t.set_backward(id, [ti = table.id, oi = id, ids = std::move(ids)](Tape<S>& tp) {
      auto& g = tp.grad(ti);
      const auto& go = tp.grad(oi);
      for (std::size_t i = 0; i < ids.size(); ++i)
        g.row(ids[i]) += go.row(static_cast<Eigen::Index>(i));
    });
  return {&t, id};
}

template <typename S>
Var<S> cols_slice(Var<S> a, Eigen::Index start, Eigen::Index n) {
  detail::require(start >= 0 && start + n <= a.cols(), "cols_slice");
  Tape<S>& t = *a.tape;
  bool ng = t.needs_grad(a.id);
  int id = t.make(a.val().middleCols(start, n), ng);
  if (ng)
    t.set_backward(id, [ai = a.id, oi = id, start, n](Tape<S>& tp) {
      tp.grad(ai).middleCols(start, n) += tp.grad(oi);
    });
  return {&t, id};
}

template <typename S>
Var<S> concat_cols(const std::vector<Var<S>>& parts) {
  detail::require(!parts.empty(), "concat_cols empty");
  Tape<S>& t = *parts[0].tape;
  Eigen::Index rows = parts[0].rows(), cols = 0;
  bool ng = false;
  for (const auto& p : parts) {
    detail::require(p.rows() == rows, "concat_cols rows");
    cols += p.cols();
    ng = ng || t.needs_grad(p.id);
  }
  typename Tape<S>::Mat out(rows, cols);
  Eigen::Index at = 0;
  std::vector<std::pair<int, Eigen::Index>> spans;
  for (const auto& p : parts) {
    out.middleCols(at, p.cols()) = p.val();
    spans.emplace_back(p.id, p.cols());
    at += p.cols();
  }
  int id = t.make(std::move(out), ng);
  if (ng)
    t.set_backward(id, [spans = std::move(spans), oi = id](Tape<S>& tp) {
      Eigen::Index at = 0;
      for (auto [pid, w] : spans) {
        if (tp.needs_grad(pid)) tp.grad(pid) += tp.grad(oi).middleCols(at, w);
        at += w;
      }
    });
  return {&t, id};
}

template <typename S>
Var<S> transpose(Var<S> a) {
  Tape<S>& t = *a.tape;
  bool ng = t.needs_grad(a.id);
  int id = t.make(a.val().transpose(), ng);
  if (ng)
    t.set_backward(id, [ai = a.id, oi = id](Tape<S>& tp) {
      tp.grad(ai) += tp.grad(oi).transpose();
    });
  return {&t, id};
}

// ---- composites ------------------------------------------------------------

template <typename S>
Var<S> softmax_rows(Var<S> a) {
  Var<S> e = exp_(sub_colvec(a, row_max_detached(a)));
  return mul_colvec(e, reciprocal(row_sum(e)));
}

template <typename S>
Var<S> row_dot(Var<S> a, Var<S> b) {
  return row_sum(cmul(a, b));
}

template <typename S>
Var<S> mse(Var<S> a, Var<S> b) {
  return mean_all(square(sub(a, b)));
}

// Inverted dropout with an externally drawn mask; identity in eval mode.
template <typename S>
Var<S> dropout(Var<S> a, double rate, bool train, Rng& rng) {
  if (!train || rate <= 0.0) return a;
  if (rate >= 1.0) throw ConfigError("dropout rate must be < 1");
  typename Tape<S>::Mat mask(a.rows(), a.cols());
  auto keep = S(1) / static_cast<S>(1.0 - rate);
  for (Eigen::Index i = 0; i < mask.rows(); ++i)
    for (Eigen::Index j = 0; j < mask.cols(); ++j)
      mask(i, j) = rng.real01() < rate ? S(0) : keep;
  return cmul(a, constant(*a.tape, std::move(mask)));
}

// ---- named parameters -------------------------------------------------------

template <typename Scalar>
class ParameterSet {
 public:
  using Mat = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

  Mat& add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    if (index_.contains(name)) throw ConfigError("duplicate parameter '" + name + "'");
    index_.emplace(name, names_.size());
    names_.push_back(name);
    values_.push_back(Mat::Zero(rows, cols));
    return values_.back();
  }

  bool has(const std::string& name) const { return index_.contains(name); }
  Mat& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return values_[it->second];
  }
  const Mat& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ConfigError("unknown parameter '" + name + "'");
    return values_[it->second];
  }

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  Mat& value(std::size_t i) { return values_[i]; }
  const Mat& value(std::size_t i) const { return values_[i]; }

  bool all_finite() const {
    for (const auto& m : values_)
      if (!m.allFinite()) return false;
    return true;
  }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<Mat> values_;
};

template <typename Scalar>
using GradientSet = ParameterSet<Scalar>;

// Lazily binds parameters into a tape as leaves; only touched parameters
// appear in the graph and the rest report zero gradients.
template <typename Scalar>
class ParamBinding {
 public:
  ParamBinding(Tape<Scalar>& tape, const ParameterSet<Scalar>& params, bool needs_grad = true)
      : tape_(&tape), params_(&params), needs_grad_(needs_grad) {}

  Var<Scalar> operator[](const std::string& name) {
    auto it = bound_.find(name);
    if (it != bound_.end()) return {tape_, it->second};
    int id = tape_->leaf(&params_->at(name), needs_grad_);
    bound_.emplace(name, id);
    return {tape_, id};
  }

  const ParameterSet<Scalar>& params() const { return *params_; }

  // Per-parameter gradients after backward(); untouched names are zero.
  GradientSet<Scalar> collect() const {
    GradientSet<Scalar> g;
    for (const auto& name : params_->names()) {
      const auto& v = params_->at(name);
      auto& gm = g.add(name, v.rows(), v.cols());
      auto it = bound_.find(name);
      if (it != bound_.end()) {
        auto& node_grad = tape_->grad(it->second);
        if (node_grad.size() != 0) gm = node_grad;
      }
    }
    return g;
  }

 private:
  Tape<Scalar>* tape_;
  const ParameterSet<Scalar>* params_;
  bool needs_grad_;
  std::unordered_map<std::string, int> bound_;
};

// Runs the reverse sweep from a scalar loss and gathers gradients for every
// parameter of the binding. Non-finite losses are numeric errors.
template <typename Scalar>
GradientSet<Scalar> compute_gradients(Var<Scalar> loss, ParamBinding<Scalar>& binding) {
  if (loss.rows() != 1 || loss.cols() != 1)
    throw NumericError("compute_gradients: loss must be scalar");
  if (!std::isfinite(static_cast<double>(loss.val()(0, 0))))
    throw NumericError("compute_gradients: loss is not finite");
  loss.tape->backward(loss.id);
  return binding.collect();
}

}  // namespace kgt
