#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "advnav/diff/param_store.hpp"

namespace advnav::diff {

struct Node {
  int id = -1;
  bool valid() const { return id >= 0; }
};

/// Reverse-mode tape over dense double matrices. Forward ops append records;
/// backward walks the records in reverse and accumulates exact local partials.
/// Gradients of parameter leaves are ADDED into their ParamStore accumulators,
/// so callers zero the store between unrelated backward passes.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // ---- leaves ----------------------------------------------------------

  Node constant(Mat v) { return push(std::move(v)); }

  Node scalar_constant(double v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return push(std::move(m));
  }

  Node param(ParamStore& store, const std::string& name) {
    Node n = push(store.value(name));
    records_[asz(n)].store = &store;
    records_[asz(n)].param_name = name;
    return n;
  }

  // ---- elementwise -----------------------------------------------------

  Node add(Node a, Node b) {
    require_same_shape(a, b, "add");
    Node out = push(value(a) + value(b));
    attach(out, [this, a, b, out]() {
      accumulate(a, grad_of(out));
      accumulate(b, grad_of(out));
    });
    return out;
  }

  Node sub(Node a, Node b) {
    require_same_shape(a, b, "sub");
    Node out = push(value(a) - value(b));
    attach(out, [this, a, b, out]() {
      accumulate(a, grad_of(out));
      accumulate(b, -grad_of(out));
    });
    return out;
  }

  Node mul(Node a, Node b) {
    require_same_shape(a, b, "mul");
    Node out = push(value(a).cwiseProduct(value(b)));
    attach(out, [this, a, b, out]() {
      accumulate(a, grad_of(out).cwiseProduct(value(b)));
      accumulate(b, grad_of(out).cwiseProduct(value(a)));
    });
    return out;
  }

  Node scale(Node a, double s) {
    Node out = push(value(a) * s);
    attach(out, [this, a, s, out]() { accumulate(a, grad_of(out) * s); });
    return out;
  }

  Node add_scalar(Node a, double s) {
    Node out = push((value(a).array() + s).matrix());
    attach(out, [this, a, out]() { accumulate(a, grad_of(out)); });
    return out;
  }

  Node square(Node a) {
    Node out = push(value(a).cwiseProduct(value(a)));
    attach(out, [this, a, out]() {
      accumulate(a, 2.0 * grad_of(out).cwiseProduct(value(a)));
    });
    return out;
  }

  Node sqrt_(Node a) {
    Node out = push(value(a).cwiseSqrt());
    attach(out, [this, a, out]() {
      accumulate(a, 0.5 * grad_of(out).cwiseQuotient(value(out)));
    });
    return out;
  }

  Node relu(Node a) {
    Node out = push(value(a).cwiseMax(0.0));
    attach(out, [this, a, out]() {
      const Mat mask = (value(a).array() > 0.0).cast<double>().matrix();
      accumulate(a, grad_of(out).cwiseProduct(mask));
    });
    return out;
  }

  Node tanh_(Node a) {
    Node out = push(value(a).array().tanh().matrix());
    attach(out, [this, a, out]() {
      const Mat one_minus_sq = (1.0 - value(out).array().square()).matrix();
      accumulate(a, grad_of(out).cwiseProduct(one_minus_sq));
    });
    return out;
  }

  Node sigmoid(Node a) {
    Node out = push((1.0 / (1.0 + (-value(a).array()).exp())).matrix());
    attach(out, [this, a, out]() {
      const Mat d = (value(out).array() * (1.0 - value(out).array())).matrix();
      accumulate(a, grad_of(out).cwiseProduct(d));
    });
    return out;
  }

  // ---- linear algebra ---------------------------------------------------

  Node matmul(Node a, Node b) {
    if (value(a).cols() != value(b).rows())
      shape_error("matmul", a, b);
    Node out = push(value(a) * value(b));
    attach(out, [this, a, b, out]() {
      accumulate(a, grad_of(out) * value(b).transpose());
      accumulate(b, value(a).transpose() * grad_of(out));
    });
    return out;
  }

  /// x (n x in) * W (in x out) + b (1 x out) broadcast over rows.
  Node affine(Node x, Node w, Node b) {
    if (value(x).cols() != value(w).rows() || value(b).rows() != 1 ||
        value(b).cols() != value(w).cols())
      shape_error("affine", x, w);
    Mat y = value(x) * value(w);
    y.rowwise() += value(b).row(0);
    Node out = push(std::move(y));
    attach(out, [this, x, w, b, out]() {
      accumulate(x, grad_of(out) * value(w).transpose());
      accumulate(w, value(x).transpose() * grad_of(out));
      accumulate(b, grad_of(out).colwise().sum());
    });
    return out;
  }

  Node transpose(Node a) {
    Node out = push(value(a).transpose());
    attach(out, [this, a, out]() { accumulate(a, grad_of(out).transpose()); });
    return out;
  }

  // ---- shape manipulation ------------------------------------------------

  Node concat_cols(const std::vector<Node>& parts) {
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const Eigen::Index rows = value(parts[0]).rows();
    Eigen::Index cols = 0;
    for (const auto& p : parts) {
      if (value(p).rows() != rows) shape_error("concat_cols", parts[0], p);
      cols += value(p).cols();
    }
    Mat y(rows, cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
      y.middleCols(at, value(p).cols()) = value(p);
      at += value(p).cols();
    }
    Node out = push(std::move(y));
    attach(out, [this, parts, out]() {
      Eigen::Index at2 = 0;
      for (const auto& p : parts) {
        accumulate(p, grad_of(out).middleCols(at2, value(p).cols()));
        at2 += value(p).cols();
      }
    });
    return out;
  }

  Node vstack(const std::vector<Node>& parts) {
    if (parts.empty()) throw std::invalid_argument("vstack: no inputs");
    const Eigen::Index cols = value(parts[0]).cols();
    Eigen::Index rows = 0;
    for (const auto& p : parts) {
      if (value(p).cols() != cols) shape_error("vstack", parts[0], p);
      rows += value(p).rows();
    }
    Mat y(rows, cols);
    Eigen::Index at = 0;
    for (const auto& p : parts) {
      y.middleRows(at, value(p).rows()) = value(p);
      at += value(p).rows();
    }
    Node out = push(std::move(y));
    attach(out, [this, parts, out]() {
      Eigen::Index at2 = 0;
      for (const auto& p : parts) {
        accumulate(p, grad_of(out).middleRows(at2, value(p).rows()));
        at2 += value(p).rows();
      }
    });
    return out;
  }

  Node slice_cols(Node a, Eigen::Index c0, Eigen::Index count) {
    if (c0 < 0 || c0 + count > value(a).cols())
      throw std::invalid_argument("slice_cols: out of range");
    Node out = push(value(a).middleCols(c0, count));
    attach(out, [this, a, c0, count, out]() {
      Mat g = Mat::Zero(value(a).rows(), value(a).cols());
      g.middleCols(c0, count) = grad_of(out);
      accumulate(a, g);
    });
    return out;
  }

  Node slice_rows(Node a, Eigen::Index r0, Eigen::Index count) {
    if (r0 < 0 || r0 + count > value(a).rows())
      throw std::invalid_argument("slice_rows: out of range");
    Node out = push(value(a).middleRows(r0, count));
    attach(out, [this, a, r0, count, out]() {
      Mat g = Mat::Zero(value(a).rows(), value(a).cols());
      g.middleRows(r0, count) = grad_of(out);
      accumulate(a, g);
    });
    return out;
  }

  Node row(Node a, Eigen::Index r) { return slice_rows(a, r, 1); }

  /// Reinterprets the entries in row-major order under a new shape, e.g.
  /// 1 x 2T -> T x 2 keeps [x0 y0 x1 y1 ...] as rows of (x, y).
  Node reshape_rowmajor(Node a, Eigen::Index rows, Eigen::Index cols) {
    if (rows * cols != value(a).size())
      throw std::invalid_argument("reshape_rowmajor: size mismatch");
    const Eigen::Index in_cols = value(a).cols();
    Mat y(rows, cols);
    for (Eigen::Index i = 0; i < rows * cols; ++i)
      y(i / cols, i % cols) = value(a)(i / in_cols, i % in_cols);
    Node out = push(std::move(y));
    attach(out, [this, a, rows, cols, in_cols, out]() {
      Mat g(value(a).rows(), in_cols);
      for (Eigen::Index i = 0; i < rows * cols; ++i)
        g(i / in_cols, i % in_cols) = grad_of(out)(i / cols, i % cols);
      accumulate(a, g);
    });
    return out;
  }

  // ---- reductions --------------------------------------------------------

  Node sum(Node a) {
    Node out = scalar_from(value(a).sum());
    attach(out, [this, a, out]() {
      accumulate(a, Mat::Constant(value(a).rows(), value(a).cols(),
                                  grad_of(out)(0, 0)));
    });
    return out;
  }

  Node mean(Node a) {
    const double n = static_cast<double>(value(a).size());
    Node out = scalar_from(value(a).sum() / n);
    attach(out, [this, a, n, out]() {
      accumulate(a, Mat::Constant(value(a).rows(), value(a).cols(),
                                  grad_of(out)(0, 0) / n));
    });
    return out;
  }

  /// Max over all entries; the subgradient flows to the argmax only, with
  /// ties resolved to the lowest (row-major) index.
  Node max_all(Node a, Eigen::Index* argmax_row = nullptr,
               Eigen::Index* argmax_col = nullptr) {
    const Mat& v = value(a);
    Eigen::Index br = 0, bc = 0;
    double best = v(0, 0);
    for (Eigen::Index r = 0; r < v.rows(); ++r)
      for (Eigen::Index c = 0; c < v.cols(); ++c)
        if (v(r, c) > best) {
          best = v(r, c);
          br = r;
          bc = c;
        }
    if (argmax_row) *argmax_row = br;
    if (argmax_col) *argmax_col = bc;
    Node out = scalar_from(best);
    attach(out, [this, a, br, bc, out]() {
      Mat g = Mat::Zero(value(a).rows(), value(a).cols());
      g(br, bc) = grad_of(out)(0, 0);
      accumulate(a, g);
    });
    return out;
  }

  /// Row-wise softmax. An optional 0/1 mask pins masked entries to zero
  /// probability; each row must keep at least one allowed entry.
  Node softmax_rows(Node a, const Mat* mask = nullptr) {
    const Mat& x = value(a);
    if (mask && (mask->rows() != x.rows() || mask->cols() != x.cols()))
      throw std::invalid_argument("softmax_rows: mask shape mismatch");
    Mat p(x.rows(), x.cols());
    for (Eigen::Index r = 0; r < x.rows(); ++r) {
      double hi = -std::numeric_limits<double>::infinity();
      for (Eigen::Index c = 0; c < x.cols(); ++c)
        if (!mask || (*mask)(r, c) != 0.0) hi = std::max(hi, x(r, c));
      if (!std::isfinite(hi))
        throw std::invalid_argument("softmax_rows: fully masked row");
      double z = 0.0;
      for (Eigen::Index c = 0; c < x.cols(); ++c) {
        const bool on = !mask || (*mask)(r, c) != 0.0;
        p(r, c) = on ? std::exp(x(r, c) - hi) : 0.0;
        z += p(r, c);
      }
      p.row(r) /= z;
    }
    Node out = push(std::move(p));
    attach(out, [this, a, out]() {
      const Mat& pv = value(out);
      const Mat& g = grad_of(out);
      Mat gx(pv.rows(), pv.cols());
      for (Eigen::Index r = 0; r < pv.rows(); ++r) {
        const double dot = g.row(r).dot(pv.row(r));
        gx.row(r) = pv.row(r).cwiseProduct(g.row(r).array().matrix() -
                                           Mat::Constant(1, pv.cols(), dot));
      }
      accumulate(a, gx);
    });
    return out;
  }

  /// Running sum down the rows: out[r] = sum of rows 0..r.
  Node cumsum_rows(Node a) {
    Mat y = value(a);
    for (Eigen::Index r = 1; r < y.rows(); ++r) y.row(r) += y.row(r - 1);
    Node out = push(std::move(y));
    attach(out, [this, a, out]() {
      Mat g = grad_of(out);
      for (Eigen::Index r = g.rows() - 2; r >= 0; --r) g.row(r) += g.row(r + 1);
      accumulate(a, g);
    });
    return out;
  }

  // ---- extension point -----------------------------------------------------

  /// Custom binary op: the caller supplies the forward value and a
  /// vector-Jacobian product writing into zero-initialized parent grads.
  Node custom_binary(Node a, Node b, Mat out_value,
                     std::function<void(const Mat& g, Mat& ga, Mat& gb)> vjp) {
    Node out = push(std::move(out_value));
    attach(out, [this, a, b, out, vjp = std::move(vjp)]() {
      Mat ga = Mat::Zero(value(a).rows(), value(a).cols());
      Mat gb = Mat::Zero(value(b).rows(), value(b).cols());
      vjp(grad_of(out), ga, gb);
      accumulate(a, ga);
      accumulate(b, gb);
    });
    return out;
  }

  // ---- access ------------------------------------------------------------

  const Mat& value(Node n) const { return records_[asz(n)].value; }

  double scalar(Node n) const {
    const Mat& v = value(n);
    if (v.size() != 1) throw std::invalid_argument("scalar: node is not 1x1");
    return v(0, 0);
  }

  /// Reverse accumulation from a scalar root. Parameter-leaf gradients are
  /// added into their stores.
  void backward(Node root) {
    if (value(root).size() != 1)
      throw std::invalid_argument("backward: root must be a scalar");
    for (auto& r : records_) r.grad.resize(0, 0);
    records_[asz(root)].grad = Mat::Ones(1, 1);
    for (int id = root.id; id >= 0; --id) {
      auto& rec = records_[static_cast<std::size_t>(id)];
      if (rec.grad.size() == 0) continue;  // not on a path to the root
      if (rec.backward_fn) rec.backward_fn();
      if (rec.store) rec.store->grad(rec.param_name) += rec.grad;
    }
  }

  std::size_t size() const { return records_.size(); }

 private:
  struct Record {
    Mat value;
    Mat grad;  // empty until backward touches it
    std::function<void()> backward_fn;
    ParamStore* store = nullptr;
    std::string param_name;
  };

  static std::size_t asz(Node n) { return static_cast<std::size_t>(n.id); }

  Node push(Mat v) {
    records_.push_back(Record{std::move(v), {}, nullptr, nullptr, {}});
    return Node{static_cast<int>(records_.size()) - 1};
  }

  Node scalar_from(double v) {
    Mat m(1, 1);
    m(0, 0) = v;
    return push(std::move(m));
  }

  void attach(Node n, std::function<void()> fn) {
    records_[asz(n)].backward_fn = std::move(fn);
  }

  const Mat& grad_of(Node n) const { return records_[asz(n)].grad; }

  void accumulate(Node n, const Mat& g) {
    auto& rec = records_[asz(n)];
    if (rec.grad.size() == 0)
      rec.grad = g;
    else
      rec.grad += g;
  }

  void require_same_shape(Node a, Node b, const char* op) const {
    if (value(a).rows() != value(b).rows() || value(a).cols() != value(b).cols())
      shape_error(op, a, b);
  }

  [[noreturn]] void shape_error(const char* op, Node a, Node b) const {
    throw std::invalid_argument(
        std::string(op) + ": incompatible shapes (" +
        std::to_string(value(a).rows()) + "x" + std::to_string(value(a).cols()) +
        " vs " + std::to_string(value(b).rows()) + "x" +
        std::to_string(value(b).cols()) + ")");
  }

  std::vector<Record> records_;
};

}  // namespace advnav::diff
