#pragma once

#include "icdm/types.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace icdm {

/// Dense matrix with a gradient slot. Gradients accumulate during backward
/// passes and are zeroed by the optimizer step (or explicitly).
struct Tensor2 {
  Matrix value;
  Matrix grad;
  bool requires_grad = true;

  Tensor2() = default;
  explicit Tensor2(Matrix v, bool rg = true)
      : value(std::move(v)),
        grad(Matrix::Zero(value.rows(), value.cols())),
        requires_grad(rg) {}

  Eigen::Index rows() const { return value.rows(); }
  Eigen::Index cols() const { return value.cols(); }
  void zero_grad() { grad.setZero(); }
};

class Tape;

/// Handle to a tape node. Cheap to copy; valid only while its tape lives.
struct Var {
  Tape* tape = nullptr;
  int node = -1;

  bool valid() const { return tape != nullptr && node >= 0; }
  Eigen::Index rows() const;
  Eigen::Index cols() const;
  const Matrix& value() const;
};

/// Grouped row selection: group g selects source rows
/// sources[offsets[g] .. offsets[g+1]). Groups may be empty.
struct Segments {
  std::vector<int> offsets{0};
  std::vector<int> sources;

  int groups() const { return static_cast<int>(offsets.size()) - 1; }
  int count(int g) const { return offsets[g + 1] - offsets[g]; }
};

/// Reverse-mode tape over dense matrices. Rebuilt per batch: record the
/// forward with the free functions below, then call backward() on a 1x1 root.
/// Every op validates that its output is finite and throws NumericError
/// naming the op otherwise. Single-threaded by contract.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Tensor enters the graph; backward accumulates into t.grad.
  Var leaf(Tensor2& t);
  /// Gradient-free input.
  Var constant(Matrix v);

  /// Seeds the 1x1 root with gradient 1 and propagates in reverse order.
  /// One backward per tape.
  void backward(Var root);

  const Matrix& value(Var v) const;
  int size() const { return static_cast<int>(nodes_.size()); }

 private:
  friend Var matmul(Var a, Var b);
  friend Var hadamard(Var a, Var b);
  friend Var add(Var a, Var b);
  friend Var sub(Var a, Var b);
  friend Var add_rowvec(Var x, Var b);
  friend Var scale(Var a, Scalar c);
  friend Var scale_rows(Var x, Var s);
  friend Var row_gather(Var x, std::vector<int> rows);
  friend Var segment_mean(Var src, std::shared_ptr<const Segments> seg);
  friend Var segment_weighted_sum(Var src, std::shared_ptr<const Segments> seg,
                                  std::vector<Scalar> weights);
  friend Var concat_rows(std::span<const Var> parts);
  friend Var col_slice(Var x, int col);
  friend Var tanh(Var x);
  friend Var sigmoid(Var x);
  friend Var relu(Var x);
  friend Var softmax_over_fixed_arity(std::span<const Var> columns);
  friend Var bce_loss(Var preds, const std::vector<std::int8_t>& labels);
  friend Var sq_norm(Var x);

  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    Tensor2* external = nullptr;
    std::function<void(Tape&, const Matrix&)> pull;  // adds into parent grads
  };

  Var push(const std::string& op, Matrix value, bool needs_grad,
           std::function<void(Tape&, const Matrix&)> pull);
  Node& at(Var v) { return nodes_[v.node]; }
  const Node& at(Var v) const { return nodes_[v.node]; }

  std::vector<Node> nodes_;
  bool backward_done_ = false;
};

Var matmul(Var a, Var b);
Var hadamard(Var a, Var b);
Var add(Var a, Var b);
Var sub(Var a, Var b);
/// Adds a 1 x C row vector to every row of an R x C matrix.
Var add_rowvec(Var x, Var b);
Var scale(Var a, Scalar c);
/// Multiplies row i of x by s(i, 0); s is R x 1.
Var scale_rows(Var x, Var s);
Var row_gather(Var x, std::vector<int> rows);
/// Mean of selected source rows per group; empty groups produce zero rows.
Var segment_mean(Var src, std::shared_ptr<const Segments> seg);
/// Per-edge-weighted sum of selected source rows per group.
Var segment_weighted_sum(Var src, std::shared_ptr<const Segments> seg,
                         std::vector<Scalar> weights);
Var concat_rows(std::span<const Var> parts);
/// Extracts one column as an R x 1 matrix.
Var col_slice(Var x, int col);
Var tanh(Var x);
Var sigmoid(Var x);
Var relu(Var x);
/// Stacks V column vectors (R x 1 each) and normalizes each row by softmax;
/// intended for the small fixed view arities of the generation step.
Var softmax_over_fixed_arity(std::span<const Var> columns);
/// Summed binary cross-entropy of predictions (R x 1, clamped to
/// [1e-7, 1-1e-7]) against binary labels; returns 1 x 1.
Var bce_loss(Var preds, const std::vector<std::int8_t>& labels);
/// Sum of squared entries; returns 1 x 1.
Var sq_norm(Var x);

}  // namespace icdm
