#pragma once

// Minimal reverse-mode automatic differentiation over dense row-major
// matrices. A Tape records every operation of one forward pass; backward()
// walks it in reverse and accumulates gradients into the nodes that need them.

#include <cstdint>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

#include <Eigen/Dense>

namespace dualres::ad {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tape;

class Var {
 public:
  Var() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::uint32_t id() const { return id_; }
  const Mat& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }

 private:
  friend class Tape;
  Var(Tape* tape, std::uint32_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::uint32_t id_ = std::numeric_limits<std::uint32_t>::max();
};

class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Mat& out_grad)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Mat value);
  /// Leaf whose gradient is tracked.
  Var variable(Mat value);
  /// Records an operation result. The node requires a gradient iff any parent does.
  Var record(Mat value, std::initializer_list<Var> parents, BackwardFn backward);
  Var record(Mat value, const std::vector<Var>& parents, BackwardFn backward);

  const Mat& value(Var v) const { return nodes_[v.id()].value; }
  bool requires_grad(Var v) const { return nodes_[v.id()].requires_grad; }

  /// Accumulated gradient; a zero matrix of the value's shape if nothing flowed.
  Mat grad(Var v) const;
  /// Mutable gradient buffer, zero-initialised on first access.
  Mat& grad_buffer(Var v);

  /// Seeds d(out)/d(out) = 1 for a 1x1 output and back-propagates.
  void backward(Var out);
  void backward(Var out, const Mat& seed);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    BackwardFn backward;
    bool requires_grad = false;
  };
  Var push(Mat value, bool requires_grad, BackwardFn backward);

  std::deque<Node> nodes_;
};

// Elementwise and linear-algebra ops. Shapes are checked with
// std::invalid_argument on mismatch.
Var matmul(Var a, Var b);
/// a * b^T
Var matmul_nt(Var a, Var b);
/// x * W^T + bias (bias is 1 x out, broadcast over rows)
Var linear(Var x, Var weight, Var bias);
Var linear(Var x, Var weight);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
Var add_scalar(Var a, double c);
Var add_row(Var a, Var row);
Var sigmoid(Var a);
Var tanh(Var a);
Var relu(Var a);
Var sum(Var a);
Var gather_rows(Var a, std::vector<int> rows);
/// Each row of `a` repeated `times` consecutively.
Var repeat_rows(Var a, int times);
Var concat_cols(const std::vector<Var>& parts);
/// Row-major reinterpretation; rows*cols must equal the element count.
Var reshape(Var a, Eigen::Index rows, Eigen::Index cols);
/// Row-wise layer normalisation with per-column gain and bias (both 1 x cols).
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
/// Sum of -log softmax(logits)[label] over rows.
Var cross_entropy_sum(Var logits, const std::vector<int>& labels);

/// Row-wise softmax on plain values.
Mat softmax_rows(const Mat& logits);

}  // namespace dualres::ad
