#include "dualres/autodiff.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace dualres::ad {

namespace {

void check(bool ok, const char* op, const std::string& what) {
  if (!ok) throw std::invalid_argument(std::string(op) + ": " + what);
}

std::string shape(const Mat& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

void same_shape(const char* op, Var a, Var b) {
  check(a.rows() == b.rows() && a.cols() == b.cols(), op,
        "shape mismatch " + shape(a.value()) + " vs " + shape(b.value()));
}

template <typename F>
Var unary(Var a, Mat out, F&& backward) {
  return a.tape().record(std::move(out), {a}, std::forward<F>(backward));
}

}  // namespace

const Mat& Var::value() const { return tape_->value(*this); }

Var Tape::push(Mat value, bool requires_grad, BackwardFn backward) {
  const auto id = static_cast<std::uint32_t>(nodes_.size());
  nodes_.push_back({std::move(value), Mat(), std::move(backward), requires_grad});
  return Var(this, id);
}

Var Tape::constant(Mat value) { return push(std::move(value), false, nullptr); }

Var Tape::variable(Mat value) { return push(std::move(value), true, nullptr); }

Var Tape::record(Mat value, std::initializer_list<Var> parents, BackwardFn backward) {
  bool needs = false;
  for (const Var& p : parents) needs = needs || requires_grad(p);
  return push(std::move(value), needs, needs ? std::move(backward) : BackwardFn{});
}

Var Tape::record(Mat value, const std::vector<Var>& parents, BackwardFn backward) {
  bool needs = false;
  for (const Var& p : parents) needs = needs || requires_grad(p);
  return push(std::move(value), needs, needs ? std::move(backward) : BackwardFn{});
}

Mat Tape::grad(Var v) const {
  const Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) return Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

Mat& Tape::grad_buffer(Var v) {
  Node& n = nodes_[v.id()];
  if (n.grad.size() == 0) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::backward(Var out) {
  check(out.rows() == 1 && out.cols() == 1, "backward", "output must be 1x1");
  backward(out, Mat::Constant(1, 1, 1.0));
}

void Tape::backward(Var out, const Mat& seed) {
  check(seed.rows() == out.rows() && seed.cols() == out.cols(), "backward", "seed shape");
  if (!requires_grad(out)) return;
  grad_buffer(out) += seed;
  for (std::int64_t i = out.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.requires_grad || !n.backward || n.grad.size() == 0) continue;
    n.backward(*this, n.grad);
  }
}

// ---------------------------------------------------------------------------

Var matmul(Var a, Var b) {
  check(a.cols() == b.rows(), "matmul", shape(a.value()) + " * " + shape(b.value()));
  Mat out = a.value() * b.value();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Mat& g) {
    if (t.requires_grad(a)) t.grad_buffer(a).noalias() += g * t.value(b).transpose();
    if (t.requires_grad(b)) t.grad_buffer(b).noalias() += t.value(a).transpose() * g;
  });
}

Var matmul_nt(Var a, Var b) {
  check(a.cols() == b.cols(), "matmul_nt", shape(a.value()) + " * " + shape(b.value()) + "^T");
  Mat out = a.value() * b.value().transpose();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Mat& g) {
    if (t.requires_grad(a)) t.grad_buffer(a).noalias() += g * t.value(b);
    if (t.requires_grad(b)) t.grad_buffer(b).noalias() += g.transpose() * t.value(a);
  });
}

Var linear(Var x, Var weight, Var bias) { return add_row(matmul_nt(x, weight), bias); }

Var linear(Var x, Var weight) { return matmul_nt(x, weight); }

Var add(Var a, Var b) {
  same_shape("add", a, b);
  Mat out = a.value() + b.value();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Mat& g) {
    if (t.requires_grad(a)) t.grad_buffer(a) += g;
    if (t.requires_grad(b)) t.grad_buffer(b) += g;
  });
}

Var sub(Var a, Var b) {
  same_shape("sub", a, b);
  Mat out = a.value() - b.value();
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Mat& g) {
    if (t.requires_grad(a)) t.grad_buffer(a) += g;
    if (t.requires_grad(b)) t.grad_buffer(b) -= g;
  });
}

Var mul(Var a, Var b) {
  same_shape("mul", a, b);
  Mat out = a.value().cwiseProduct(b.value());
  return a.tape().record(std::move(out), {a, b}, [a, b](Tape& t, const Mat& g) {
    if (t.requires_grad(a)) t.grad_buffer(a) += g.cwiseProduct(t.value(b));
    if (t.requires_grad(b)) t.grad_buffer(b) += g.cwiseProduct(t.value(a));
  });
}

Var scale(Var a, double s) {
  return unary(a, a.value() * s, [a, s](Tape& t, const Mat& g) { t.grad_buffer(a) += g * s; });
}

Var add_scalar(Var a, double c) {
  return unary(a, (a.value().array() + c).matrix(),
               [a](Tape& t, const Mat& g) { t.grad_buffer(a) += g; });
}

Var add_row(Var a, Var row) {
  check(row.rows() == 1 && row.cols() == a.cols(), "add_row",
        shape(a.value()) + " + " + shape(row.value()));
  Mat out = a.value().rowwise() + row.value().row(0);
  return a.tape().record(std::move(out), {a, row}, [a, row](Tape& t, const Mat& g) {
    if (t.requires_grad(a)) t.grad_buffer(a) += g;
    if (t.requires_grad(row)) t.grad_buffer(row) += g.colwise().sum();
  });
}

Var sigmoid(Var a) {
  Mat out = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  Mat deriv = (out.array() * (1.0 - out.array())).matrix();
  return unary(a, std::move(out), [a, deriv = std::move(deriv)](Tape& t, const Mat& g) {
    t.grad_buffer(a) += g.cwiseProduct(deriv);
  });
}

Var tanh(Var a) {
  Mat out = a.value().array().tanh().matrix();
  Mat deriv = (1.0 - out.array().square()).matrix();
  return unary(a, std::move(out), [a, deriv = std::move(deriv)](Tape& t, const Mat& g) {
    t.grad_buffer(a) += g.cwiseProduct(deriv);
  });
}

Var relu(Var a) {
  Mat out = a.value().cwiseMax(0.0);
  return unary(a, std::move(out), [a](Tape& t, const Mat& g) {
    t.grad_buffer(a) += (t.value(a).array() > 0.0).select(g, 0.0).matrix();
  });
}

Var sum(Var a) {
  Mat out = Mat::Constant(1, 1, a.value().sum());
  return unary(a, std::move(out), [a](Tape& t, const Mat& g) {
    t.grad_buffer(a).array() += g(0, 0);
  });
}

Var gather_rows(Var a, std::vector<int> rows) {
  Mat out(static_cast<Eigen::Index>(rows.size()), a.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    check(rows[k] >= 0 && rows[k] < a.rows(), "gather_rows", "row index out of range");
    out.row(static_cast<Eigen::Index>(k)) = a.value().row(rows[k]);
  }
  return unary(a, std::move(out), [a, rows = std::move(rows)](Tape& t, const Mat& g) {
    Mat& ga = t.grad_buffer(a);
    for (std::size_t k = 0; k < rows.size(); ++k) ga.row(rows[k]) += g.row(static_cast<Eigen::Index>(k));
  });
}

Var repeat_rows(Var a, int times) {
  check(times >= 1, "repeat_rows", "times must be >= 1");
  Mat out(a.rows() * times, a.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (int c = 0; c < times; ++c) out.row(i * times + c) = a.value().row(i);
  }
  return unary(a, std::move(out), [a, times](Tape& t, const Mat& g) {
    Mat& ga = t.grad_buffer(a);
    for (Eigen::Index i = 0; i < ga.rows(); ++i) {
      for (int c = 0; c < times; ++c) ga.row(i) += g.row(i * times + c);
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  check(!parts.empty(), "concat_cols", "no inputs");
  const Eigen::Index rows = parts.front().rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    check(p.rows() == rows, "concat_cols", "row count mismatch");
    cols += p.cols();
  }
  Mat out(rows, cols);
  Eigen::Index offset = 0;
  for (const Var& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  Tape& tape = parts.front().tape();
  return tape.record(std::move(out), parts, [parts](Tape& t, const Mat& g) {
    Eigen::Index off = 0;
    for (const Var& p : parts) {
      if (t.requires_grad(p)) t.grad_buffer(p) += g.middleCols(off, p.cols());
      off += p.cols();
    }
  });
}

Var reshape(Var a, Eigen::Index rows, Eigen::Index cols) {
  check(rows * cols == a.value().size(), "reshape", "element count mismatch");
  Mat out = Eigen::Map<const Mat>(a.value().data(), rows, cols);
  return unary(a, std::move(out), [a](Tape& t, const Mat& g) {
    Mat& ga = t.grad_buffer(a);
    ga += Eigen::Map<const Mat>(g.data(), ga.rows(), ga.cols());
  });
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  const Eigen::Index n = x.cols();
  check(gain.rows() == 1 && gain.cols() == n && bias.rows() == 1 && bias.cols() == n,
        "layer_norm", "gain/bias must be 1x" + std::to_string(n));
  const Mat& xv = x.value();
  Mat xhat(xv.rows(), n);
  Eigen::VectorXd inv_std(xv.rows());
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    const double mean = xv.row(r).mean();
    const double var = (xv.row(r).array() - mean).square().mean();
    inv_std(r) = 1.0 / std::sqrt(var + eps);
    xhat.row(r) = (xv.row(r).array() - mean) * inv_std(r);
  }
  Mat out = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  out.rowwise() += bias.value().row(0);
  return x.tape().record(
      std::move(out), {x, gain, bias},
      [x, gain, bias, xhat = std::move(xhat), inv_std = std::move(inv_std)](Tape& t, const Mat& g) {
        if (t.requires_grad(gain)) t.grad_buffer(gain) += g.cwiseProduct(xhat).colwise().sum();
        if (t.requires_grad(bias)) t.grad_buffer(bias) += g.colwise().sum();
        if (!t.requires_grad(x)) return;
        Mat& gx = t.grad_buffer(x);
        const auto& gv = t.value(gain).row(0).array();
        for (Eigen::Index r = 0; r < xhat.rows(); ++r) {
          const Eigen::ArrayXd dxhat = (g.row(r).array() * gv).transpose();
          const Eigen::ArrayXd xh = xhat.row(r).transpose().array();
          const double mean_d = dxhat.mean();
          const double mean_dx = (dxhat * xh).mean();
          gx.row(r) += (inv_std(r) * (dxhat - mean_d - xh * mean_dx)).matrix().transpose();
        }
      });
}

Mat softmax_rows(const Mat& logits) {
  Mat out(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    out.row(r) = (logits.row(r).array() - m).exp().matrix();
    out.row(r) /= out.row(r).sum();
  }
  return out;
}

Var cross_entropy_sum(Var logits, const std::vector<int>& labels) {
  check(static_cast<Eigen::Index>(labels.size()) == logits.rows(), "cross_entropy_sum",
        "label count mismatch");
  Mat probs = softmax_rows(logits.value());
  double total = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    check(y >= 0 && y < logits.cols(), "cross_entropy_sum", "label out of range");
    const double m = logits.value().row(r).maxCoeff();
    const double lse = m + std::log((logits.value().row(r).array() - m).exp().sum());
    total += lse - logits.value()(r, y);
  }
  return unary(logits, Mat::Constant(1, 1, total),
               [logits, labels, probs = std::move(probs)](Tape& t, const Mat& g) {
                 Mat d = probs;
                 for (Eigen::Index r = 0; r < d.rows(); ++r) d(r, labels[static_cast<std::size_t>(r)]) -= 1.0;
                 t.grad_buffer(logits) += g(0, 0) * d;
               });
}

}  // namespace dualres::ad
