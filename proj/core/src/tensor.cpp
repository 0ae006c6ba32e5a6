#include "nestco/tensor.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <sstream>
#include <utility>

#include "nestco/error.hpp"

namespace nestco::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw DimensionError(std::string(op) + ": incompatible shapes " + to_string(a.shape()) +
                       " and " + to_string(b.shape()));
}

bool any_requires_grad(const Tensor& a) { return a.requires_grad(); }
bool any_requires_grad(const Tensor& a, const Tensor& b) {
  return a.requires_grad() || b.requires_grad();
}

/// Elementwise binary op with optional one-element broadcast of the right operand.
enum class Binary { add, sub, mul };

Tensor binary(Tape& tape, const Tensor& a, const Tensor& b, Binary kind, const char* name) {
  const bool broadcast = b.size() == 1 && a.size() != 1;
  if (!broadcast && a.shape() != b.shape()) shape_error(name, a, b);
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<double> out(av.size());
  for (std::size_t i = 0; i < av.size(); ++i) {
    const double rhs = broadcast ? bv[0] : bv[i];
    switch (kind) {
      case Binary::add: out[i] = av[i] + rhs; break;
      case Binary::sub: out[i] = av[i] - rhs; break;
      case Binary::mul: out[i] = av[i] * rhs; break;
    }
  }
  Tensor result(a.shape(), std::move(out), any_requires_grad(a, b));
  if (result.requires_grad()) {
    tape.record(result, [a, b, result, kind, broadcast]() mutable {
      const auto g = result.grad();
      const auto av = a.values();
      const auto bv = b.values();
      if (a.requires_grad()) {
        auto ga = a.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
          const double rhs = broadcast ? bv[0] : bv[i];
          ga[i] += kind == Binary::mul ? g[i] * rhs : g[i];
        }
      }
      if (b.requires_grad()) {
        auto gb = b.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) {
          double d = g[i];
          if (kind == Binary::sub) d = -d;
          if (kind == Binary::mul) d *= av[i];
          gb[broadcast ? 0 : i] += d;
        }
      }
    });
  }
  return result;
}

}  // namespace

std::size_t numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "x" : "") << shape[i];
  os << ']';
  return os.str();
}

// ---------------------------------------------------------------------------
// Tensor

Tensor::Tensor() = default;

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad)
    : impl_(std::make_shared<Storage>()) {
  for (auto d : shape) {
    if (d == 0) throw DimensionError("tensor dimensions must be positive, got " + to_string(shape));
  }
  if (numel(shape) != values.size()) {
    throw DimensionError("shape " + to_string(shape) + " holds " + std::to_string(numel(shape)) +
                         " elements but " + std::to_string(values.size()) + " were given");
  }
  impl_->shape = std::move(shape);
  impl_->values.assign(values.begin(), values.end());
  impl_->requires_grad = requires_grad;
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  const auto n = numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, 0.0), requires_grad);
}

Tensor Tensor::scalar(double value, bool requires_grad) {
  return Tensor(Shape{}, {value}, requires_grad);
}

Tensor Tensor::vector(std::vector<double> values, bool requires_grad) {
  const auto n = values.size();
  return Tensor(Shape{n}, std::move(values), requires_grad);
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                      bool requires_grad) {
  return Tensor(Shape{rows, cols}, std::move(values), requires_grad);
}

const Shape& Tensor::shape() const { return impl_->shape; }
std::size_t Tensor::size() const { return impl_->values.size(); }
std::span<const double> Tensor::values() const { return impl_->values; }
std::span<double> Tensor::mutable_values() { return impl_->values; }

double Tensor::item() const {
  if (size() != 1) throw ContractError("item() on tensor of shape " + to_string(shape()));
  return impl_->values[0];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }
void Tensor::set_requires_grad(bool on) { impl_->requires_grad = on; }
bool Tensor::has_grad() const { return !impl_->grad.empty(); }
std::span<const double> Tensor::grad() const { return impl_->grad; }

std::span<double> Tensor::ensure_grad() const {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->values.size(), 0.0);
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (!impl_->grad.empty()) std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  Tensor copy(impl_->shape, {impl_->values.begin(), impl_->values.end()}, impl_->requires_grad);
  copy.impl_->grad = impl_->grad;
  return copy;
}

// ---------------------------------------------------------------------------
// Tape

void Tape::record(Tensor output, BackwardFn backward) {
  entries_.push_back(Entry{std::move(output), std::move(backward)});
}

std::size_t Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.size() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " +
                        (loss.defined() ? to_string(loss.shape()) : std::string("<undefined>")));
  }
  if (entries_.empty() && !loss.requires_grad()) {
    throw ContractError("backward() on an empty tape with a constant loss");
  }
  for (auto& e : entries_) {
    if (e.output.has_grad()) {
      e.output.zero_grad();
    } else {
      e.output.ensure_grad();
    }
  }
  Tensor seed = loss;
  if (seed.requires_grad()) seed.ensure_grad()[0] += 1.0;
  for (auto it = entries_.rbegin(); it != entries_.rend(); ++it) it->backward();
  return entries_.size();
}

// ---------------------------------------------------------------------------
// Primitives

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape()[1] != b.shape()[0]) shape_error("matmul", a, b);
  const auto m = a.shape()[0];
  const auto p = a.shape()[1];
  const auto n = b.shape()[1];
  std::vector<double> out(m * n);
  MatrixMap(out.data(), m, n).noalias() =
      ConstMatrixMap(a.values().data(), m, p) * ConstMatrixMap(b.values().data(), p, n);
  Tensor result(Shape{m, n}, std::move(out), any_requires_grad(a, b));
  if (result.requires_grad()) {
    tape.record(result, [a, b, result, m, p, n]() mutable {
      ConstMatrixMap g(result.grad().data(), m, n);
      if (a.requires_grad()) {
        MatrixMap(a.ensure_grad().data(), m, p).noalias() +=
            g * ConstMatrixMap(b.values().data(), p, n).transpose();
      }
      if (b.requires_grad()) {
        MatrixMap(b.ensure_grad().data(), p, n).noalias() +=
            ConstMatrixMap(a.values().data(), m, p).transpose() * g;
      }
    });
  }
  return result;
}

Tensor affine(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias) {
  if (x.rank() != 2 || w.rank() != 2 || x.shape()[1] != w.shape()[0]) shape_error("affine", x, w);
  const auto m = x.shape()[0];
  const auto p = x.shape()[1];
  const auto n = w.shape()[1];
  if (bias.size() != n) shape_error("affine", w, bias);
  std::vector<double> out(m * n);
  MatrixMap o(out.data(), m, n);
  o.noalias() = ConstMatrixMap(x.values().data(), m, p) * ConstMatrixMap(w.values().data(), p, n);
  o.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.values().data(), n);
  Tensor result(Shape{m, n}, std::move(out), x.requires_grad() || w.requires_grad() || bias.requires_grad());
  if (result.requires_grad()) {
    tape.record(result, [x, w, bias, result, m, p, n]() mutable {
      ConstMatrixMap g(result.grad().data(), m, n);
      if (x.requires_grad()) {
        MatrixMap(x.ensure_grad().data(), m, p).noalias() +=
            g * ConstMatrixMap(w.values().data(), p, n).transpose();
      }
      if (w.requires_grad()) {
        MatrixMap(w.ensure_grad().data(), p, n).noalias() +=
            ConstMatrixMap(x.values().data(), m, p).transpose() * g;
      }
      if (bias.requires_grad()) {
        Eigen::Map<Eigen::RowVectorXd>(bias.ensure_grad().data(), n) += g.colwise().sum();
      }
    });
  }
  return result;
}

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary(tape, a, b, Binary::add, "add");
}
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary(tape, a, b, Binary::sub, "sub");
}
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  return binary(tape, a, b, Binary::mul, "mul");
}

Tensor scale(Tape& tape, const Tensor& a, double factor) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (auto& v : out) v *= factor;
  Tensor result(a.shape(), std::move(out), any_requires_grad(a));
  if (result.requires_grad()) {
    tape.record(result, [a, result, factor]() mutable {
      auto ga = a.ensure_grad();
      const auto g = result.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += factor * g[i];
    });
  }
  return result;
}

Tensor relu(Tape& tape, const Tensor& a) {
  std::vector<double> out(a.values().begin(), a.values().end());
  for (auto& v : out) v = v > 0.0 ? v : 0.0;
  Tensor result(a.shape(), std::move(out), any_requires_grad(a));
  if (result.requires_grad()) {
    tape.record(result, [a, result]() mutable {
      auto ga = a.ensure_grad();
      const auto g = result.grad();
      const auto av = a.values();
      for (std::size_t i = 0; i < g.size(); ++i) {
        if (av[i] > 0.0) ga[i] += g[i];
      }
    });
  }
  return result;
}

Tensor add_row_bias(Tape& tape, const Tensor& x, const Tensor& bias) {
  if (x.rank() != 2 || bias.size() != x.shape()[1]) shape_error("add_row_bias", x, bias);
  const auto rows = x.shape()[0];
  const auto cols = x.shape()[1];
  std::vector<double> out(x.values().begin(), x.values().end());
  const auto bv = bias.values();
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] += bv[c];
  }
  Tensor result(x.shape(), std::move(out), any_requires_grad(x, bias));
  if (result.requires_grad()) {
    tape.record(result, [x, bias, result, rows, cols]() mutable {
      const auto g = result.grad();
      if (x.requires_grad()) {
        auto gx = x.ensure_grad();
        for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
      }
      if (bias.requires_grad()) {
        auto gb = bias.ensure_grad();
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
        }
      }
    });
  }
  return result;
}

Tensor reshape(Tape& tape, const Tensor& a, Shape shape) {
  if (numel(shape) != a.size()) {
    throw DimensionError("reshape: cannot view " + to_string(a.shape()) + " as " + to_string(shape));
  }
  Tensor result(std::move(shape), std::vector<double>(a.values().begin(), a.values().end()),
                any_requires_grad(a));
  if (result.requires_grad()) {
    tape.record(result, [a, result]() mutable {
      auto ga = a.ensure_grad();
      const auto g = result.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  }
  return result;
}

Tensor sum(Tape& tape, const Tensor& a) {
  double total = 0.0;
  for (double v : a.values()) total += v;
  Tensor result = Tensor::scalar(total, any_requires_grad(a));
  if (result.requires_grad()) {
    tape.record(result, [a, result]() mutable {
      auto ga = a.ensure_grad();
      const double g = result.grad()[0];
      for (auto& v : ga) v += g;
    });
  }
  return result;
}

Tensor mean(Tape& tape, const Tensor& a) {
  return scale(tape, sum(tape, a), 1.0 / static_cast<double>(a.size()));
}

Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2) {
    throw DimensionError("softmax_cross_entropy: logits must be [n x C], got " +
                         to_string(logits.shape()));
  }
  const auto n = logits.shape()[0];
  const auto classes = logits.shape()[1];
  if (labels.size() != n) {
    throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                         " labels for " + std::to_string(n) + " rows");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (labels[i] < 0 || static_cast<std::size_t>(labels[i]) >= classes) {
      throw ValidationError("softmax_cross_entropy: label " + std::to_string(labels[i]) +
                            " at row " + std::to_string(i) + " outside [0, " +
                            std::to_string(classes) + ")");
    }
  }
  auto probs = softmax_rows(logits.values(), classes);
  std::vector<double> losses(n);
  const auto lv = logits.values();
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = lv.data() + i * classes;
    const double top = *std::max_element(row, row + classes);
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(row[c] - top);
    losses[i] = std::log(z) + top - row[labels[i]];
  }
  Tensor result(Shape{n}, std::move(losses), any_requires_grad(logits));
  if (result.requires_grad()) {
    std::vector<int> owned(labels.begin(), labels.end());
    tape.record(result, [logits, result, probs = std::move(probs), owned = std::move(owned), n,
                         classes]() mutable {
      auto gl = logits.ensure_grad();
      const auto g = result.grad();
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t c = 0; c < classes; ++c) {
          const double onehot = static_cast<int>(c) == owned[i] ? 1.0 : 0.0;
          gl[i * classes + c] += g[i] * (probs[i * classes + c] - onehot);
        }
      }
    });
  }
  return result;
}

Tensor mse(Tape& tape, const Tensor& pred, const Tensor& target) {
  if (pred.size() != target.size()) shape_error("mse", pred, target);
  const auto pv = pred.values();
  const auto tv = target.values();
  const auto n = static_cast<double>(pv.size());
  double total = 0.0;
  for (std::size_t i = 0; i < pv.size(); ++i) {
    const double d = pv[i] - tv[i];
    total += d * d;
  }
  Tensor result = Tensor::scalar(total / n, any_requires_grad(pred, target));
  if (result.requires_grad()) {
    tape.record(result, [pred, target, result, n]() mutable {
      const double g = result.grad()[0];
      const auto pv = pred.values();
      const auto tv = target.values();
      if (pred.requires_grad()) {
        auto gp = pred.ensure_grad();
        for (std::size_t i = 0; i < pv.size(); ++i) gp[i] += 2.0 * (pv[i] - tv[i]) / n * g;
      }
      if (target.requires_grad()) {
        auto gt = target.ensure_grad();
        for (std::size_t i = 0; i < pv.size(); ++i) gt[i] -= 2.0 * (pv[i] - tv[i]) / n * g;
      }
    });
  }
  return result;
}

std::vector<double> softmax_rows(std::span<const double> logits, std::size_t cols) {
  std::vector<double> out(logits.size());
  const auto rows = logits.size() / cols;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = logits.data() + r * cols;
    double* dst = out.data() + r * cols;
    const double top = *std::max_element(row, row + cols);
    double z = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      dst[c] = std::exp(row[c] - top);
      z += dst[c];
    }
    for (std::size_t c = 0; c < cols; ++c) dst[c] /= z;
  }
  return out;
}

}  // namespace nestco::ad
