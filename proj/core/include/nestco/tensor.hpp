#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <new>
#include <span>
#include <string>
#include <vector>

namespace nestco::ad {

using Shape = std::vector<std::size_t>;

/// Number of elements described by a shape (1 for the empty scalar shape).
std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

/// 64-byte aligned storage. Vectorized kernels choose their loop peeling from
/// the buffer address, so a fixed alignment keeps results bitwise reproducible
/// from run to run.
template <class T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t alignment{64};
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}
  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), alignment)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, alignment); }
  template <class U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

/// Dense row-major array of doubles with an optional gradient buffer.
///
/// Tensor is a handle: copies share storage, which is what lets a recorded
/// operation accumulate into the gradient of a tensor the caller still holds.
/// Use clone() for an independent copy.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor vector(std::vector<double> values, bool requires_grad = false);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values,
                       bool requires_grad = false);

  bool defined() const noexcept { return static_cast<bool>(impl_); }
  const Shape& shape() const;
  std::size_t size() const;
  std::size_t rank() const { return shape().size(); }
  bool is_scalar() const { return size() == 1; }

  std::span<const double> values() const;
  std::span<double> mutable_values();
  double item() const;
  double operator[](std::size_t i) const { return values()[i]; }

  bool requires_grad() const;
  void set_requires_grad(bool on);

  /// True once a backward pass (or an explicit ensure_grad) allocated the buffer.
  bool has_grad() const;
  std::span<const double> grad() const;
  /// Allocates a zero gradient if absent; used by operation backward rules.
  /// Const because a Tensor is a handle: the buffer lives in shared storage.
  std::span<double> ensure_grad() const;
  void zero_grad();

  Tensor clone() const;
  bool same_storage(const Tensor& other) const noexcept { return impl_ == other.impl_; }

 private:
  struct Storage {
    Shape shape;
    Buffer values;
    Buffer grad;
    bool requires_grad = false;
  };
  std::shared_ptr<Storage> impl_;
};

/// Define-by-run record of differentiable operations.
///
/// Operations append entries in execution order, which is a topological order
/// of the computation. backward() replays the entries in reverse, each once.
/// Only operations with at least one grad-requiring input are recorded.
class Tape {
 public:
  using BackwardFn = std::function<void()>;

  void record(Tensor output, BackwardFn backward);

  /// Seeds d(loss)/d(loss) = 1 and propagates to every grad-requiring tensor.
  /// Intermediate gradients are reset first, so calling twice accumulates
  /// exactly twice the leaf gradients. Returns the number of entries replayed.
  std::size_t backward(const Tensor& loss);

  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  void clear() { entries_.clear(); }

 private:
  struct Entry {
    Tensor output;
    BackwardFn backward;
  };
  std::vector<Entry> entries_;
};

// Primitives. Each validates shapes and throws DimensionError naming them.

/// [m x p] * [p x n] -> [m x n].
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);
/// x [n x p] * w [p x m] + bias [m] in one recorded step.
Tensor affine(Tape& tape, const Tensor& x, const Tensor& w, const Tensor& bias);
/// Elementwise; b may also be a one-element tensor broadcast over a.
Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor sub(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor scale(Tape& tape, const Tensor& a, double factor);
/// relu'(0) is taken as 0.
Tensor relu(Tape& tape, const Tensor& a);
/// x [n x m] plus bias [m] added to every row.
Tensor add_row_bias(Tape& tape, const Tensor& x, const Tensor& bias);
Tensor reshape(Tape& tape, const Tensor& a, Shape shape);
Tensor sum(Tape& tape, const Tensor& a);
Tensor mean(Tape& tape, const Tensor& a);

/// Per-sample -log softmax(logits_i)[label_i] for logits [n x C]; result [n].
Tensor softmax_cross_entropy(Tape& tape, const Tensor& logits, std::span<const int> labels);
/// Mean squared difference of two equal-length tensors; scalar result.
Tensor mse(Tape& tape, const Tensor& pred, const Tensor& target);

/// Row-wise softmax of a [n x C] value array (no tape).
std::vector<double> softmax_rows(std::span<const double> logits, std::size_t cols);

}  // namespace nestco::ad
