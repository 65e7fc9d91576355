#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "polyseg/check.hpp"

namespace polyseg {

// Dense shape, rank 0..4. Rank-4 tensors are interpreted as N,C,H,W.
// Extents may be zero (an empty tensor), in which case numel() is zero.
struct Shape {
  std::array<int64_t, 4> d{1, 1, 1, 1};
  int rank = 0;

  Shape() = default;
  Shape(std::initializer_list<int64_t> dims) {
    POLYSEG_CHECK(dims.size() <= 4, "shape rank " << dims.size() << " exceeds 4");
    for (int64_t v : dims) {
      POLYSEG_CHECK(v >= 0, "negative extent " << v << " in shape");
      d[static_cast<size_t>(rank++)] = v;
    }
  }

  int64_t numel() const {
    int64_t n = 1;
    for (int i = 0; i < rank; ++i) n *= d[static_cast<size_t>(i)];
    return n;
  }

  int64_t operator[](int i) const { return d[static_cast<size_t>(i)]; }

  bool operator==(const Shape& o) const {
    if (rank != o.rank) return false;
    for (int i = 0; i < rank; ++i) if (d[size_t(i)] != o.d[size_t(i)]) return false;
    return true;
  }
  bool operator!=(const Shape& o) const { return !(*this == o); }

  std::string str() const {
    std::string s = "[";
    for (int i = 0; i < rank; ++i) {
      if (i) s += "x";
      s += std::to_string(d[size_t(i)]);
    }
    return s + "]";
  }
};

// Weight initialization request. Identical (kind, seed, shape) always
// produces bit-identical tensors.
struct InitScheme {
  enum class Kind { zeros, ones, constant, he_normal, uniform };
  Kind kind = Kind::zeros;
  double value = 0.0;             // constant
  double lo = 0.0, hi = 1.0;      // uniform
  int64_t fan_in = 1;             // he_normal: std = sqrt(2 / fan_in)
  uint64_t seed = 0;

  static InitScheme zeros() { return {}; }
  static InitScheme ones() { return {Kind::ones}; }
  static InitScheme constant(double v) { return {Kind::constant, v}; }
  static InitScheme he_normal(int64_t fan_in, uint64_t seed) {
    InitScheme s{Kind::he_normal};
    s.fan_in = fan_in;
    s.seed = seed;
    return s;
  }
  static InitScheme uniform(double lo, double hi, uint64_t seed) {
    InitScheme s{Kind::uniform};
    s.lo = lo;
    s.hi = hi;
    s.seed = seed;
    return s;
  }
};

// Shared-storage tensor handle. Copies alias the same buffer (clone() makes
// a deep copy); this is what lets the backward graph hold references to the
// tensors an op consumed. float is the working precision, double is used
// for gradient checking.
template <class T>
class TensorT {
 public:
  using value_type = T;

  TensorT() = default;
  explicit TensorT(const Shape& shape)
      : st_(std::make_shared<Storage>(Storage{shape, std::vector<T>(size_t(shape.numel()), T(0)), {}, false})) {}
  TensorT(const Shape& shape, std::vector<T> data) {
    POLYSEG_CHECK(int64_t(data.size()) == shape.numel(),
                  "data length " << data.size() << " does not match shape " << shape.str());
    st_ = std::make_shared<Storage>(Storage{shape, std::move(data), {}, false});
  }

  static TensorT zeros(const Shape& shape) { return TensorT(shape); }
  static TensorT full(const Shape& shape, T v) {
    TensorT t(shape);
    for (T& x : t.st_->data) x = v;
    return t;
  }
  static TensorT ones(const Shape& shape) { return full(shape, T(1)); }
  static TensorT scalar(T v) { return TensorT(Shape{}, std::vector<T>{v}); }

  bool defined() const { return st_ != nullptr; }
  const Shape& shape() const { return st_->shape; }
  int rank() const { return st_->shape.rank; }
  int64_t dim(int i) const { return st_->shape[i]; }
  int64_t numel() const { return st_->shape.numel(); }

  std::span<T> data() { return {st_->data.data(), st_->data.size()}; }
  std::span<const T> data() const { return {st_->data.data(), st_->data.size()}; }
  T* data_ptr() { return st_->data.data(); }
  const T* data_ptr() const { return st_->data.data(); }

  bool requires_grad() const { return st_->requires_grad; }
  TensorT& set_requires_grad(bool v) {
    st_->requires_grad = v;
    return *this;
  }

  bool has_grad() const { return !st_->grad.empty(); }
  // Allocates a zero gradient buffer on first use.
  void ensure_grad() {
    if (st_->grad.empty()) st_->grad.assign(st_->data.size(), T(0));
  }
  void zero_grad() {
    for (T& g : st_->grad) g = T(0);
  }
  std::span<T> grad() {
    ensure_grad();
    return {st_->grad.data(), st_->grad.size()};
  }
  std::span<const T> grad() const { return {st_->grad.data(), st_->grad.size()}; }
  T* grad_ptr() {
    ensure_grad();
    return st_->grad.data();
  }

  // Value of a 0-d / 1-element tensor.
  T item() const {
    POLYSEG_CHECK(numel() == 1, "item() on tensor of shape " << shape().str());
    return st_->data[0];
  }

  // Element access by multi-index (tests and glue code; hot loops use spans).
  T& at(std::initializer_list<int64_t> idx) {
    return st_->data[size_t(offset(idx))];
  }
  T at(std::initializer_list<int64_t> idx) const {
    return st_->data[size_t(offset(idx))];
  }

  TensorT clone() const {
    TensorT t;
    t.st_ = std::make_shared<Storage>(*st_);
    return t;
  }

  // Same-shape storage-level copy of values (keeps aliases intact).
  void copy_values_from(const TensorT& src) {
    POLYSEG_CHECK(shape() == src.shape(), "copy between shapes " << shape().str() << " and "
                                                                 << src.shape().str());
    st_->data = src.st_->data;
  }

  // Identity of the underlying buffer; used by the backward graph.
  const void* id() const { return st_.get(); }

 private:
  struct Storage {
    Shape shape;
    std::vector<T> data;
    std::vector<T> grad;  // empty until ensure_grad()
    bool requires_grad;
  };

  int64_t offset(std::initializer_list<int64_t> idx) const {
    POLYSEG_CHECK(int(idx.size()) == rank(), "index rank " << idx.size() << " vs tensor rank " << rank());
    int64_t off = 0;
    int i = 0;
    for (int64_t v : idx) {
      POLYSEG_CHECK(v >= 0 && v < dim(i), "index " << v << " out of range for dim " << i
                                                   << " of " << shape().str());
      off = off * dim(i) + v;
      ++i;
    }
    return off;
  }

  std::shared_ptr<Storage> st_;
};

// Deterministic tensor construction from an InitScheme.
template <class T>
TensorT<T> tensor_init(const Shape& shape, const InitScheme& scheme);

// Ordered record of executed differentiable ops. Ops append themselves in
// execution order, so the record is topologically sorted by construction;
// backward() walks it once in reverse, visiting only ops the loss depends on.
template <class T>
class TapeT {
 public:
  TapeT() = default;
  TapeT(const TapeT&) = delete;
  TapeT& operator=(const TapeT&) = delete;

  void record(std::vector<TensorT<T>> inputs, TensorT<T> output, std::function<void()> backward_fn) {
    nodes_.push_back(Node{std::move(inputs), std::move(output), std::move(backward_fn)});
  }

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every
  // requires_grad tensor reachable from the loss. Tensors on the tape that
  // do not contribute end up with zero gradients. Repeated calls accumulate.
  void backward(TensorT<T> loss);

  std::size_t size() const { return nodes_.size(); }

  static TapeT* current() { return current_; }

  // RAII scope that makes this tape the recording target for ops executed
  // on the current thread.
  class Scope {
   public:
    explicit Scope(TapeT& tape) : prev_(current_) { current_ = &tape; }
    ~Scope() { current_ = prev_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    TapeT* prev_;
  };

 private:
  struct Node {
    std::vector<TensorT<T>> inputs;
    TensorT<T> output;
    std::function<void()> backward_fn;
  };

  std::vector<Node> nodes_;
  static inline thread_local TapeT* current_ = nullptr;
};

using Tensor = TensorT<float>;
using Tape = TapeT<float>;

}  // namespace polyseg
