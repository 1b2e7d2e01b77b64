// Copyright 2026 The xLSTM-Mixer C++ Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dense row-major tensors with define-by-run reverse-mode differentiation.
//
// A Tensor is a shared handle to an immutable value plus an optional gradient
// buffer. Operations record a backward rule on the thread's active Tape
// whenever at least one operand requires a gradient; without an active tape
// they are plain eager computations. The engine is instantiated for float
// (training) and double (gradient checks and oracles).

#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "xlstm_mixer/errors.hpp"

namespace xlstm_mixer {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

template <typename T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  const void* tape = nullptr;  // producing tape for recorded results, null for leaves

  std::vector<T>& grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

}  // namespace detail

template <typename T>
class Tape;

template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  /// Zero-filled tensor; every dimension must be positive.
  explicit Tensor(Shape shape);
  Tensor(Shape shape, std::vector<T> values);

  static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
  static Tensor filled(Shape shape, T value);
  static Tensor scalar(T value) { return Tensor(Shape{1}, std::vector<T>{value}); }
  /// Uniform entries in [-bound, bound].
  static Tensor uniform(Shape shape, T bound, std::mt19937_64& rng);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const { return data().size(); }

  std::span<const T> data() const;
  /// Writable view for optimizers and loaders. Must not be used while a live
  /// tape references this tensor.
  std::span<T> mutable_data();
  T item() const;
  T at(std::size_t flat_index) const { return data()[flat_index]; }

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  Tensor& set_requires_grad(bool on);
  bool has_grad() const { return impl_ && !impl_->grad.empty(); }
  /// Gradient view; zeros if nothing has been accumulated yet.
  std::span<const T> grad() const;
  std::span<T> mutable_grad();
  void zero_grad();

  /// Deep copy with no gradient and no tape linkage.
  Tensor detach() const;
  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  // Engine internals.
  explicit Tensor(std::shared_ptr<detail::TensorImpl<T>> impl) : impl_(std::move(impl)) {}
  const std::shared_ptr<detail::TensorImpl<T>>& impl() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl<T>> impl_;
};

/// Ordered record of differentiable operations executed on one thread.
///
/// Constructing a Tape makes it the active tape of the calling thread until it
/// is destroyed (tapes nest like scopes). backward() may be called once.
template <typename T>
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  static Tape* active();

  void backward(const Tensor<T>& loss);

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }
  bool non_finite() const { return non_finite_; }
  void flag_non_finite() { non_finite_ = true; }

  void record(std::function<void()> backward_rule) { nodes_.push_back(std::move(backward_rule)); }

 private:
  std::vector<std::function<void()>> nodes_;
  Tape* previous_ = nullptr;
  bool consumed_ = false;
  bool non_finite_ = false;
};

// ---- matrix products -------------------------------------------------------

/// a [m x k] times b [k x n].
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b);
/// a [m x k] times transpose(b) where b is [n x k]; the layout of every linear layer.
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b);
/// x [n x in] -> x * weight^T + bias, weight [out x in], bias [out].
template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias);

// ---- elementwise (numpy-style broadcasting for binary ops) ------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b);
template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
/// Division by an exact zero yields Inf and flags the active tape.
template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b);
/// Elementwise max; on ties the gradient goes to `a`.
template <typename T>
Tensor<T> max2(const Tensor<T>& a, const Tensor<T>& b);

template <typename T>
Tensor<T> neg(const Tensor<T>& a);
template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor);
template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T offset);
template <typename T>
Tensor<T> tanh(const Tensor<T>& a);
template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a);
template <typename T>
Tensor<T> exp(const Tensor<T>& a);
template <typename T>
Tensor<T> log(const Tensor<T>& a);
template <typename T>
Tensor<T> abs(const Tensor<T>& a);
template <typename T>
Tensor<T> sqrt(const Tensor<T>& a);

template <typename T>
Tensor<T> operator+(const Tensor<T>& a, const Tensor<T>& b) { return add(a, b); }
template <typename T>
Tensor<T> operator-(const Tensor<T>& a, const Tensor<T>& b) { return sub(a, b); }
template <typename T>
Tensor<T> operator*(const Tensor<T>& a, const Tensor<T>& b) { return mul(a, b); }
template <typename T>
Tensor<T> operator/(const Tensor<T>& a, const Tensor<T>& b) { return div(a, b); }
template <typename T>
Tensor<T> operator-(const Tensor<T>& a) { return neg(a); }

// ---- reductions (the reduced axis is kept with size 1) -----------------------

template <typename T>
Tensor<T> sum(const Tensor<T>& a, std::size_t axis);
template <typename T>
Tensor<T> mean(const Tensor<T>& a, std::size_t axis);
/// Population variance (divisor n).
template <typename T>
Tensor<T> var_population(const Tensor<T>& a, std::size_t axis);
/// Reductions over every entry, returning shape {1}.
template <typename T>
Tensor<T> sum_all(const Tensor<T>& a);
template <typename T>
Tensor<T> mean_all(const Tensor<T>& a);

// ---- restructuring -----------------------------------------------------------

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis);
/// Entries [begin, end) along `axis`.
template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t begin, std::size_t end);
template <typename T>
Tensor<T> reverse(const Tensor<T>& a, std::size_t axis);
/// Swaps two axes.
template <typename T>
Tensor<T> transpose(const Tensor<T>& a, std::size_t axis0, std::size_t axis1);
/// Matrix transpose of a rank-2 tensor.
template <typename T>
Tensor<T> transpose(const Tensor<T>& a) { return transpose(a, 0, 1); }
template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape);

// ---- regularization ----------------------------------------------------------

/// Inverted dropout; identity when rate == 0.
template <typename T>
Tensor<T> dropout(const Tensor<T>& a, double rate, std::mt19937_64& rng);

}  // namespace xlstm_mixer
