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

#include "xlstm_mixer/tensor.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <utility>

namespace xlstm_mixer {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace {

template <typename T>
using ImplPtr = std::shared_ptr<detail::TensorImpl<T>>;

template <typename T>
thread_local Tape<T>* g_active_tape = nullptr;

void validate_shape(const Shape& shape) {
  if (shape.empty()) throw ShapeError("tensor shape must have at least one dimension");
  for (std::size_t d : shape) {
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_to_string(shape));
  }
}

template <typename T>
ImplPtr<T> make_impl(Shape shape, std::vector<T> data) {
  auto impl = std::make_shared<detail::TensorImpl<T>>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  return impl;
}

template <typename T>
ImplPtr<T> make_impl(Shape shape) {
  const std::size_t n = shape_numel(shape);
  return make_impl<T>(std::move(shape), std::vector<T>(n, T(0)));
}

// Returns the active tape if the result of an op over these operands must be recorded.
template <typename T>
Tape<T>* recording_tape(std::initializer_list<const Tensor<T>*> operands) {
  Tape<T>* tape = g_active_tape<T>;
  if (tape == nullptr) return nullptr;
  for (const Tensor<T>* t : operands) {
    if (t->requires_grad()) return tape;
  }
  return nullptr;
}

template <typename T>
void check_finite_debug([[maybe_unused]] const detail::TensorImpl<T>& out) {
#ifndef NDEBUG
  if (Tape<T>* tape = g_active_tape<T>) {
    for (T v : out.data) {
      if (!std::isfinite(v)) {
        tape->flag_non_finite();
        break;
      }
    }
  }
#endif
}

template <typename T>
Tensor<T> finish(ImplPtr<T> out, Tape<T>* tape, std::function<void()> rule) {
  check_finite_debug(*out);
  if (tape != nullptr) {
    out->requires_grad = true;
    out->tape = tape;
    tape->record(std::move(rule));
  }
  return Tensor<T>(std::move(out));
}

template <typename T>
const ImplPtr<T>& checked(const Tensor<T>& t, const char* op) {
  if (!t.defined()) throw std::invalid_argument(std::string(op) + ": undefined tensor operand");
  return t.impl();
}

// ---- broadcasting -------------------------------------------------------------

struct BroadcastPlan {
  enum class Kind { kSame, kScalarB, kScalarA, kTrailingB, kTrailingA, kGeneral };
  Kind kind = Kind::kGeneral;
  Shape out;
  std::vector<std::size_t> a_strides;
  std::vector<std::size_t> b_strides;
  std::size_t a_numel = 0;
  std::size_t b_numel = 0;
};

Shape strip_leading_ones(const Shape& s) {
  std::size_t k = 0;
  while (k + 1 < s.size() && s[k] == 1) ++k;
  return Shape(s.begin() + static_cast<std::ptrdiff_t>(k), s.end());
}

bool is_trailing_of(const Shape& small, const Shape& big) {
  const Shape s = strip_leading_ones(small);
  if (s.size() > big.size()) return false;
  return std::equal(s.begin(), s.end(), big.end() - static_cast<std::ptrdiff_t>(s.size()));
}

std::vector<std::size_t> broadcast_strides(const Shape& in, const Shape& out) {
  const std::size_t rank = out.size();
  std::vector<std::size_t> strides(rank, 0);
  std::size_t stride = 1;
  for (std::size_t k = 0; k < in.size(); ++k) {
    const std::size_t d_in = in.size() - 1 - k;
    const std::size_t d_out = rank - 1 - k;
    strides[d_out] = in[d_in] == 1 ? 0 : stride;
    stride *= in[d_in];
  }
  return strides;
}

BroadcastPlan plan_broadcast(const Shape& a, const Shape& b, const char* op) {
  BroadcastPlan plan;
  plan.a_numel = shape_numel(a);
  plan.b_numel = shape_numel(b);
  const std::size_t rank = std::max(a.size(), b.size());
  plan.out.assign(rank, 1);
  for (std::size_t k = 0; k < rank; ++k) {
    const std::size_t da = k < a.size() ? a[a.size() - 1 - k] : 1;
    const std::size_t db = k < b.size() ? b[b.size() - 1 - k] : 1;
    if (da != db && da != 1 && db != 1) {
      throw ShapeError(std::string(op) + ": shapes " + shape_to_string(a) + " and " +
                       shape_to_string(b) + " are not broadcastable");
    }
    plan.out[rank - 1 - k] = std::max(da, db);
  }
  const std::size_t n = shape_numel(plan.out);
  if (a == b) {
    plan.kind = BroadcastPlan::Kind::kSame;
  } else if (plan.b_numel == 1 && plan.a_numel == n) {
    plan.kind = BroadcastPlan::Kind::kScalarB;
  } else if (plan.a_numel == 1 && plan.b_numel == n) {
    plan.kind = BroadcastPlan::Kind::kScalarA;
  } else if (plan.a_numel == n && is_trailing_of(b, plan.out)) {
    plan.kind = BroadcastPlan::Kind::kTrailingB;
  } else if (plan.b_numel == n && is_trailing_of(a, plan.out)) {
    plan.kind = BroadcastPlan::Kind::kTrailingA;
  } else {
    plan.kind = BroadcastPlan::Kind::kGeneral;
    plan.a_strides = broadcast_strides(a, plan.out);
    plan.b_strides = broadcast_strides(b, plan.out);
  }
  return plan;
}

// Calls f(out_index, a_index, b_index) for every output element in order.
template <typename F>
void for_each_broadcast(const BroadcastPlan& plan, F&& f) {
  const std::size_t n = shape_numel(plan.out);
  switch (plan.kind) {
    case BroadcastPlan::Kind::kSame:
      for (std::size_t i = 0; i < n; ++i) f(i, i, i);
      return;
    case BroadcastPlan::Kind::kScalarB:
      for (std::size_t i = 0; i < n; ++i) f(i, i, std::size_t{0});
      return;
    case BroadcastPlan::Kind::kScalarA:
      for (std::size_t i = 0; i < n; ++i) f(i, std::size_t{0}, i);
      return;
    case BroadcastPlan::Kind::kTrailingB:
      for (std::size_t i = 0; i < n;) {
        for (std::size_t j = 0; j < plan.b_numel; ++j, ++i) f(i, i, j);
      }
      return;
    case BroadcastPlan::Kind::kTrailingA:
      for (std::size_t i = 0; i < n;) {
        for (std::size_t j = 0; j < plan.a_numel; ++j, ++i) f(i, j, i);
      }
      return;
    case BroadcastPlan::Kind::kGeneral:
      break;
  }
  const std::size_t rank = plan.out.size();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t o = 0; o < n; ++o) {
    f(o, ia, ib);
    for (std::size_t k = rank; k-- > 0;) {
      ++idx[k];
      ia += plan.a_strides[k];
      ib += plan.b_strides[k];
      if (idx[k] < plan.out[k]) break;
      ia -= plan.a_strides[k] * plan.out[k];
      ib -= plan.b_strides[k] * plan.out[k];
      idx[k] = 0;
    }
  }
}

// Forward: out = fwd(a, b). Backward: bwd(a, b, out, g, da, db) writes partial contributions.
template <typename T, typename Fwd, typename Bwd>
Tensor<T> binary_op(const Tensor<T>& a, const Tensor<T>& b, const char* name, Fwd fwd, Bwd bwd) {
  const auto& ai = checked(a, name);
  const auto& bi = checked(b, name);
  const BroadcastPlan plan = plan_broadcast(ai->shape, bi->shape, name);
  auto out = make_impl<T>(plan.out);
  {
    const T* pa = ai->data.data();
    const T* pb = bi->data.data();
    T* po = out->data.data();
    for_each_broadcast(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) { po[o] = fwd(pa[ia], pb[ib]); });
  }
  Tape<T>* tape = recording_tape<T>({&a, &b});
  if (tape == nullptr) return finish<T>(std::move(out), nullptr, {});
  auto rule = [out, ai, bi, plan, bwd]() {
    if (out->grad.empty()) return;
    T* ga = ai->requires_grad ? ai->grad_buffer().data() : nullptr;
    T* gb = bi->requires_grad ? bi->grad_buffer().data() : nullptr;
    const T* pa = ai->data.data();
    const T* pb = bi->data.data();
    const T* po = out->data.data();
    const T* g = out->grad.data();
    for_each_broadcast(plan, [&](std::size_t o, std::size_t ia, std::size_t ib) {
      T da = T(0);
      T db = T(0);
      bwd(pa[ia], pb[ib], po[o], g[o], da, db);
      if (ga) ga[ia] += da;
      if (gb) gb[ib] += db;
    });
  };
  return finish<T>(std::move(out), tape, std::move(rule));
}

// Backward: deriv(x, y) gives dy/dx.
template <typename T, typename Fwd, typename Deriv>
Tensor<T> unary_op(const Tensor<T>& a, const char* name, Fwd fwd, Deriv deriv) {
  const auto& ai = checked(a, name);
  auto out = make_impl<T>(ai->shape);
  const std::size_t n = ai->data.size();
  for (std::size_t i = 0; i < n; ++i) out->data[i] = fwd(ai->data[i]);
  Tape<T>* tape = recording_tape<T>({&a});
  if (tape == nullptr) return finish<T>(std::move(out), nullptr, {});
  auto rule = [out, ai, deriv]() {
    if (out->grad.empty()) return;
    auto& ga = ai->grad_buffer();
    const std::size_t m = ga.size();
    for (std::size_t i = 0; i < m; ++i) ga[i] += out->grad[i] * deriv(ai->data[i], out->data[i]);
  };
  return finish<T>(std::move(out), tape, std::move(rule));
}

template <typename T>
using RowMatrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MatrixView = Eigen::Map<RowMatrix<T>>;
template <typename T>
using ConstMatrixView = Eigen::Map<const RowMatrix<T>>;

// outer x axis x inner decomposition of a shape around `axis`.
struct AxisSplit {
  std::size_t outer = 1;
  std::size_t length = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& s, std::size_t axis) {
  AxisSplit r;
  for (std::size_t k = 0; k < axis; ++k) r.outer *= s[k];
  r.length = s[axis];
  for (std::size_t k = axis + 1; k < s.size(); ++k) r.inner *= s[k];
  return r;
}

void check_axis(const Shape& s, std::size_t axis, const char* op) {
  if (axis >= s.size()) {
    throw ShapeError(std::string(op) + ": axis " + std::to_string(axis) + " out of range for shape " +
                     shape_to_string(s));
  }
}

enum class ReduceKind { kSum, kMean, kVar };

template <typename T>
Tensor<T> reduce_axis(const Tensor<T>& a, std::size_t axis, ReduceKind kind, const char* name) {
  const auto& ai = checked(a, name);
  check_axis(ai->shape, axis, name);
  const AxisSplit sp = split_axis(ai->shape, axis);
  if (sp.length == 0) throw ShapeError(std::string(name) + ": empty reduction axis");
  Shape out_shape = ai->shape;
  out_shape[axis] = 1;
  auto out = make_impl<T>(out_shape);
  // Means are kept for the variance backward rule.
  std::vector<T> means;
  if (kind == ReduceKind::kVar) means.assign(sp.outer * sp.inner, T(0));
  const T inv_n = T(1) / static_cast<T>(sp.length);
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t i = 0; i < sp.inner; ++i) {
      const T* base = ai->data.data() + o * sp.length * sp.inner + i;
      T acc = T(0);
      for (std::size_t k = 0; k < sp.length; ++k) acc += base[k * sp.inner];
      T result = acc;
      if (kind != ReduceKind::kSum) result = acc * inv_n;
      if (kind == ReduceKind::kVar) {
        const T mu = result;
        means[o * sp.inner + i] = mu;
        T sq = T(0);
        for (std::size_t k = 0; k < sp.length; ++k) {
          const T d = base[k * sp.inner] - mu;
          sq += d * d;
        }
        result = sq * inv_n;
      }
      out->data[o * sp.inner + i] = result;
    }
  }
  Tape<T>* tape = recording_tape<T>({&a});
  if (tape == nullptr) return finish<T>(std::move(out), nullptr, {});
  auto rule = [out, ai, sp, kind, inv_n, means = std::move(means)]() {
    if (out->grad.empty()) return;
    auto& ga = ai->grad_buffer();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        const T g = out->grad[o * sp.inner + i];
        const std::size_t base = o * sp.length * sp.inner + i;
        for (std::size_t k = 0; k < sp.length; ++k) {
          const std::size_t idx = base + k * sp.inner;
          switch (kind) {
            case ReduceKind::kSum:
              ga[idx] += g;
              break;
            case ReduceKind::kMean:
              ga[idx] += g * inv_n;
              break;
            case ReduceKind::kVar:
              ga[idx] += g * T(2) * (ai->data[idx] - means[o * sp.inner + i]) * inv_n;
              break;
          }
        }
      }
    }
  };
  return finish<T>(std::move(out), tape, std::move(rule));
}

}  // namespace

// ---- Tensor -------------------------------------------------------------------------

template <typename T>
Tensor<T>::Tensor(Shape shape) {
  validate_shape(shape);
  impl_ = make_impl<T>(std::move(shape));
}

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) {
  validate_shape(shape);
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("tensor of shape " + shape_to_string(shape) + " cannot hold " + std::to_string(values.size()) +
                     " values");
  }
  impl_ = make_impl<T>(std::move(shape), std::move(values));
}

template <typename T>
Tensor<T> Tensor<T>::filled(Shape shape, T value) {
  Tensor t(std::move(shape));
  std::fill(t.impl_->data.begin(), t.impl_->data.end(), value);
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::uniform(Shape shape, T bound, std::mt19937_64& rng) {
  Tensor t(std::move(shape));
  std::uniform_real_distribution<double> dist(-static_cast<double>(bound), static_cast<double>(bound));
  for (T& v : t.impl_->data) v = static_cast<T>(dist(rng));
  return t;
}

template <typename T>
const Shape& Tensor<T>::shape() const {
  if (!impl_) throw std::logic_error("shape() of an undefined tensor");
  return impl_->shape;
}

template <typename T>
std::size_t Tensor<T>::dim(std::size_t axis) const {
  const Shape& s = shape();
  if (axis >= s.size()) throw ShapeError("dim(" + std::to_string(axis) + ") of shape " + shape_to_string(s));
  return s[axis];
}

template <typename T>
std::span<const T> Tensor<T>::data() const {
  if (!impl_) return {};
  return std::span<const T>(impl_->data);
}

template <typename T>
std::span<T> Tensor<T>::mutable_data() {
  if (!impl_) return {};
  return std::span<T>(impl_->data);
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item() requires a single-element tensor, got " + shape_to_string(shape()));
  return impl_->data[0];
}

template <typename T>
Tensor<T>& Tensor<T>::set_requires_grad(bool on) {
  if (!impl_) throw std::logic_error("set_requires_grad on an undefined tensor");
  impl_->requires_grad = on;
  return *this;
}

template <typename T>
std::span<const T> Tensor<T>::grad() const {
  if (!impl_) return {};
  return std::span<const T>(impl_->grad_buffer());
}

template <typename T>
std::span<T> Tensor<T>::mutable_grad() {
  if (!impl_) return {};
  return std::span<T>(impl_->grad_buffer());
}

template <typename T>
void Tensor<T>::zero_grad() {
  if (impl_) std::fill(impl_->grad.begin(), impl_->grad.end(), T(0));
}

template <typename T>
Tensor<T> Tensor<T>::detach() const {
  if (!impl_) return {};
  return Tensor<T>(make_impl<T>(impl_->shape, impl_->data));
}

// ---- Tape ---------------------------------------------------------------------------

template <typename T>
Tape<T>::Tape() : previous_(g_active_tape<T>) {
  g_active_tape<T> = this;
}

template <typename T>
Tape<T>::~Tape() {
  if (g_active_tape<T> == this) g_active_tape<T> = previous_;
}

template <typename T>
Tape<T>* Tape<T>::active() {
  return g_active_tape<T>;
}

template <typename T>
void Tape<T>::backward(const Tensor<T>& loss) {
  if (consumed_) throw std::logic_error("backward called twice on the same tape");
  if (!loss.defined()) throw std::invalid_argument("backward: undefined loss tensor");
  if (loss.numel() != 1) throw ShapeError("backward: loss must be a scalar, got " + shape_to_string(loss.shape()));
  if (loss.impl()->tape != this) throw std::invalid_argument("backward: loss was not produced on this tape");
  consumed_ = true;
  loss.impl()->grad_buffer()[0] += T(1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
}

// ---- matrix products -------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  const auto& ai = checked(a, "matmul");
  const auto& bi = checked(b, "matmul");
  if (ai->shape.size() != 2 || bi->shape.size() != 2 || ai->shape[1] != bi->shape[0]) {
    throw ShapeError("matmul: incompatible shapes " + shape_to_string(ai->shape) + " and " +
                     shape_to_string(bi->shape));
  }
  const auto m = static_cast<Eigen::Index>(ai->shape[0]);
  const auto k = static_cast<Eigen::Index>(ai->shape[1]);
  const auto n = static_cast<Eigen::Index>(bi->shape[1]);
  auto out = make_impl<T>(Shape{ai->shape[0], bi->shape[1]});
  MatrixView<T>(out->data.data(), m, n).noalias() =
      ConstMatrixView<T>(ai->data.data(), m, k) * ConstMatrixView<T>(bi->data.data(), k, n);
  Tape<T>* tape = recording_tape<T>({&a, &b});
  if (tape == nullptr) return finish<T>(std::move(out), nullptr, {});
  auto rule = [out, ai, bi, m, k, n]() {
    if (out->grad.empty()) return;
    ConstMatrixView<T> g(out->grad.data(), m, n);
    if (ai->requires_grad) {
      MatrixView<T>(ai->grad_buffer().data(), m, k).noalias() +=
          g * ConstMatrixView<T>(bi->data.data(), k, n).transpose();
    }
    if (bi->requires_grad) {
      MatrixView<T>(bi->grad_buffer().data(), k, n).noalias() +=
          ConstMatrixView<T>(ai->data.data(), m, k).transpose() * g;
    }
  };
  return finish<T>(std::move(out), tape, std::move(rule));
}

template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
  const auto& ai = checked(a, "matmul_nt");
  const auto& bi = checked(b, "matmul_nt");
  if (ai->shape.size() != 2 || bi->shape.size() != 2 || ai->shape[1] != bi->shape[1]) {
    throw ShapeError("matmul_nt: incompatible shapes " + shape_to_string(ai->shape) + " and transpose of " +
                     shape_to_string(bi->shape));
  }
  const auto m = static_cast<Eigen::Index>(ai->shape[0]);
  const auto k = static_cast<Eigen::Index>(ai->shape[1]);
  const auto n = static_cast<Eigen::Index>(bi->shape[0]);
  auto out = make_impl<T>(Shape{ai->shape[0], bi->shape[0]});
  MatrixView<T>(out->data.data(), m, n).noalias() =
      ConstMatrixView<T>(ai->data.data(), m, k) * ConstMatrixView<T>(bi->data.data(), n, k).transpose();
  Tape<T>* tape = recording_tape<T>({&a, &b});
  if (tape == nullptr) return finish<T>(std::move(out), nullptr, {});
  auto rule = [out, ai, bi, m, k, n]() {
    if (out->grad.empty()) return;
    ConstMatrixView<T> g(out->grad.data(), m, n);
    if (ai->requires_grad) {
      MatrixView<T>(ai->grad_buffer().data(), m, k).noalias() += g * ConstMatrixView<T>(bi->data.data(), n, k);
    }
    if (bi->requires_grad) {
      MatrixView<T>(bi->grad_buffer().data(), n, k).noalias() +=
          g.transpose() * ConstMatrixView<T>(ai->data.data(), m, k);
    }
  };
  return finish<T>(std::move(out), tape, std::move(rule));
}

template <typename T>
Tensor<T> linear(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias) {
  return add(matmul_nt(x, weight), bias);
}

// ---- elementwise -------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, "add", [](T x, T y) { return x + y; },
      [](T, T, T, T g, T& da, T& db) {
        da = g;
        db = g;
      });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, "sub", [](T x, T y) { return x - y; },
      [](T, T, T, T g, T& da, T& db) {
        da = g;
        db = -g;
      });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, "mul", [](T x, T y) { return x * y; },
      [](T x, T y, T, T g, T& da, T& db) {
        da = g * y;
        db = g * x;
      });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
  const bool has_zero = b.defined() && std::any_of(b.data().begin(), b.data().end(), [](T v) { return v == T(0); });
  Tensor<T> out = binary_op(
      a, b, "div", [](T x, T y) { return x / y; },
      [](T, T y, T q, T g, T& da, T& db) {
        da = g / y;
        db = -g * q / y;
      });
  if (has_zero) {
    if (Tape<T>* tape = Tape<T>::active()) tape->flag_non_finite();
  }
  return out;
}

template <typename T>
Tensor<T> max2(const Tensor<T>& a, const Tensor<T>& b) {
  return binary_op(
      a, b, "max2", [](T x, T y) { return x >= y ? x : y; },
      [](T x, T y, T, T g, T& da, T& db) {
        if (x >= y) {
          da = g;
        } else {
          db = g;
        }
      });
}

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
  return unary_op(a, "neg", [](T x) { return -x; }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T factor) {
  return unary_op(a, "scale", [factor](T x) { return factor * x; }, [factor](T, T) { return factor; });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T offset) {
  return unary_op(a, "add_scalar", [offset](T x) { return x + offset; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& a) {
  return unary_op(a, "tanh", [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
  return unary_op(
      a, "sigmoid",
      [](T x) {
        if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
        const T e = std::exp(x);
        return e / (T(1) + e);
      },
      [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  return unary_op(a, "exp", [](T x) { return std::exp(x); }, [](T, T y) { return y; });
}

template <typename T>
Tensor<T> log(const Tensor<T>& a) {
  return unary_op(a, "log", [](T x) { return std::log(x); }, [](T x, T) { return T(1) / x; });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
  return unary_op(
      a, "abs", [](T x) { return std::abs(x); },
      [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> sqrt(const Tensor<T>& a) {
  return unary_op(a, "sqrt", [](T x) { return std::sqrt(x); }, [](T, T y) { return T(0.5) / y; });
}

// ---- reductions ----------------------------------------------------------------------

template <typename T>
Tensor<T> sum(const Tensor<T>& a, std::size_t axis) {
  return reduce_axis(a, axis, ReduceKind::kSum, "sum");
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a, std::size_t axis) {
  return reduce_axis(a, axis, ReduceKind::kMean, "mean");
}

template <typename T>
Tensor<T> var_population(const Tensor<T>& a, std::size_t axis) {
  return reduce_axis(a, axis, ReduceKind::kVar, "var_population");
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
  return sum(reshape(a, Shape{a.numel()}), 0);
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
  return mean(reshape(a, Shape{a.numel()}), 0);
}

// ---- restructuring -----------------------------------------------------------------

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
  if (parts.empty()) throw std::invalid_argument("concat: no operands");
  const Shape& first = checked(parts.front(), "concat")->shape;
  check_axis(first, axis, "concat");
  Shape out_shape = first;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = checked(p, "concat")->shape;
    bool ok = s.size() == first.size();
    for (std::size_t k = 0; ok && k < s.size(); ++k) ok = k == axis || s[k] == first[k];
    if (!ok) {
      throw ShapeError("concat: shape " + shape_to_string(s) + " incompatible with " + shape_to_string(first) +
                       " along axis " + std::to_string(axis));
    }
    out_shape[axis] += s[axis];
  }
  auto out = make_impl<T>(out_shape);
  const AxisSplit osp = split_axis(out_shape, axis);
  std::vector<std::size_t> offsets;
  offsets.reserve(parts.size());
  std::size_t offset = 0;
  for (const auto& p : parts) {
    offsets.push_back(offset);
    const std::size_t len = p.shape()[axis];
    const std::size_t block = len * osp.inner;
    const T* src = p.impl()->data.data();
    for (std::size_t o = 0; o < osp.outer; ++o) {
      std::copy_n(src + o * block, block, out->data.data() + o * osp.length * osp.inner + offset * osp.inner);
    }
    offset += len;
  }
  bool any_grad = false;
  for (const auto& p : parts) any_grad = any_grad || p.requires_grad();
  Tape<T>* tape = any_grad ? Tape<T>::active() : nullptr;
  if (tape == nullptr) return finish<T>(std::move(out), nullptr, {});
  std::vector<ImplPtr<T>> impls;
  impls.reserve(parts.size());
  for (const auto& p : parts) impls.push_back(p.impl());
  auto rule = [out, impls = std::move(impls), offsets = std::move(offsets), osp, axis]() {
    if (out->grad.empty()) return;
    for (std::size_t p = 0; p < impls.size(); ++p) {
      if (!impls[p]->requires_grad) continue;
      auto& g = impls[p]->grad_buffer();
      const std::size_t block = impls[p]->shape[axis] * osp.inner;
      for (std::size_t o = 0; o < osp.outer; ++o) {
        const T* src = out->grad.data() + o * osp.length * osp.inner + offsets[p] * osp.inner;
        T* dst = g.data() + o * block;
        for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
      }
    }
  };
  return finish<T>(std::move(out), tape, std::move(rule));
}

template <typename T>
Tensor<T> slice(const Tensor<T>& a, std::size_t axis, std::size_t begin, std::size_t end) {
  const auto& ai = checked(a, "slice");
  check_axis(ai->shape, axis, "slice");
  if (begin >= end || end > ai->shape[axis]) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) +
                     ") out of bounds for axis " + std::to_string(axis) + " of shape " + shape_to_string(ai->shape));
  }
  const AxisSplit sp = split_axis(ai->shape, axis);
  Shape out_shape = ai->shape;
  out_shape[axis] = end - begin;
  auto out = make_impl<T>(out_shape);
  const std::size_t block = (end - begin) * sp.inner;
  for (std::size_t o = 0; o < sp.outer; ++o) {
    std::copy_n(ai->data.data() + o * sp.length * sp.inner + begin * sp.inner, block, out->data.data() + o * block);
  }
  Tape<T>* tape = recording_tape<T>({&a});
  if (tape == nullptr) return finish<T>(std::move(out), nullptr, {});
  auto rule = [out, ai, sp, begin, block]() {
    if (out->grad.empty()) return;
    auto& g = ai->grad_buffer();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      T* dst = g.data() + o * sp.length * sp.inner + begin * sp.inner;
      const T* src = out->grad.data() + o * block;
      for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
    }
  };
  return finish<T>(std::move(out), tape, std::move(rule));
}

template <typename T>
Tensor<T> reverse(const Tensor<T>& a, std::size_t axis) {
  const auto& ai = checked(a, "reverse");
  check_axis(ai->shape, axis, "reverse");
  const AxisSplit sp = split_axis(ai->shape, axis);
  auto out = make_impl<T>(ai->shape);
  auto src_index = [sp](std::size_t o, std::size_t k, std::size_t i) {
    return (o * sp.length + (sp.length - 1 - k)) * sp.inner + i;
  };
  for (std::size_t o = 0; o < sp.outer; ++o) {
    for (std::size_t k = 0; k < sp.length; ++k) {
      for (std::size_t i = 0; i < sp.inner; ++i) {
        out->data[(o * sp.length + k) * sp.inner + i] = ai->data[src_index(o, k, i)];
      }
    }
  }
  Tape<T>* tape = recording_tape<T>({&a});
  if (tape == nullptr) return finish<T>(std::move(out), nullptr, {});
  auto rule = [out, ai, sp, src_index]() {
    if (out->grad.empty()) return;
    auto& g = ai->grad_buffer();
    for (std::size_t o = 0; o < sp.outer; ++o) {
      for (std::size_t k = 0; k < sp.length; ++k) {
        for (std::size_t i = 0; i < sp.inner; ++i) {
          g[src_index(o, k, i)] += out->grad[(o * sp.length + k) * sp.inner + i];
        }
      }
    }
  };
  return finish<T>(std::move(out), tape, std::move(rule));
}

template <typename T>
Tensor<T> transpose(const Tensor<T>& a, std::size_t axis0, std::size_t axis1) {
  const auto& ai = checked(a, "transpose");
  check_axis(ai->shape, axis0, "transpose");
  check_axis(ai->shape, axis1, "transpose");
  const Shape& in = ai->shape;
  const std::size_t rank = in.size();
  Shape out_shape = in;
  std::swap(out_shape[axis0], out_shape[axis1]);
  std::vector<std::size_t> in_strides(rank, 1);
  for (std::size_t k = rank - 1; k-- > 0;) in_strides[k] = in_strides[k + 1] * in[k + 1];
  // Stride into the input for each output axis.
  std::vector<std::size_t> strides = in_strides;
  std::swap(strides[axis0], strides[axis1]);
  // Flat source index for each output position; shared by forward and backward.
  const std::size_t n = ai->data.size();
  std::vector<std::size_t> source(n);
  {
    std::vector<std::size_t> idx(rank, 0);
    std::size_t src = 0;
    for (std::size_t o = 0; o < n; ++o) {
      source[o] = src;
      for (std::size_t k = rank; k-- > 0;) {
        ++idx[k];
        src += strides[k];
        if (idx[k] < out_shape[k]) break;
        src -= strides[k] * out_shape[k];
        idx[k] = 0;
      }
    }
  }
  auto out = make_impl<T>(out_shape);
  for (std::size_t o = 0; o < n; ++o) out->data[o] = ai->data[source[o]];
  Tape<T>* tape = recording_tape<T>({&a});
  if (tape == nullptr) return finish<T>(std::move(out), nullptr, {});
  auto rule = [out, ai, source = std::move(source)]() {
    if (out->grad.empty()) return;
    auto& g = ai->grad_buffer();
    for (std::size_t o = 0; o < source.size(); ++o) g[source[o]] += out->grad[o];
  };
  return finish<T>(std::move(out), tape, std::move(rule));
}

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape shape) {
  const auto& ai = checked(a, "reshape");
  validate_shape(shape);
  if (shape_numel(shape) != ai->data.size()) {
    throw ShapeError("reshape: cannot view " + shape_to_string(ai->shape) + " as " + shape_to_string(shape));
  }
  auto out = make_impl<T>(std::move(shape), ai->data);
  Tape<T>* tape = recording_tape<T>({&a});
  if (tape == nullptr) return finish<T>(std::move(out), nullptr, {});
  auto rule = [out, ai]() {
    if (out->grad.empty()) return;
    auto& g = ai->grad_buffer();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += out->grad[i];
  };
  return finish<T>(std::move(out), tape, std::move(rule));
}

template <typename T>
Tensor<T> dropout(const Tensor<T>& a, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw std::invalid_argument("dropout: rate must lie in [0, 1)");
  if (rate == 0.0) return a;
  std::bernoulli_distribution keep(1.0 - rate);
  const T kept = static_cast<T>(1.0 / (1.0 - rate));
  Tensor<T> mask(a.shape());
  for (T& v : mask.mutable_data()) v = keep(rng) ? kept : T(0);
  return mul(a, mask);
}

// ---- explicit instantiation --------------------------------------------------------

#define XLSTM_MIXER_INSTANTIATE(T)                                                          \
  template class Tensor<T>;                                                                 \
  template class Tape<T>;                                                                   \
  template Tensor<T> matmul(const Tensor<T>&, const Tensor<T>&);                            \
  template Tensor<T> matmul_nt(const Tensor<T>&, const Tensor<T>&);                         \
  template Tensor<T> linear(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);          \
  template Tensor<T> add(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> sub(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> mul(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> div(const Tensor<T>&, const Tensor<T>&);                               \
  template Tensor<T> max2(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> neg(const Tensor<T>&);                                                 \
  template Tensor<T> scale(const Tensor<T>&, T);                                            \
  template Tensor<T> add_scalar(const Tensor<T>&, T);                                       \
  template Tensor<T> tanh(const Tensor<T>&);                                                \
  template Tensor<T> sigmoid(const Tensor<T>&);                                             \
  template Tensor<T> exp(const Tensor<T>&);                                                 \
  template Tensor<T> log(const Tensor<T>&);                                                 \
  template Tensor<T> abs(const Tensor<T>&);                                                 \
  template Tensor<T> sqrt(const Tensor<T>&);                                                \
  template Tensor<T> sum(const Tensor<T>&, std::size_t);                                    \
  template Tensor<T> mean(const Tensor<T>&, std::size_t);                                   \
  template Tensor<T> var_population(const Tensor<T>&, std::size_t);                         \
  template Tensor<T> sum_all(const Tensor<T>&);                                             \
  template Tensor<T> mean_all(const Tensor<T>&);                                            \
  template Tensor<T> concat(const std::vector<Tensor<T>>&, std::size_t);                    \
  template Tensor<T> slice(const Tensor<T>&, std::size_t, std::size_t, std::size_t);        \
  template Tensor<T> reverse(const Tensor<T>&, std::size_t);                                \
  template Tensor<T> transpose(const Tensor<T>&, std::size_t, std::size_t);                 \
  template Tensor<T> reshape(const Tensor<T>&, Shape);                                      \
  template Tensor<T> dropout(const Tensor<T>&, double, std::mt19937_64&);

XLSTM_MIXER_INSTANTIATE(float)
XLSTM_MIXER_INSTANTIATE(double)
XLSTM_MIXER_INSTANTIATE(long double)

#undef XLSTM_MIXER_INSTANTIATE

}  // namespace xlstm_mixer
