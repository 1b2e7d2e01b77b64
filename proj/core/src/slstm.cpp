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

#include "xlstm_mixer/slstm.hpp"

#include <cmath>

namespace xlstm_mixer {

std::string_view gate_name(Gate gate) {
  switch (gate) {
    case Gate::kCellInput:
      return "cell input";
    case Gate::kInput:
      return "input gate";
    case Gate::kForget:
      return "forget gate";
    case Gate::kOutput:
      return "output gate";
  }
  return "unknown gate";
}

void BlockConfig::validate() const {
  if (conv_width != 0 && conv_width != 2 && conv_width != 4) {
    throw ConfigError("sLSTM conv width must be 0 (disabled), 2 or 4, got " + std::to_string(conv_width));
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw ConfigError("sLSTM dropout rate must lie in [0, 1), got " + std::to_string(dropout_rate));
  }
  if (num_heads == 0 || d_hidden == 0) throw ConfigError("sLSTM heads and hidden size must be positive");
  if (d_hidden % num_heads != 0) {
    throw ConfigError("sLSTM hidden size " + std::to_string(d_hidden) + " is not divisible by " +
                      std::to_string(num_heads) + " heads");
  }
}

template <typename T>
Tensor<T> block_diagonal_mask(std::size_t d_hidden, std::size_t num_heads, std::size_t gates) {
  if (num_heads == 0 || d_hidden % num_heads != 0) {
    throw ConfigError("block_diagonal_mask: hidden size must be divisible by the number of heads");
  }
  const std::size_t head = d_hidden / num_heads;
  Tensor<T> mask(Shape{gates * d_hidden, d_hidden});
  auto data = mask.mutable_data();
  for (std::size_t r = 0; r < gates * d_hidden; ++r) {
    const std::size_t row_head = (r % d_hidden) / head;
    for (std::size_t c = 0; c < d_hidden; ++c) {
      data[r * d_hidden + c] = (c / head == row_head) ? T(1) : T(0);
    }
  }
  return mask;
}

// ---- parameters --------------------------------------------------------------------

template <typename T>
SLstmParams<T> SLstmParams<T>::zeros(std::size_t d_in, std::size_t d_hidden, std::size_t num_heads) {
  if (d_in == 0) throw ConfigError("sLSTM input size must be positive");
  BlockConfig{0, 0.0, num_heads, d_hidden}.validate();
  SLstmParams p;
  p.d_in = d_in;
  p.d_hidden = d_hidden;
  p.num_heads = num_heads;
  p.input_weight = Tensor<T>(Shape{kNumGates * d_hidden, d_in});
  p.recurrent_weight = Tensor<T>(Shape{kNumGates * d_hidden, d_hidden});
  p.bias = Tensor<T>(Shape{kNumGates * d_hidden});
  p.recurrent_mask = block_diagonal_mask<T>(d_hidden, num_heads);
  return p;
}

template <typename T>
SLstmParams<T> SLstmParams<T>::initialized(std::size_t d_in, std::size_t d_hidden, std::size_t num_heads,
                                           std::mt19937_64& rng) {
  SLstmParams p = zeros(d_in, d_hidden, num_heads);
  p.input_weight = Tensor<T>::uniform(p.input_weight.shape(), T(1.0 / std::sqrt(double(d_in))), rng);
  const std::size_t head = d_hidden / num_heads;
  p.recurrent_weight = Tensor<T>::uniform(p.recurrent_weight.shape(), T(1.0 / std::sqrt(double(head))), rng);
  p.apply_mask();
  auto b = p.bias.mutable_data();
  const std::size_t forget = static_cast<std::size_t>(Gate::kForget) * d_hidden;
  for (std::size_t k = 0; k < d_hidden; ++k) b[forget + k] = T(1);
  return p;
}

template <typename T>
Tensor<T> SLstmParams<T>::gate_input_weight(Gate gate) const {
  const std::size_t g = static_cast<std::size_t>(gate);
  return slice(input_weight.detach(), 0, g * d_hidden, (g + 1) * d_hidden);
}

template <typename T>
Tensor<T> SLstmParams<T>::gate_recurrent_weight(Gate gate) const {
  const std::size_t g = static_cast<std::size_t>(gate);
  return slice(recurrent_weight.detach(), 0, g * d_hidden, (g + 1) * d_hidden);
}

template <typename T>
Tensor<T> SLstmParams<T>::gate_bias(Gate gate) const {
  const std::size_t g = static_cast<std::size_t>(gate);
  return slice(bias.detach(), 0, g * d_hidden, (g + 1) * d_hidden);
}

template <typename T>
void SLstmParams<T>::apply_mask() {
  auto w = recurrent_weight.mutable_data();
  const auto m = recurrent_mask.data();
  for (std::size_t k = 0; k < w.size(); ++k) {
    if (m[k] == T(0)) w[k] = T(0);
  }
}

template <typename T>
std::size_t SLstmParams<T>::parameter_count() const {
  return kNumGates * d_hidden * d_in + kNumGates * d_hidden * (d_hidden / num_heads) + kNumGates * d_hidden;
}

template <typename T>
void SLstmParams<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const {
  out.push_back({prefix + "input_weight", input_weight, {}});
  out.push_back({prefix + "recurrent_weight", recurrent_weight, recurrent_mask});
  out.push_back({prefix + "bias", bias, {}});
}

template <typename T>
SLstmState<T> SLstmState<T>::zeros(std::size_t batch, std::size_t d_hidden) {
  const Shape s{batch, d_hidden};
  return SLstmState{Tensor<T>(s), Tensor<T>(s), Tensor<T>(s), Tensor<T>(s)};
}

// ---- recurrence --------------------------------------------------------------------

namespace {

template <typename T>
void require_finite_preactivation(const Tensor<T>& pre, std::size_t d_hidden, std::size_t step) {
  const auto data = pre.data();
  const std::size_t width = kNumGates * d_hidden;
  for (std::size_t k = 0; k < data.size(); ++k) {
    if (!std::isfinite(data[k])) {
      const auto gate = static_cast<Gate>((k % width) / d_hidden);
      throw NumericError("sLSTM: non-finite pre-activation in the " + std::string(gate_name(gate)) + " at step " +
                         std::to_string(step));
    }
  }
}

// Applies the recurrence given the input-side pre-activations W x + b for this step.
template <typename T>
CellOutput<T> step_from_preactivation(const Tensor<T>& input_pre, const Tensor<T>& masked_recurrent,
                                      std::size_t d_hidden, const SLstmState<T>& prev, std::size_t step) {
  const Tensor<T> pre = add(input_pre, matmul_nt(prev.h, masked_recurrent));
  require_finite_preactivation(pre, d_hidden, step);
  const std::size_t h = d_hidden;
  const Tensor<T> z_tilde = slice(pre, 1, 0, h);
  const Tensor<T> i_tilde = slice(pre, 1, h, 2 * h);
  const Tensor<T> f_tilde = slice(pre, 1, 2 * h, 3 * h);
  const Tensor<T> o_tilde = slice(pre, 1, 3 * h, 4 * h);

  const Tensor<T> f_plus_m = add(f_tilde, prev.m);
  const Tensor<T> m = max2(f_plus_m, i_tilde);
  const Tensor<T> i = exp(sub(i_tilde, m));
  const Tensor<T> f = exp(sub(f_plus_m, m));
  const Tensor<T> z = tanh(z_tilde);
  const Tensor<T> o = sigmoid(o_tilde);
  const Tensor<T> c = add(mul(f, prev.c), mul(i, z));
  const Tensor<T> n = add(mul(f, prev.n), i);
  const Tensor<T> hidden = mul(o, div(c, n));
  return CellOutput<T>{SLstmState<T>{c, n, hidden, m}, GateActivations<T>{z, i, f, o, i_tilde, f_tilde}};
}

template <typename T>
void check_state(const SLstmState<T>& s, std::size_t batch, std::size_t d_hidden) {
  const Shape expected{batch, d_hidden};
  for (const Tensor<T>* t : {&s.c, &s.n, &s.h, &s.m}) {
    if (!t->defined() || t->shape() != expected) {
      throw ShapeError("sLSTM: state components must be " + shape_to_string(expected) + ", got " +
                       (t->defined() ? shape_to_string(t->shape()) : std::string("undefined")));
    }
  }
}

}  // namespace

template <typename T>
CellOutput<T> cell_step(const SLstmParams<T>& params, const Tensor<T>& x, const SLstmState<T>& prev) {
  const Tensor<T> rows = x.rank() == 1 ? reshape(x, Shape{1, x.dim(0)}) : x;
  if (rows.rank() != 2 || rows.dim(1) != params.d_in) {
    throw ShapeError("sLSTM cell_step: token of shape " + shape_to_string(x.shape()) + " does not match input size " +
                     std::to_string(params.d_in));
  }
  check_state(prev, rows.dim(0), params.d_hidden);
  const Tensor<T> masked = mul(params.recurrent_weight, params.recurrent_mask);
  return step_from_preactivation(linear(rows, params.input_weight, params.bias), masked, params.d_hidden, prev, 0);
}

template <typename T>
Tensor<T> sequence_forward(const SLstmParams<T>& params, const Tensor<T>& tokens, const SLstmState<T>& init,
                           const std::optional<Tensor<T>>& gate_tokens) {
  const bool single = tokens.rank() == 2;
  if ((!single && tokens.rank() != 3) || tokens.shape().back() != params.d_in) {
    throw ShapeError("sLSTM sequence_forward: tokens " + shape_to_string(tokens.shape()) +
                     " must be [L x N x " + std::to_string(params.d_in) + "] or [L x " +
                     std::to_string(params.d_in) + "]");
  }
  if (gate_tokens && gate_tokens->shape() != tokens.shape()) {
    throw ShapeError("sLSTM sequence_forward: gate tokens " + shape_to_string(gate_tokens->shape()) +
                     " differ from tokens " + shape_to_string(tokens.shape()));
  }
  const std::size_t steps = tokens.dim(0);
  const std::size_t batch = single ? 1 : tokens.dim(1);
  const std::size_t h = params.d_hidden;
  check_state(init, batch, h);

  const Shape flat{steps * batch, params.d_in};
  Tensor<T> pre = linear(reshape(tokens, flat), params.input_weight, params.bias);
  if (gate_tokens) {
    const Tensor<T> w_if = slice(params.input_weight, 0, h, 3 * h);
    const Tensor<T> b_if = slice(params.bias, 0, h, 3 * h);
    const Tensor<T> pre_if = linear(reshape(*gate_tokens, flat), w_if, b_if);
    pre = concat(std::vector<Tensor<T>>{slice(pre, 1, 0, h), pre_if, slice(pre, 1, 3 * h, 4 * h)}, 1);
  }
  const Tensor<T> masked = mul(params.recurrent_weight, params.recurrent_mask);

  std::vector<Tensor<T>> hidden;
  hidden.reserve(steps);
  SLstmState<T> state = init;
  for (std::size_t t = 0; t < steps; ++t) {
    const Tensor<T> step_pre = steps == 1 ? pre : slice(pre, 0, t * batch, (t + 1) * batch);
    state = step_from_preactivation(step_pre, masked, h, state, t).state;
    hidden.push_back(state.h);
  }
  const Tensor<T> out = steps == 1 ? hidden.front() : concat(hidden, 0);
  return single ? reshape(out, Shape{steps, h}) : reshape(out, Shape{steps, batch, h});
}

template <typename T>
Tensor<T> sequence_forward(const SLstmParams<T>& params, const Tensor<T>& tokens) {
  const std::size_t batch = tokens.rank() == 3 ? tokens.dim(1) : 1;
  return sequence_forward(params, tokens, SLstmState<T>::zeros(batch, params.d_hidden));
}

// ---- block -------------------------------------------------------------------------

template <typename T>
BlockParams<T> BlockParams<T>::zeros(const BlockConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.d_hidden;
  BlockParams p;
  p.cell = SLstmParams<T>::zeros(d, d, cfg.num_heads);
  p.norm_weight = Tensor<T>::filled(Shape{d}, T(1));
  if (cfg.conv_width > 0) p.conv_weight = Tensor<T>(Shape{cfg.conv_width, d});
  p.proj_weight = Tensor<T>(Shape{d, d});
  p.proj_bias = Tensor<T>(Shape{d});
  return p;
}

template <typename T>
BlockParams<T> BlockParams<T>::initialized(const BlockConfig& cfg, std::mt19937_64& rng) {
  BlockParams p = zeros(cfg);
  const std::size_t d = cfg.d_hidden;
  p.cell = SLstmParams<T>::initialized(d, d, cfg.num_heads, rng);
  if (cfg.conv_width > 0) {
    p.conv_weight = Tensor<T>::uniform(p.conv_weight.shape(), T(1.0 / std::sqrt(double(cfg.conv_width))), rng);
  }
  p.proj_weight = Tensor<T>::uniform(p.proj_weight.shape(), T(1.0 / std::sqrt(double(d))), rng);
  return p;
}

template <typename T>
std::size_t BlockParams<T>::parameter_count() const {
  std::size_t n = cell.parameter_count() + norm_weight.numel() + proj_weight.numel() + proj_bias.numel();
  if (conv_weight.defined()) n += conv_weight.numel();
  return n;
}

template <typename T>
void BlockParams<T>::collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const {
  cell.collect(prefix + "cell.", out);
  out.push_back({prefix + "norm_weight", norm_weight, {}});
  if (conv_weight.defined()) out.push_back({prefix + "conv_weight", conv_weight, {}});
  out.push_back({prefix + "proj_weight", proj_weight, {}});
  out.push_back({prefix + "proj_bias", proj_bias, {}});
}

namespace {

constexpr double kLayerNormEpsilon = 1e-5;

template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& weight) {
  const std::size_t last = x.rank() - 1;
  const Tensor<T> centered = sub(x, mean(x, last));
  const Tensor<T> std_dev = sqrt(add_scalar(var_population(x, last), T(kLayerNormEpsilon)));
  return mul(div(centered, std_dev), weight);
}

// y[t] = sum_k w[k] * x[t - k] along the token axis, zero before the first token.
template <typename T>
Tensor<T> causal_depthwise_conv(const Tensor<T>& x, const Tensor<T>& weight) {
  const std::size_t steps = x.dim(0);
  const std::size_t width = weight.dim(0);
  Tensor<T> acc = mul(x, slice(weight, 0, 0, 1));
  for (std::size_t k = 1; k < width && k < steps; ++k) {
    Shape pad_shape = x.shape();
    pad_shape[0] = k;
    const Tensor<T> shifted =
        concat(std::vector<Tensor<T>>{Tensor<T>(pad_shape), slice(x, 0, 0, steps - k)}, 0);
    acc = add(acc, mul(shifted, slice(weight, 0, k, k + 1)));
  }
  return acc;
}

}  // namespace

template <typename T>
Tensor<T> block_forward(const BlockConfig& cfg, const BlockParams<T>& params, const Tensor<T>& tokens, bool training,
                        std::mt19937_64& rng) {
  if (tokens.rank() != 3 || tokens.dim(2) != cfg.d_hidden) {
    throw ShapeError("sLSTM block: tokens " + shape_to_string(tokens.shape()) + " must be [L x N x " +
                     std::to_string(cfg.d_hidden) + "]");
  }
  const std::size_t steps = tokens.dim(0);
  const std::size_t batch = tokens.dim(1);
  const std::size_t d = cfg.d_hidden;
  const Tensor<T> normed = layer_norm(tokens, params.norm_weight);
  std::optional<Tensor<T>> gate_input;
  if (cfg.conv_width > 0) {
    const Tensor<T> w = reshape(params.conv_weight, Shape{cfg.conv_width, 1, d});
    gate_input = add(normed, causal_depthwise_conv(normed, w));
  }
  const Tensor<T> hidden =
      sequence_forward(params.cell, normed, SLstmState<T>::zeros(batch, d), gate_input);
  Tensor<T> projected = linear(reshape(hidden, Shape{steps * batch, d}), params.proj_weight, params.proj_bias);
  if (training) projected = dropout(projected, cfg.dropout_rate, rng);
  return add(tokens, reshape(projected, Shape{steps, batch, d}));
}

template <typename T>
Tensor<T> stack_forward(const BlockConfig& cfg, const std::vector<BlockParams<T>>& blocks, const Tensor<T>& tokens,
                        bool training, std::mt19937_64& rng) {
  if (blocks.empty()) throw ConfigError("sLSTM stack needs at least one block");
  Tensor<T> x = tokens;
  for (const auto& block : blocks) x = block_forward(cfg, block, x, training, rng);
  return x;
}

#define XLSTM_MIXER_INSTANTIATE(T)                                                                          \
  template Tensor<T> block_diagonal_mask<T>(std::size_t, std::size_t, std::size_t);                         \
  template struct SLstmParams<T>;                                                                           \
  template struct SLstmState<T>;                                                                            \
  template struct BlockParams<T>;                                                                           \
  template CellOutput<T> cell_step(const SLstmParams<T>&, const Tensor<T>&, const SLstmState<T>&);          \
  template Tensor<T> sequence_forward(const SLstmParams<T>&, const Tensor<T>&, const SLstmState<T>&,         \
                                      const std::optional<Tensor<T>>&);                                     \
  template Tensor<T> sequence_forward(const SLstmParams<T>&, const Tensor<T>&);                             \
  template Tensor<T> block_forward(const BlockConfig&, const BlockParams<T>&, const Tensor<T>&, bool,       \
                                   std::mt19937_64&);                                                       \
  template Tensor<T> stack_forward(const BlockConfig&, const std::vector<BlockParams<T>>&, const Tensor<T>&, \
                                   bool, std::mt19937_64&);

XLSTM_MIXER_INSTANTIATE(float)
XLSTM_MIXER_INSTANTIATE(double)
XLSTM_MIXER_INSTANTIATE(long double)

#undef XLSTM_MIXER_INSTANTIATE

}  // namespace xlstm_mixer
