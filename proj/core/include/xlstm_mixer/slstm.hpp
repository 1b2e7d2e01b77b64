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

// Stabilized exponential-gated sLSTM cell, its multi-head recurrence, the
// residual sLSTM block, and stacks of blocks.
//
// Sequences are laid out token-major: [L x N x D] where L is the number of
// tokens and N the number of independent sequences processed together.

#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "xlstm_mixer/tensor.hpp"

namespace xlstm_mixer {

/// Row-group order of the fused gate matrices.
enum class Gate : std::size_t { kCellInput = 0, kInput = 1, kForget = 2, kOutput = 3 };
inline constexpr std::size_t kNumGates = 4;
std::string_view gate_name(Gate gate);

/// A trainable tensor and, for structurally constrained weights, its 0/1 mask.
template <typename T>
struct NamedParameter {
  std::string name;
  Tensor<T> tensor;
  Tensor<T> mask;  // undefined when unconstrained
};

struct BlockConfig {
  std::size_t conv_width = 0;  // 0 disables the causal convolution
  double dropout_rate = 0.0;
  std::size_t num_heads = 1;
  std::size_t d_hidden = 1;

  /// Throws ConfigError unless conv_width is 0, 2 or 4, the dropout rate lies
  /// in [0, 1) and d_hidden splits evenly into heads.
  void validate() const;
};

/// 0/1 pattern of a [gates*d_hidden x d_hidden] matrix that is block-diagonal
/// with `num_heads` blocks inside every gate's row group.
template <typename T>
Tensor<T> block_diagonal_mask(std::size_t d_hidden, std::size_t num_heads, std::size_t gates = kNumGates);

template <typename T>
struct SLstmParams {
  std::size_t d_in = 0;
  std::size_t d_hidden = 0;
  std::size_t num_heads = 1;
  Tensor<T> input_weight;      // [4*d_hidden x d_in], row groups z, i, f, o
  Tensor<T> recurrent_weight;  // [4*d_hidden x d_hidden], block-diagonal per gate
  Tensor<T> bias;              // [4*d_hidden]
  Tensor<T> recurrent_mask;    // constant

  static SLstmParams zeros(std::size_t d_in, std::size_t d_hidden, std::size_t num_heads);
  /// Weights uniform in +-1/sqrt(fan_in), forget bias +1, other biases 0.
  static SLstmParams initialized(std::size_t d_in, std::size_t d_hidden, std::size_t num_heads,
                                 std::mt19937_64& rng);

  /// Copies of the per-gate slices (W_g [d_hidden x d_in], R_g, b_g).
  Tensor<T> gate_input_weight(Gate gate) const;
  Tensor<T> gate_recurrent_weight(Gate gate) const;
  Tensor<T> gate_bias(Gate gate) const;

  /// Zeroes every recurrent entry outside its head block.
  void apply_mask();
  /// Free parameters: recurrent entries outside head blocks are not counted.
  std::size_t parameter_count() const;
  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const;
};

/// Recurrent state, one row per sequence: each field is [N x d_hidden].
template <typename T>
struct SLstmState {
  Tensor<T> c;  // cell
  Tensor<T> n;  // normalizer
  Tensor<T> h;  // hidden
  Tensor<T> m;  // stabilizer

  static SLstmState zeros(std::size_t batch, std::size_t d_hidden);
};

template <typename T>
struct GateActivations {
  Tensor<T> z;
  Tensor<T> i;
  Tensor<T> f;
  Tensor<T> o;
  Tensor<T> i_tilde;
  Tensor<T> f_tilde;
};

template <typename T>
struct CellOutput {
  SLstmState<T> state;
  GateActivations<T> gates;
};

/// One stabilized sLSTM update. `x` is [N x d_in] (or [d_in] for N = 1).
///
///   m = max(f~ + m_prev, i~),  i = exp(i~ - m),  f = exp(f~ + m_prev - m)
///   c = f*c_prev + i*z,  n = f*n_prev + i,  h = o*c/n
///
/// Throws NumericError naming the gate when a pre-activation is not finite.
template <typename T>
CellOutput<T> cell_step(const SLstmParams<T>& params, const Tensor<T>& x, const SLstmState<T>& prev);

/// Left fold of cell_step over the tokens. `tokens` is [L x N x d_in] (or
/// [L x d_in]); returns the hidden states with the same leading layout.
/// When `gate_tokens` is given, the input and forget gates read it instead of
/// `tokens` (same shape).
template <typename T>
Tensor<T> sequence_forward(const SLstmParams<T>& params, const Tensor<T>& tokens, const SLstmState<T>& init,
                           const std::optional<Tensor<T>>& gate_tokens = std::nullopt);

/// Overload starting from the all-zero state.
template <typename T>
Tensor<T> sequence_forward(const SLstmParams<T>& params, const Tensor<T>& tokens);

template <typename T>
struct BlockParams {
  SLstmParams<T> cell;
  Tensor<T> norm_weight;  // [D]
  Tensor<T> conv_weight;  // [conv_width x D], undefined when the convolution is off
  Tensor<T> proj_weight;  // [D x D]
  Tensor<T> proj_bias;    // [D]

  static BlockParams zeros(const BlockConfig& cfg);
  static BlockParams initialized(const BlockConfig& cfg, std::mt19937_64& rng);

  std::size_t parameter_count() const;
  void collect(const std::string& prefix, std::vector<NamedParameter<T>>& out) const;
};

/// Residual sLSTM block on [L x N x D] tokens:
///
///   u = LayerNorm(x)
///   g = u + CausalDepthwiseConv(u)        (gate input for i/f; g = u when conv is off)
///   y = x + Dropout(Proj(sLSTM(u, g)))
///
/// Dropout is only active when `training`.
template <typename T>
Tensor<T> block_forward(const BlockConfig& cfg, const BlockParams<T>& params, const Tensor<T>& tokens, bool training,
                        std::mt19937_64& rng);

/// Sequential composition of block_forward over `blocks` (at least one).
template <typename T>
Tensor<T> stack_forward(const BlockConfig& cfg, const std::vector<BlockParams<T>>& blocks, const Tensor<T>& tokens,
                        bool training, std::mt19937_64& rng);

}  // namespace xlstm_mixer
