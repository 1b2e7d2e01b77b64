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

// The forecasting pipeline:
//
//   RevIN -> NLinear time mixing -> FC^up -> [eta; tokens] -> shared sLSTM
//   stack over the original and feature-reversed views -> FC^view -> RevIN^-1
//
// Inputs are batched as [B x V x T] (a single window [V x T] is accepted and
// returned without the batch axis). Linear maps are shared across variates.

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "xlstm_mixer/slstm.hpp"
#include "xlstm_mixer/tensor.hpp"

namespace xlstm_mixer {

enum class SLstmAxis { kVariates, kTime, kNone };
std::string_view to_string(SLstmAxis axis);
SLstmAxis parse_slstm_axis(std::string_view text);

struct MixerConfig {
  std::size_t lookback = 96;     // T
  std::size_t horizon = 96;      // H
  std::size_t num_variates = 7;  // V
  std::size_t embed_dim = 64;    // D
  std::size_t num_blocks = 1;    // M
  BlockConfig block{0, 0.1, 4, 64};
  bool mix_time = true;
  SLstmAxis slstm_axis = SLstmAxis::kVariates;
  bool init_token = true;
  bool mix_view = true;

  /// Throws ConfigError for inconsistent settings. block.d_hidden must equal
  /// embed_dim.
  void validate() const;

  /// Width of each token row entering FC^up.
  std::size_t token_features() const;
  /// Number of data tokens the stack strides over (excluding eta).
  std::size_t token_count() const;
  /// Width of each FC^view output row.
  std::size_t view_outputs() const;
};

/// Switch matrix of the ablation study, ids 1..10; #1 is the full model.
MixerConfig build_ablation_config(int id, MixerConfig base);

inline constexpr double kRevInEpsilon = 1e-5;

template <typename T>
struct RevInParams {
  Tensor<T> gamma;  // [V]
  Tensor<T> beta;   // [V]
  double epsilon = kRevInEpsilon;

  static RevInParams identity(std::size_t num_variates);
};

/// Per-instance statistics, [B x V x 1] each.
template <typename T>
struct RevInStats {
  Tensor<T> mean;
  Tensor<T> std;  // sqrt(var + epsilon)
};

template <typename T>
struct MixerParams {
  RevInParams<T> revin;
  Tensor<T> nlinear_weight;  // [H x T], undefined without time mixing
  Tensor<T> nlinear_bias;    // [H]
  Tensor<T> up_weight;       // [D x token_features]
  Tensor<T> up_bias;         // [D]
  Tensor<T> eta;             // [D], undefined without the initial token
  std::vector<BlockParams<T>> stack;
  Tensor<T> view_weight;  // [view_outputs x 2D]
  Tensor<T> view_bias;    // [view_outputs]

  static MixerParams zeros(const MixerConfig& cfg);
  static MixerParams initialized(const MixerConfig& cfg, std::uint64_t seed);

  /// Every trainable tensor with a stable dotted name.
  std::vector<NamedParameter<T>> parameters() const;
  std::size_t parameter_count() const;
  /// Independent copy of every tensor.
  MixerParams clone() const;
};

/// Closed-form free-parameter count for a configuration.
std::size_t expected_parameter_count(const MixerConfig& cfg);

/// Named intermediates of one forward pass. Data-side tensors are batch-major;
/// the token sequences entering the stack are token-major [L x B x D].
template <typename T>
struct ForwardTrace {
  Tensor<T> x_norm;          // [B x V x T]
  Tensor<T> x_initial;       // [B x V x H] ([B x V x T] without time mixing)
  Tensor<T> x_up;            // [L x B x D], L = token_count (+1 with eta)
  Tensor<T> x_up_reversed;   // [L x B x D]
  Tensor<T> y_prime;         // [B x token_count x D]
  Tensor<T> y_double_prime;  // [B x token_count x D]
  Tensor<T> y_norm;          // [B x V x H]
  Tensor<T> y;               // [B x V x H]
};

template <typename T>
struct MixerOutput {
  Tensor<T> y;
  ForwardTrace<T> trace;
};

/// Per variate: gamma * (x - mean) / sqrt(var + eps) + beta, population variance.
template <typename T>
std::pair<Tensor<T>, RevInStats<T>> revin_normalize(const RevInParams<T>& params, const Tensor<T>& x);

/// Exact inverse: (y_norm - beta) / gamma * std + mean. Throws NumericError
/// when some |gamma| < 1e-12.
template <typename T>
Tensor<T> revin_denormalize(const RevInParams<T>& params, const RevInStats<T>& stats, const Tensor<T>& y_norm);

/// FC(x - x_last) + x_last per variate row, on [..., T] -> [..., H].
template <typename T>
Tensor<T> nlinear_forecast(const Tensor<T>& weight, const Tensor<T>& bias, const Tensor<T>& x_norm);

/// Maps token rows [B x L0 x F] through FC^up and returns the token-major
/// sequence [L x B x D], with eta prepended as token 0 when enabled.
template <typename T>
Tensor<T> up_project_and_prepend(const MixerParams<T>& params, const Tensor<T>& token_rows, const MixerConfig& cfg);

/// Flips the feature axis (the last one) of every token.
template <typename T>
Tensor<T> reverse_latent_view(const Tensor<T>& tokens);

/// FC^view over concat(y', y'') per row: [B x L0 x D] twice -> [B x L0 x O].
template <typename T>
Tensor<T> reconcile_views(const Tensor<T>& view_weight, const Tensor<T>& view_bias, const Tensor<T>& y_prime,
                          const Tensor<T>& y_double_prime);

/// Runs the shared stack on both token-major views at once and returns
/// (y', y'') as [B x L0 x D], dropping the eta position when present.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> refine_views(const MixerParams<T>& params, const MixerConfig& cfg,
                                             const Tensor<T>& forward_view, const Tensor<T>& reversed_view,
                                             bool training, std::mt19937_64& rng);

template <typename T>
MixerOutput<T> mixer_forward(const MixerParams<T>& params, const MixerConfig& cfg, const Tensor<T>& x, bool training,
                             std::mt19937_64& rng);

/// Decodes the learned initial token through the stack in both views and
/// FC^view; returns [1 x H]. Requires init_token and the variate axis.
template <typename T>
Tensor<T> decode_init_token(const MixerParams<T>& params, const MixerConfig& cfg);

}  // namespace xlstm_mixer
