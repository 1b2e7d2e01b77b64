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

#include "xlstm_mixer/mixer.hpp"

#include <array>
#include <cmath>

namespace xlstm_mixer {

std::string_view to_string(SLstmAxis axis) {
  switch (axis) {
    case SLstmAxis::kVariates:
      return "variates";
    case SLstmAxis::kTime:
      return "time";
    case SLstmAxis::kNone:
      return "none";
  }
  return "unknown";
}

SLstmAxis parse_slstm_axis(std::string_view text) {
  if (text == "variates") return SLstmAxis::kVariates;
  if (text == "time") return SLstmAxis::kTime;
  if (text == "none") return SLstmAxis::kNone;
  throw ConfigError("unknown sLSTM axis '" + std::string(text) + "' (expected variates, time or none)");
}

void MixerConfig::validate() const {
  if (lookback == 0 || horizon == 0 || num_variates == 0 || embed_dim == 0 || num_blocks == 0) {
    throw ConfigError("lookback, horizon, variates, embedding dimension and block count must all be positive");
  }
  block.validate();
  if (block.d_hidden != embed_dim) {
    throw ConfigError("sLSTM hidden size " + std::to_string(block.d_hidden) + " must equal the embedding dimension " +
                      std::to_string(embed_dim));
  }
  if (slstm_axis == SLstmAxis::kNone && init_token) {
    throw ConfigError("the initial token needs an sLSTM stack to condition (sLSTM axis is none)");
  }
  if (slstm_axis == SLstmAxis::kTime && !mix_time && lookback != horizon) {
    throw ConfigError("striding over time without time mixing yields lookback-length rows; requires lookback == horizon");
  }
}

std::size_t MixerConfig::token_features() const {
  if (slstm_axis == SLstmAxis::kTime) return num_variates;
  return mix_time ? horizon : lookback;
}

std::size_t MixerConfig::token_count() const {
  if (slstm_axis == SLstmAxis::kTime) return mix_time ? horizon : lookback;
  return num_variates;
}

std::size_t MixerConfig::view_outputs() const {
  return slstm_axis == SLstmAxis::kTime ? num_variates : horizon;
}

MixerConfig build_ablation_config(int id, MixerConfig base) {
  struct Switches {
    bool mix_time;
    SLstmAxis axis;
    bool init_token;
    bool mix_view;
  };
  using enum SLstmAxis;
  static constexpr std::array<Switches, 10> kTable{{
      {true, kVariates, true, true},     // #1 full
      {true, kTime, true, true},         // #2
      {true, kVariates, false, true},    // #3
      {true, kVariates, true, false},    // #4
      {true, kVariates, false, false},   // #5
      {true, kNone, false, false},       // #6
      {false, kVariates, true, true},    // #7
      {false, kVariates, false, true},   // #8
      {false, kVariates, true, false},   // #9
      {false, kVariates, false, false},  // #10
  }};
  if (id < 1 || id > 10) throw ConfigError("ablation id must be in 1..10, got " + std::to_string(id));
  const Switches& s = kTable[static_cast<std::size_t>(id - 1)];
  base.mix_time = s.mix_time;
  base.slstm_axis = s.axis;
  base.init_token = s.init_token;
  base.mix_view = s.mix_view;
  return base;
}

std::size_t expected_parameter_count(const MixerConfig& cfg) {
  const std::size_t v = cfg.num_variates;
  const std::size_t t = cfg.lookback;
  const std::size_t h = cfg.horizon;
  const std::size_t d = cfg.embed_dim;
  const std::size_t k = cfg.block.conv_width;
  const std::size_t heads = cfg.block.num_heads;
  const std::size_t out = cfg.view_outputs();
  std::size_t n = 2 * v;                                   // RevIN
  if (cfg.mix_time) n += h * t + h;                        // NLinear
  n += d * cfg.token_features() + d;                       // FC^up
  if (cfg.init_token) n += d;                              // eta
  if (cfg.slstm_axis != SLstmAxis::kNone) {
    const std::size_t block = 4 * d * d + 4 * d * (d / heads) + 4 * d  // cell
                              + d                                      // norm
                              + k * d                                  // conv
                              + d * d + d;                             // projection
    n += cfg.num_blocks * block;
  }
  n += out * 2 * d + out;  // FC^view
  return n;
}

// ---- parameters ------------------------------------------------------------------

template <typename T>
RevInParams<T> RevInParams<T>::identity(std::size_t num_variates) {
  return RevInParams{Tensor<T>::filled(Shape{num_variates}, T(1)), Tensor<T>(Shape{num_variates}), kRevInEpsilon};
}

template <typename T>
MixerParams<T> MixerParams<T>::zeros(const MixerConfig& cfg) {
  cfg.validate();
  const std::size_t d = cfg.embed_dim;
  MixerParams p;
  p.revin = RevInParams<T>::identity(cfg.num_variates);
  if (cfg.mix_time) {
    p.nlinear_weight = Tensor<T>(Shape{cfg.horizon, cfg.lookback});
    p.nlinear_bias = Tensor<T>(Shape{cfg.horizon});
  }
  p.up_weight = Tensor<T>(Shape{d, cfg.token_features()});
  p.up_bias = Tensor<T>(Shape{d});
  if (cfg.init_token) p.eta = Tensor<T>(Shape{d});
  if (cfg.slstm_axis != SLstmAxis::kNone) {
    for (std::size_t b = 0; b < cfg.num_blocks; ++b) p.stack.push_back(BlockParams<T>::zeros(cfg.block));
  }
  p.view_weight = Tensor<T>(Shape{cfg.view_outputs(), 2 * d});
  p.view_bias = Tensor<T>(Shape{cfg.view_outputs()});
  return p;
}

template <typename T>
MixerParams<T> MixerParams<T>::initialized(const MixerConfig& cfg, std::uint64_t seed) {
  MixerParams p = zeros(cfg);
  std::mt19937_64 rng(seed);
  auto fan_in_bound = [](std::size_t fan_in) { return T(1.0 / std::sqrt(static_cast<double>(fan_in))); };
  if (cfg.mix_time) p.nlinear_weight = Tensor<T>::uniform(p.nlinear_weight.shape(), fan_in_bound(cfg.lookback), rng);
  p.up_weight = Tensor<T>::uniform(p.up_weight.shape(), fan_in_bound(cfg.token_features()), rng);
  if (cfg.init_token) p.eta = Tensor<T>::uniform(p.eta.shape(), fan_in_bound(cfg.embed_dim), rng);
  for (auto& block : p.stack) block = BlockParams<T>::initialized(cfg.block, rng);
  p.view_weight = Tensor<T>::uniform(p.view_weight.shape(), fan_in_bound(2 * cfg.embed_dim), rng);
  return p;
}

template <typename T>
std::vector<NamedParameter<T>> MixerParams<T>::parameters() const {
  std::vector<NamedParameter<T>> out;
  out.push_back({"revin.gamma", revin.gamma, {}});
  out.push_back({"revin.beta", revin.beta, {}});
  if (nlinear_weight.defined()) {
    out.push_back({"nlinear.weight", nlinear_weight, {}});
    out.push_back({"nlinear.bias", nlinear_bias, {}});
  }
  out.push_back({"up.weight", up_weight, {}});
  out.push_back({"up.bias", up_bias, {}});
  if (eta.defined()) out.push_back({"eta", eta, {}});
  for (std::size_t b = 0; b < stack.size(); ++b) stack[b].collect("stack." + std::to_string(b) + ".", out);
  out.push_back({"view.weight", view_weight, {}});
  out.push_back({"view.bias", view_bias, {}});
  return out;
}

template <typename T>
std::size_t MixerParams<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : parameters()) {
    if (p.mask.defined()) {
      for (T m : p.mask.data()) n += m != T(0) ? 1 : 0;
    } else {
      n += p.tensor.numel();
    }
  }
  return n;
}

template <typename T>
MixerParams<T> MixerParams<T>::clone() const {
  MixerParams c = *this;
  auto copy = [](Tensor<T>& t) {
    if (t.defined()) t = t.detach();
  };
  copy(c.revin.gamma);
  copy(c.revin.beta);
  copy(c.nlinear_weight);
  copy(c.nlinear_bias);
  copy(c.up_weight);
  copy(c.up_bias);
  copy(c.eta);
  for (auto& b : c.stack) {
    copy(b.cell.input_weight);
    copy(b.cell.recurrent_weight);
    copy(b.cell.bias);
    copy(b.norm_weight);
    copy(b.conv_weight);
    copy(b.proj_weight);
    copy(b.proj_bias);
  }
  copy(c.view_weight);
  copy(c.view_bias);
  return c;
}

// ---- stages --------------------------------------------------------------------

template <typename T>
std::pair<Tensor<T>, RevInStats<T>> revin_normalize(const RevInParams<T>& params, const Tensor<T>& x) {
  if (x.rank() < 2) throw ShapeError("revin_normalize: expected [V x T] or [B x V x T], got " + shape_to_string(x.shape()));
  const std::size_t time_axis = x.rank() - 1;
  const std::size_t v = x.dim(time_axis - 1);
  if (params.gamma.numel() != v || params.beta.numel() != v) {
    throw ShapeError("revin_normalize: " + std::to_string(v) + " variates but RevIN holds " +
                     std::to_string(params.gamma.numel()));
  }
  const Tensor<T> mu = mean(x, time_axis);
  const Tensor<T> sd = sqrt(add_scalar(var_population(x, time_axis), T(params.epsilon)));
  const Tensor<T> gamma = reshape(params.gamma, Shape{v, 1});
  const Tensor<T> beta = reshape(params.beta, Shape{v, 1});
  Tensor<T> normed = add(mul(div(sub(x, mu), sd), gamma), beta);
  return {std::move(normed), RevInStats<T>{mu, sd}};
}

template <typename T>
Tensor<T> revin_denormalize(const RevInParams<T>& params, const RevInStats<T>& stats, const Tensor<T>& y_norm) {
  for (T g : params.gamma.data()) {
    if (std::abs(static_cast<double>(g)) < 1e-12) {
      throw NumericError("revin_denormalize: RevIN scale is (numerically) zero; the normalization is not invertible");
    }
  }
  const std::size_t v = params.gamma.numel();
  const Tensor<T> gamma = reshape(params.gamma, Shape{v, 1});
  const Tensor<T> beta = reshape(params.beta, Shape{v, 1});
  return add(mul(div(sub(y_norm, beta), gamma), stats.std), stats.mean);
}

template <typename T>
Tensor<T> nlinear_forecast(const Tensor<T>& weight, const Tensor<T>& bias, const Tensor<T>& x_norm) {
  const std::size_t t = x_norm.shape().back();
  if (weight.rank() != 2 || weight.dim(1) != t || bias.numel() != weight.dim(0)) {
    throw ShapeError("nlinear_forecast: weight " + shape_to_string(weight.shape()) + " / bias " +
                     shape_to_string(bias.shape()) + " do not fit inputs " + shape_to_string(x_norm.shape()));
  }
  const std::size_t rows = x_norm.numel() / t;
  const Tensor<T> flat = reshape(x_norm, Shape{rows, t});
  const Tensor<T> last = slice(flat, 1, t - 1, t);
  const Tensor<T> out = add(linear(sub(flat, last), weight, bias), last);
  Shape out_shape = x_norm.shape();
  out_shape.back() = weight.dim(0);
  return reshape(out, out_shape);
}

template <typename T>
Tensor<T> up_project_and_prepend(const MixerParams<T>& params, const Tensor<T>& token_rows, const MixerConfig& cfg) {
  if (token_rows.rank() != 3 || token_rows.dim(2) != params.up_weight.dim(1)) {
    throw ShapeError("up_project_and_prepend: token rows " + shape_to_string(token_rows.shape()) +
                     " do not match FC^up " + shape_to_string(params.up_weight.shape()));
  }
  const std::size_t batch = token_rows.dim(0);
  const std::size_t count = token_rows.dim(1);
  const std::size_t d = params.up_weight.dim(0);
  const Tensor<T> up =
      linear(reshape(token_rows, Shape{batch * count, token_rows.dim(2)}), params.up_weight, params.up_bias);
  const Tensor<T> seq = transpose(reshape(up, Shape{batch, count, d}), 0, 1);
  if (!cfg.init_token) return seq;
  if (!params.eta.defined()) throw ConfigError("up_project_and_prepend: initial token enabled but eta is missing");
  const Tensor<T> eta_rows = add(Tensor<T>(Shape{1, batch, d}), reshape(params.eta, Shape{1, 1, d}));
  return concat(std::vector<Tensor<T>>{eta_rows, seq}, 0);
}

template <typename T>
Tensor<T> reverse_latent_view(const Tensor<T>& tokens) {
  return reverse(tokens, tokens.rank() - 1);
}

template <typename T>
Tensor<T> reconcile_views(const Tensor<T>& view_weight, const Tensor<T>& view_bias, const Tensor<T>& y_prime,
                          const Tensor<T>& y_double_prime) {
  if (y_prime.shape() != y_double_prime.shape() || y_prime.rank() != 3 ||
      view_weight.dim(1) != 2 * y_prime.dim(2)) {
    throw ShapeError("reconcile_views: views " + shape_to_string(y_prime.shape()) + " and " +
                     shape_to_string(y_double_prime.shape()) + " do not fit FC^view " +
                     shape_to_string(view_weight.shape()));
  }
  const std::size_t batch = y_prime.dim(0);
  const std::size_t rows = y_prime.dim(1);
  const Tensor<T> both = concat(std::vector<Tensor<T>>{y_prime, y_double_prime}, 2);
  const Tensor<T> out = linear(reshape(both, Shape{batch * rows, both.dim(2)}), view_weight, view_bias);
  return reshape(out, Shape{batch, rows, view_weight.dim(0)});
}

namespace {

// Token-major stack output -> batch-major rows without the eta position.
template <typename T>
Tensor<T> data_rows(const Tensor<T>& seq, bool has_eta) {
  const Tensor<T> body = has_eta ? slice(seq, 0, 1, seq.dim(0)) : seq;
  return transpose(body, 0, 1);
}

// Raw stack outputs [L x B x D] for both views; the second is empty unless mix_view.
template <typename T>
std::pair<Tensor<T>, Tensor<T>> run_stack_views(const MixerParams<T>& params, const MixerConfig& cfg,
                                                const Tensor<T>& forward_view, const Tensor<T>& reversed_view,
                                                bool training, std::mt19937_64& rng) {
  if (!cfg.mix_view) {
    return {stack_forward(cfg.block, params.stack, forward_view, training, rng), Tensor<T>()};
  }
  const std::size_t batch = forward_view.dim(1);
  const Tensor<T> joint = concat(std::vector<Tensor<T>>{forward_view, reversed_view}, 1);
  const Tensor<T> out = stack_forward(cfg.block, params.stack, joint, training, rng);
  return {slice(out, 1, 0, batch), slice(out, 1, batch, 2 * batch)};
}

}  // namespace

template <typename T>
std::pair<Tensor<T>, Tensor<T>> refine_views(const MixerParams<T>& params, const MixerConfig& cfg,
                                             const Tensor<T>& forward_view, const Tensor<T>& reversed_view,
                                             bool training, std::mt19937_64& rng) {
  if (forward_view.shape() != reversed_view.shape()) {
    throw ShapeError("refine_views: view shapes differ: " + shape_to_string(forward_view.shape()) + " vs " +
                     shape_to_string(reversed_view.shape()));
  }
  auto [first, second] = run_stack_views(params, cfg, forward_view, reversed_view, training, rng);
  Tensor<T> y_prime = data_rows(first, cfg.init_token);
  Tensor<T> y_double_prime = cfg.mix_view ? data_rows(second, cfg.init_token) : y_prime;
  return {std::move(y_prime), std::move(y_double_prime)};
}

template <typename T>
MixerOutput<T> mixer_forward(const MixerParams<T>& params, const MixerConfig& cfg, const Tensor<T>& x, bool training,
                             std::mt19937_64& rng) {
  const bool single = x.rank() == 2;
  const Tensor<T> batch_x = single ? reshape(x, Shape{1, x.dim(0), x.dim(1)}) : x;
  if (batch_x.rank() != 3 || batch_x.dim(1) != cfg.num_variates || batch_x.dim(2) != cfg.lookback) {
    throw ShapeError("mixer_forward: input " + shape_to_string(x.shape()) + " does not match [B x " +
                     std::to_string(cfg.num_variates) + " x " + std::to_string(cfg.lookback) + "]");
  }
  for (T v : batch_x.data()) {
    if (!std::isfinite(v)) throw NumericError("mixer_forward: input window contains non-finite values");
  }

  MixerOutput<T> result;
  ForwardTrace<T>& trace = result.trace;
  RevInStats<T> stats;
  std::tie(trace.x_norm, stats) = revin_normalize(params.revin, batch_x);
  trace.x_initial =
      cfg.mix_time ? nlinear_forecast(params.nlinear_weight, params.nlinear_bias, trace.x_norm) : trace.x_norm;

  const bool over_time = cfg.slstm_axis == SLstmAxis::kTime;
  const Tensor<T> token_rows = over_time ? transpose(trace.x_initial, 1, 2) : trace.x_initial;
  trace.x_up = up_project_and_prepend(params, token_rows, cfg);
  trace.x_up_reversed = reverse_latent_view(trace.x_up);

  if (cfg.slstm_axis == SLstmAxis::kNone) {
    trace.y_prime = data_rows(trace.x_up, cfg.init_token);
    trace.y_double_prime = cfg.mix_view ? data_rows(trace.x_up_reversed, cfg.init_token) : trace.y_prime;
  } else {
    std::tie(trace.y_prime, trace.y_double_prime) =
        refine_views(params, cfg, trace.x_up, trace.x_up_reversed, training, rng);
  }

  const Tensor<T> reconciled = reconcile_views(params.view_weight, params.view_bias, trace.y_prime, trace.y_double_prime);
  trace.y_norm = over_time ? transpose(reconciled, 1, 2) : reconciled;
  trace.y = revin_denormalize(params.revin, stats, trace.y_norm);
  result.y = single ? reshape(trace.y, Shape{cfg.num_variates, cfg.horizon}) : trace.y;
  return result;
}

template <typename T>
Tensor<T> decode_init_token(const MixerParams<T>& params, const MixerConfig& cfg) {
  if (!cfg.init_token || !params.eta.defined()) throw ConfigError("decode_init_token: model has no initial token");
  if (cfg.slstm_axis != SLstmAxis::kVariates) {
    throw ConfigError("decode_init_token: only defined when the stack strides over variates");
  }
  const std::size_t d = cfg.embed_dim;
  const Tensor<T> token = reshape(params.eta, Shape{1, 1, d});
  std::mt19937_64 unused_rng(0);
  auto [first, second] = run_stack_views(params, cfg, token, reverse_latent_view(token), false, unused_rng);
  const Tensor<T> y_prime = transpose(first, 0, 1);
  const Tensor<T> y_double_prime = cfg.mix_view ? transpose(second, 0, 1) : y_prime;
  const Tensor<T> out = reconcile_views(params.view_weight, params.view_bias, y_prime, y_double_prime);
  return reshape(out, Shape{1, params.view_weight.dim(0)});
}

#define XLSTM_MIXER_INSTANTIATE(T)                                                                                 \
  template struct RevInParams<T>;                                                                                  \
  template struct MixerParams<T>;                                                                                  \
  template std::pair<Tensor<T>, RevInStats<T>> revin_normalize(const RevInParams<T>&, const Tensor<T>&);          \
  template Tensor<T> revin_denormalize(const RevInParams<T>&, const RevInStats<T>&, const Tensor<T>&);            \
  template Tensor<T> nlinear_forecast(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);                      \
  template Tensor<T> up_project_and_prepend(const MixerParams<T>&, const Tensor<T>&, const MixerConfig&);         \
  template Tensor<T> reverse_latent_view(const Tensor<T>&);                                                        \
  template Tensor<T> reconcile_views(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const Tensor<T>&);     \
  template std::pair<Tensor<T>, Tensor<T>> refine_views(const MixerParams<T>&, const MixerConfig&,                \
                                                        const Tensor<T>&, const Tensor<T>&, bool, std::mt19937_64&); \
  template MixerOutput<T> mixer_forward(const MixerParams<T>&, const MixerConfig&, const Tensor<T>&, bool,        \
                                        std::mt19937_64&);                                                         \
  template Tensor<T> decode_init_token(const MixerParams<T>&, const MixerConfig&);

XLSTM_MIXER_INSTANTIATE(float)
XLSTM_MIXER_INSTANTIATE(double)
XLSTM_MIXER_INSTANTIATE(long double)

#undef XLSTM_MIXER_INSTANTIATE

}  // namespace xlstm_mixer
