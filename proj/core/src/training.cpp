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

#include "xlstm_mixer/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <numeric>
#include <random>

#include "xlstm_mixer/checkpoint.hpp"
#include "xlstm_mixer/errors.hpp"

namespace xlstm_mixer {

void TrainConfig::validate() const {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  if (!(lr_initial > 0.0)) throw ConfigError("initial learning rate must be positive");
  if (!(clip_norm > 0.0)) throw ConfigError("clip norm must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(weight_decay >= 0.0)) throw ConfigError("weight decay must be non-negative");
  if (max_epochs == 0) throw ConfigError("max epochs must be at least 1");
}

template <typename T>
Tensor<T> mae_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("mae_loss: prediction " + shape_to_string(pred.shape()) + " vs target " +
                     shape_to_string(target.shape()));
  }
  return mean_all(abs(sub(pred, target)));
}

template <typename T>
double global_norm(std::span<const std::span<T>> arrays) {
  double sq = 0.0;
  for (const auto& a : arrays) {
    for (T g : a) sq += static_cast<double>(g) * static_cast<double>(g);
  }
  return std::sqrt(sq);
}

template <typename T>
double clip_global_norm(std::span<const std::span<T>> grads, double clip_norm) {
  if (!(clip_norm > 0.0)) throw ConfigError("clip_global_norm: clip norm must be positive");
  for (const auto& a : grads) {
    for (T g : a) {
      if (!std::isfinite(g)) throw NumericError("clip_global_norm: non-finite gradient entry");
    }
  }
  const double norm = global_norm(grads);
  if (norm > clip_norm) {
    const T factor = static_cast<T>(clip_norm / norm);
    for (const auto& a : grads) {
      for (T& g : a) g *= factor;
    }
  }
  return norm;
}

template <typename T>
AdamState<T> AdamState<T>::like(const std::vector<NamedParameter<T>>& params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.tensor.numel(), T(0));
    s.v.emplace_back(p.tensor.numel(), T(0));
  }
  return s;
}

template <typename T>
void adam_update(std::span<T> theta, std::span<const T> grad, std::span<T> m, std::span<T> v, std::size_t t,
                 double lr, double beta1, double beta2) {
  if (grad.size() != theta.size() || m.size() != theta.size() || v.size() != theta.size()) {
    throw ShapeError("adam_update: parameter, gradient and moment sizes differ");
  }
  if (t == 0) throw std::invalid_argument("adam_update: step counter starts at 1");
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
  for (std::size_t k = 0; k < theta.size(); ++k) {
    const double g = grad[k];
    const double mk = beta1 * m[k] + (1.0 - beta1) * g;
    const double vk = beta2 * v[k] + (1.0 - beta2) * g * g;
    m[k] = static_cast<T>(mk);
    v[k] = static_cast<T>(vk);
    const double m_hat = mk / c1;
    const double v_hat = vk / c2;
    theta[k] = static_cast<T>(theta[k] - lr * m_hat / (std::sqrt(v_hat) + 1e-8));
  }
}

template <typename T>
void adam_step(AdamState<T>& state, const std::vector<NamedParameter<T>>& params, double lr, const TrainConfig& cfg) {
  if (state.m.size() != params.size()) throw ShapeError("adam_step: state does not match the parameter list");
  ++state.t;
  std::vector<T> grad;
  for (std::size_t p = 0; p < params.size(); ++p) {
    Tensor<T> tensor = params[p].tensor;
    auto theta = tensor.mutable_data();
    if (tensor.has_grad()) {
      const auto g = tensor.grad();
      grad.assign(g.begin(), g.end());
    } else {
      grad.assign(theta.size(), T(0));
    }
    if (cfg.weight_decay > 0.0) {
      for (std::size_t k = 0; k < grad.size(); ++k) grad[k] += static_cast<T>(cfg.weight_decay) * theta[k];
    }
    adam_update<T>(theta, grad, state.m[p], state.v[p], state.t, lr, cfg.beta1, cfg.beta2);
    if (params[p].mask.defined()) {
      const auto mask = params[p].mask.data();
      for (std::size_t k = 0; k < theta.size(); ++k) {
        if (mask[k] == T(0)) theta[k] = T(0);
      }
    }
  }
}

double lr_at_step(std::size_t step, std::size_t total_steps, const TrainConfig& cfg) {
  if (step > total_steps) throw std::out_of_range("lr_at_step: step beyond the schedule");
  if (cfg.warmup_steps >= total_steps) {
    throw ConfigError("warmup of " + std::to_string(cfg.warmup_steps) + " steps does not fit a schedule of " +
                      std::to_string(total_steps) + " steps");
  }
  if (step < cfg.warmup_steps) {
    return cfg.lr_initial * static_cast<double>(step) / static_cast<double>(cfg.warmup_steps);
  }
  const double progress =
      static_cast<double>(step - cfg.warmup_steps) / static_cast<double>(total_steps - cfg.warmup_steps);
  return cfg.lr_initial * 0.5 * (1.0 + std::cos(std::numbers::pi * progress));
}

template <typename T>
std::vector<double> predict_all(const MixerParams<T>& params, const MixerConfig& cfg, const WindowedDataset& data,
                                std::size_t batch_size) {
  if (batch_size == 0) throw ConfigError("batch size must be at least 1");
  std::mt19937_64 unused(0);
  std::vector<double> out;
  out.reserve(data.size() * data.num_variates() * data.horizon());
  std::vector<std::size_t> idx;
  for (std::size_t start = 0; start < data.size(); start += batch_size) {
    idx.resize(std::min(batch_size, data.size() - start));
    std::iota(idx.begin(), idx.end(), start);
    const auto [x, y] = data.batch<T>(idx);
    const auto pred = mixer_forward(params, cfg, x, false, unused).y;
    for (T v : pred.data()) out.push_back(static_cast<double>(v));
  }
  return out;
}

template <typename T>
double evaluate_mae(const MixerParams<T>& params, const MixerConfig& cfg, const WindowedDataset& data,
                    std::size_t batch_size) {
  if (data.empty()) throw DataError("evaluate_mae: empty dataset");
  const auto pred = predict_all(params, cfg, data, batch_size);
  const std::size_t per_window = data.num_variates() * data.horizon();
  double total = 0.0;
  for (std::size_t w = 0; w < data.size(); ++w) {
    const auto target = data.target(w);
    for (std::size_t k = 0; k < per_window; ++k) total += std::abs(pred[w * per_window + k] - target[k]);
  }
  return total / static_cast<double>(pred.size());
}

template <typename T>
RunArtifacts fit(MixerParams<T>& params, const MixerConfig& model, const WindowedDataset& train,
                 const WindowedDataset& val, const TrainConfig& cfg, const FitOptions& options) {
  cfg.validate();
  model.validate();
  if (train.empty() || val.empty()) throw DataError("fit: train and validation sets must be non-empty");
  if (train.num_variates() != model.num_variates || train.lookback() != model.lookback ||
      train.horizon() != model.horizon) {
    throw ConfigError("fit: dataset windows do not match the model configuration");
  }
  const auto start_time = std::chrono::steady_clock::now();

  const std::size_t batches = (train.size() + cfg.batch_size - 1) / cfg.batch_size;
  std::size_t total_steps = cfg.max_epochs * batches;
  if (options.max_steps) total_steps = std::min(total_steps, *options.max_steps);
  if (total_steps == 0) throw ConfigError("fit: max_steps must be positive");

  std::mt19937_64 shuffle_rng(cfg.seed);
  std::mt19937_64 dropout_rng(cfg.seed ^ 0x9E3779B97F4A7C15ULL);

  const auto named = params.parameters();
  for (const auto& p : named) {
    Tensor<T> handle = p.tensor;
    handle.set_requires_grad(true);
  }
  AdamState<T> adam = AdamState<T>::like(named);
  std::vector<std::span<T>> grads;

  std::ofstream log_out;
  if (!options.loss_log.empty()) {
    if (options.loss_log.has_parent_path()) std::filesystem::create_directories(options.loss_log.parent_path());
    log_out.open(options.loss_log, std::ios::trunc);
    if (!log_out) throw DataError("cannot write loss log " + options.loss_log.string());
  }

  RunArtifacts run;
  run.best_val_mae = std::numeric_limits<double>::infinity();
  MixerParams<T> best = params.clone();
  std::size_t since_improvement = 0;
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  double lr = 0.0;

  for (std::size_t epoch = 1; epoch <= cfg.max_epochs && run.steps < total_steps; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double loss_sum = 0.0;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < batches && run.steps < total_steps; ++b) {
      const std::size_t begin = b * cfg.batch_size;
      const std::size_t end = std::min(begin + cfg.batch_size, order.size());
      const auto [x, y] = train.batch<T>(std::span<const std::size_t>(order.data() + begin, end - begin));
      for (const auto& p : named) {
        Tensor<T> handle = p.tensor;
        handle.zero_grad();
      }
      double loss_value = 0.0;
      {
        Tape<T> tape;
        const Tensor<T> loss = mae_loss(mixer_forward(params, model, x, true, dropout_rng).y, y);
        loss_value = static_cast<double>(loss.item());
        if (!std::isfinite(loss_value)) {
          throw NumericError("training loss became non-finite at epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(b + 1) + " (loss " + std::to_string(loss_value) + ")");
        }
        tape.backward(loss);
      }
      grads.clear();
      for (const auto& p : named) {
        Tensor<T> handle = p.tensor;
        if (handle.has_grad()) grads.push_back(handle.mutable_grad());
      }
      clip_global_norm<T>(grads, cfg.clip_norm);
      lr = lr_at_step(run.steps + 1, total_steps, cfg);
      adam_step(adam, named, lr, cfg);
      ++run.steps;
      loss_sum += loss_value * static_cast<double>(end - begin);
      seen += end - begin;
    }

    EpochRecord record{epoch, loss_sum / static_cast<double>(seen), evaluate_mae(params, model, val, cfg.batch_size),
                       lr};
    run.log.push_back(record);
    run.epochs_trained = epoch;
    if (log_out) {
      nlohmann::ordered_json line;
      line["epoch"] = record.epoch;
      line["train_mae"] = record.train_mae;
      line["val_mae"] = record.val_mae;
      line["lr"] = record.lr;
      log_out << line.dump() << '\n' << std::flush;
    }
    if (options.on_epoch) options.on_epoch(record);

    if (record.val_mae < run.best_val_mae) {
      run.best_val_mae = record.val_mae;
      run.best_epoch = epoch;
      best = params.clone();
      since_improvement = 0;
      if (!options.checkpoint_dir.empty()) {
        save_checkpoint(options.checkpoint_dir, model, params, options.checkpoint_metadata);
        run.best_checkpoint = options.checkpoint_dir;
      }
    } else if (++since_improvement > cfg.patience) {
      break;
    }
  }

  // Copy the best values back into the caller's tensors so outside handles stay valid.
  const auto best_named = best.parameters();
  for (std::size_t p = 0; p < named.size(); ++p) {
    Tensor<T> handle = named[p].tensor;
    const auto src = best_named[p].tensor.data();
    std::copy(src.begin(), src.end(), handle.mutable_data().begin());
    handle.zero_grad();
    handle.set_requires_grad(false);
  }
  run.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_time).count();
  return run;
}

#define XLSTM_MIXER_INSTANTIATE(T)                                                                                 \
  template Tensor<T> mae_loss(const Tensor<T>&, const Tensor<T>&);                                                 \
  template double global_norm(std::span<const std::span<T>>);                                                      \
  template double clip_global_norm(std::span<const std::span<T>>, double);                                         \
  template struct AdamState<T>;                                                                                    \
  template void adam_update(std::span<T>, std::span<const T>, std::span<T>, std::span<T>, std::size_t, double,     \
                            double, double);                                                                       \
  template void adam_step(AdamState<T>&, const std::vector<NamedParameter<T>>&, double, const TrainConfig&);       \
  template std::vector<double> predict_all(const MixerParams<T>&, const MixerConfig&, const WindowedDataset&,     \
                                           std::size_t);                                                           \
  template double evaluate_mae(const MixerParams<T>&, const MixerConfig&, const WindowedDataset&, std::size_t);    \
  template RunArtifacts fit(MixerParams<T>&, const MixerConfig&, const WindowedDataset&, const WindowedDataset&,   \
                            const TrainConfig&, const FitOptions&);

XLSTM_MIXER_INSTANTIATE(float)
XLSTM_MIXER_INSTANTIATE(double)

#undef XLSTM_MIXER_INSTANTIATE

}  // namespace xlstm_mixer
