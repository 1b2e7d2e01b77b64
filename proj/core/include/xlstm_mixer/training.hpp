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

// MAE objective, global-norm clipping, Adam, the warmup + cosine schedule and
// the epoch loop with early stopping and best-checkpoint tracking.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "xlstm_mixer/data.hpp"
#include "xlstm_mixer/mixer.hpp"

namespace xlstm_mixer {

struct TrainConfig {
  std::size_t batch_size = 32;
  double lr_initial = 1e-3;
  std::size_t warmup_steps = 5;
  std::size_t max_epochs = 60;
  double clip_norm = 1.0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double weight_decay = 0.0;  // coupled L2, added to the gradient
  std::uint64_t seed = 2021;
  std::size_t patience = 10;

  void validate() const;
};

/// Mean of |pred - target| over every entry; the subgradient at 0 is 0.
template <typename T>
Tensor<T> mae_loss(const Tensor<T>& pred, const Tensor<T>& target);

/// Joint L2 norm of all arrays.
template <typename T>
double global_norm(std::span<const std::span<T>> arrays);

/// Rescales every array by clip_norm / g when the joint norm g exceeds
/// clip_norm; returns g. Throws NumericError on a non-finite entry.
template <typename T>
double clip_global_norm(std::span<const std::span<T>> grads, double clip_norm);

template <typename T>
struct AdamState {
  std::vector<std::vector<T>> m;
  std::vector<std::vector<T>> v;
  std::size_t t = 0;

  static AdamState like(const std::vector<NamedParameter<T>>& params);
};

/// One bias-corrected Adam update of a single array at step t (t >= 1):
/// theta -= lr * m_hat / (sqrt(v_hat) + 1e-8).
template <typename T>
void adam_update(std::span<T> theta, std::span<const T> grad, std::span<T> m, std::span<T> v, std::size_t t,
                 double lr, double beta1, double beta2);

/// Advances state.t and updates every parameter from its gradient (missing
/// gradients count as zero). Masked weights are re-masked afterwards.
template <typename T>
void adam_step(AdamState<T>& state, const std::vector<NamedParameter<T>>& params, double lr, const TrainConfig& cfg);

/// Linear ramp from 0 to lr_initial over warmup_steps, then cosine decay to 0
/// at total_steps.
double lr_at_step(std::size_t step, std::size_t total_steps, const TrainConfig& cfg);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_mae = 0.0;
  double val_mae = 0.0;
  double lr = 0.0;  // rate of the epoch's last update
};

struct RunArtifacts {
  std::filesystem::path best_checkpoint;  // empty when not written
  std::vector<EpochRecord> log;
  std::size_t epochs_trained = 0;
  std::size_t best_epoch = 0;
  double best_val_mae = 0.0;
  std::size_t steps = 0;
  double wall_time_s = 0.0;
};

struct FitOptions {
  std::filesystem::path checkpoint_dir;  // best parameters are saved here on improvement
  std::filesystem::path loss_log;        // one JSON record per epoch
  nlohmann::ordered_json checkpoint_metadata = nlohmann::ordered_json::object();
  std::optional<std::size_t> max_steps;  // stops (and shortens the schedule) after this many updates
  std::function<void(const EpochRecord&)> on_epoch;
};

/// Mean absolute error of the model over a dataset, evaluation mode.
template <typename T>
double evaluate_mae(const MixerParams<T>& params, const MixerConfig& cfg, const WindowedDataset& data,
                    std::size_t batch_size);

/// Forecasts for every window in order, flattened [N x V x H].
template <typename T>
std::vector<double> predict_all(const MixerParams<T>& params, const MixerConfig& cfg, const WindowedDataset& data,
                                std::size_t batch_size);

/// Trains in place. Batches are reshuffled every epoch from cfg.seed; after
/// `patience` epochs without a lower validation MAE training stops and the
/// best parameters are restored. Throws NumericError (epoch, batch, loss) when
/// the loss stops being finite.
template <typename T>
RunArtifacts fit(MixerParams<T>& params, const MixerConfig& model, const WindowedDataset& train,
                 const WindowedDataset& val, const TrainConfig& cfg, const FitOptions& options = {});

}  // namespace xlstm_mixer
