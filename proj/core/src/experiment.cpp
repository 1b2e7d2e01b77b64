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

#include "xlstm_mixer/experiment.hpp"

#include <stdexcept>

#include "xlstm_mixer/checkpoint.hpp"
#include "xlstm_mixer/errors.hpp"

namespace xlstm_mixer {

namespace fs = std::filesystem;

PreparedData prepare_dataset(const RawSeries& raw, DatasetKind kind, std::string name) {
  PreparedData data;
  data.name = std::move(name);
  data.kind = kind;
  data.split = chronological_split(raw.length(), kind);
  auto [standardized, stats] = standardize(raw, data.split);
  data.series = std::make_shared<const RawSeries>(std::move(standardized));
  data.stats = std::move(stats);
  return data;
}

PreparedData prepare_dataset(const fs::path& csv, DatasetKind kind) {
  return prepare_dataset(load_csv(csv), kind, csv.stem().string());
}

WindowedDataset split_windows(const PreparedData& data, SplitName which, std::size_t lookback, std::size_t horizon) {
  return window_iter(data.series, usable_range(data.split, which, lookback), lookback, horizon);
}

RunOutcome train_and_evaluate(const PreparedData& data, MixerConfig model, const TrainConfig& train,
                              const fs::path& out_dir, const std::string& config_id) {
  model.num_variates = data.series->num_variates();
  model.validate();
  const auto train_set = split_windows(data, SplitName::kTrain, model.lookback, model.horizon);
  const auto val_set = split_windows(data, SplitName::kVal, model.lookback, model.horizon);
  const auto test_set = split_windows(data, SplitName::kTest, model.lookback, model.horizon);

  auto params = MixerParams<float>::initialized(model, train.seed);
  FitOptions options;
  options.checkpoint_dir = out_dir / "checkpoint";
  options.loss_log = out_dir / "loss_log.jsonl";
  options.checkpoint_metadata["dataset"] = data.name;
  options.checkpoint_metadata["dataset_kind"] = std::string(to_string(data.kind));
  options.checkpoint_metadata["config_id"] = config_id;
  options.checkpoint_metadata["seed"] = train.seed;

  RunOutcome outcome;
  outcome.artifacts = fit(params, model, train_set, val_set, train, options);
  // fit restored the best parameters; store them again with the final bookkeeping.
  auto metadata = options.checkpoint_metadata;
  metadata["epochs_trained"] = outcome.artifacts.epochs_trained;
  metadata["best_epoch"] = outcome.artifacts.best_epoch;
  save_checkpoint(options.checkpoint_dir, model, params, metadata);
  outcome.artifacts.best_checkpoint = options.checkpoint_dir;

  std::vector<double> target;
  target.reserve(test_set.size() * model.num_variates * model.horizon);
  for (std::size_t w = 0; w < test_set.size(); ++w) {
    const auto y = test_set.target(w);
    target.insert(target.end(), y.begin(), y.end());
  }
  const auto pred = predict_all(params, model, test_set, train.batch_size);
  outcome.report = make_report(compute_metrics(pred, target));
  outcome.report.dataset = data.name;
  outcome.report.horizon = model.horizon;
  outcome.report.lookback = model.lookback;
  outcome.report.seed = static_cast<std::int64_t>(train.seed);
  outcome.report.epochs_trained = outcome.artifacts.epochs_trained;
  outcome.report.wall_time_s = outcome.artifacts.wall_time_s;
  outcome.report.config_id = config_id;
  return outcome;
}

ExperimentResult run_experiment(const ExperimentSpec& spec) {
  if (spec.horizons.empty() || spec.seeds.empty()) throw ConfigError("experiment needs at least one horizon and seed");
  const PreparedData data = prepare_dataset(spec.data, spec.kind);
  ExperimentResult result;
  for (std::size_t horizon : spec.horizons) {
    for (std::uint64_t seed : spec.seeds) {
      MixerConfig model = spec.model;
      model.horizon = horizon;
      TrainConfig train = spec.train;
      train.seed = seed;
      const fs::path dir = spec.out_dir / ("H" + std::to_string(horizon) + "_seed" + std::to_string(seed));
      try {
        result.reports.push_back(train_and_evaluate(data, model, train, dir, spec.config_id).report);
      } catch (const std::exception& e) {
        result.failures.push_back({horizon, seed, e.what()});
      }
    }
  }
  const auto means = mean_over_seeds(result.reports);
  result.reports.insert(result.reports.end(), means.begin(), means.end());
  if (!result.reports.empty()) emit_report(result.reports, spec.out_dir / "report.jsonl", {}, {}, spec.emit);
  return result;
}

}  // namespace xlstm_mixer
