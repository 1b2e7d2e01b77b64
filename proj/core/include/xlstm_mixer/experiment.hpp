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

// End-to-end runs: load, split, standardize, train, evaluate on the test
// split and report. Models train in single precision.

#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "xlstm_mixer/data.hpp"
#include "xlstm_mixer/mixer.hpp"
#include "xlstm_mixer/report.hpp"
#include "xlstm_mixer/training.hpp"

namespace xlstm_mixer {

/// A standardized series with its split.
struct PreparedData {
  std::string name;
  DatasetKind kind = DatasetKind::kGeneric;
  std::shared_ptr<const RawSeries> series;
  StandardizationStats stats;
  SplitSpec split;
};

PreparedData prepare_dataset(const RawSeries& raw, DatasetKind kind, std::string name);
/// Names the dataset after the file stem.
PreparedData prepare_dataset(const std::filesystem::path& csv, DatasetKind kind);

WindowedDataset split_windows(const PreparedData& data, SplitName which, std::size_t lookback, std::size_t horizon);

struct RunOutcome {
  MetricsReport report;
  RunArtifacts artifacts;
};

/// Trains from a fresh initialization seeded with train.seed and scores the
/// restored best parameters on the test split. Writes
/// `out_dir/checkpoint/` and `out_dir/loss_log.jsonl`. The model's variate
/// count is taken from the data.
RunOutcome train_and_evaluate(const PreparedData& data, MixerConfig model, const TrainConfig& train,
                              const std::filesystem::path& out_dir, const std::string& config_id = "full");

struct ExperimentSpec {
  std::filesystem::path data;
  DatasetKind kind = DatasetKind::kGeneric;
  std::vector<std::size_t> horizons;
  std::vector<std::uint64_t> seeds;
  MixerConfig model;
  TrainConfig train;
  std::filesystem::path out_dir;
  std::string config_id = "full";
  EmitOptions emit;
};

struct RunFailure {
  std::size_t horizon = 0;
  std::uint64_t seed = 0;
  std::string message;
};

struct ExperimentResult {
  std::vector<MetricsReport> reports;  // runs in (horizon, seed) order, then means
  std::vector<RunFailure> failures;
};

/// Runs every (horizon, seed) pair into `out_dir/H<h>_seed<s>/` and writes
/// `out_dir/report.jsonl` with the companion table. A failing run is recorded
/// and the remaining runs continue.
ExperimentResult run_experiment(const ExperimentSpec& spec);

}  // namespace xlstm_mixer
