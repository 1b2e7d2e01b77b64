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

// Forecast error metrics and the report files written by experiments.

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace xlstm_mixer {

inline constexpr double kMapeEpsilon = 1e-8;

struct Metrics {
  double mse = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  double mape = 0.0;  // percent
};

/// Means over every entry of two equally sized flat arrays:
/// MAPE = 100 * mean(|y - y_hat| / (|y| + 1e-8)), RMSE = sqrt(MSE).
Metrics compute_metrics(std::span<const double> pred, std::span<const double> target);

struct MetricsReport {
  std::string dataset;
  std::size_t horizon = 0;
  std::size_t lookback = 0;
  std::optional<std::int64_t> seed;  // empty on rows averaged over seeds
  double mse = 0.0;
  double mae = 0.0;
  double rmse = 0.0;
  double mape = 0.0;
  std::size_t epochs_trained = 0;
  double wall_time_s = 0.0;
  std::string config_id = "full";

  bool operator==(const MetricsReport&) const = default;
};

MetricsReport make_report(const Metrics& m);

/// One row per (dataset, horizon, config) group with at least two seeded
/// rows, in first-appearance order: MSE, MAE and MAPE are arithmetic means and RMSE is
/// recomputed as sqrt(mean MSE) so every row keeps rmse^2 == mse.
std::vector<MetricsReport> mean_over_seeds(const std::vector<MetricsReport>& reports);

/// A window's history, ground truth and forecast for one variate.
struct ForecastSample {
  std::string label;
  std::size_t variate = 0;
  std::vector<double> history;
  std::vector<double> target;
  std::vector<double> forecast;
};

/// A named series for plotting, e.g. a decoded initial token.
struct NamedSeries {
  std::string name;
  std::vector<double> values;
};

struct EmitOptions {
  bool include_timing = true;  // wall_time_s varies between otherwise identical runs
};

/// Paths derived from the JSONL report path `report.jsonl`:
/// report.table.txt, report.forecast.csv and report.token.csv.
std::filesystem::path table_path(const std::filesystem::path& report);
std::filesystem::path forecast_path(const std::filesystem::path& report);
std::filesystem::path token_path(const std::filesystem::path& report);

/// Writes one JSON record per report with a fixed key order plus the text
/// table. Plot files are only written when their inputs are non-empty.
void emit_report(const std::vector<MetricsReport>& reports, const std::filesystem::path& path,
                 const std::vector<ForecastSample>& samples = {}, const std::vector<NamedSeries>& series = {},
                 const EmitOptions& options = {});

std::vector<MetricsReport> parse_report(const std::filesystem::path& path);

/// Column files on their own: `sample,variate,step,x,y,y_hat` and `step,<names...>`.
void write_forecast_csv(const std::filesystem::path& path, const std::vector<ForecastSample>& samples);
void write_series_csv(const std::filesystem::path& path, const std::vector<NamedSeries>& series);

}  // namespace xlstm_mixer
