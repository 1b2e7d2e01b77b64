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

#include "xlstm_mixer/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

#include "xlstm_mixer/errors.hpp"

namespace xlstm_mixer {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"') s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    if (line[k] == '"') quoted = !quoted;
    if (line[k] == ',' && !quoted) {
      fields.push_back(trim(line.substr(start, k - start)));
      start = k + 1;
    }
  }
  fields.push_back(trim(line.substr(start)));
  return fields;
}

bool parse_number(std::string_view cell, double& out) {
  if (cell.empty()) return false;
  if (cell.front() == '+') cell.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), out);
  return ec == std::errc() && ptr == cell.data() + cell.size() && std::isfinite(out);
}

// "YYYY-MM-DD..." sorts chronologically as text.
bool looks_iso8601(std::string_view ts) {
  if (ts.size() < 10) return false;
  for (std::size_t k : {0u, 1u, 2u, 3u, 5u, 6u, 8u, 9u}) {
    if (ts[k] < '0' || ts[k] > '9') return false;
  }
  return ts[4] == '-' && ts[7] == '-';
}

std::string where(const std::string& source, std::size_t line, std::size_t column) {
  return source + ":" + std::to_string(line) + ": column " + std::to_string(column);
}

}  // namespace

RawSeries parse_csv(std::istream& in, const std::string& source) {
  RawSeries series;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!trim(line).empty()) break;
  }
  if (line_no == 0 || trim(line).empty()) throw DataError(source + ": missing header row");
  const auto header = split_fields(line);
  if (header.size() < 2) throw DataError(source + ": header needs a timestamp column and at least one variate");
  for (std::size_t c = 1; c < header.size(); ++c) series.names.emplace_back(header[c]);
  const std::size_t width = header.size();

  bool iso = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != width) {
      throw DataError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) +
                      " columns, found " + std::to_string(fields.size()));
    }
    series.timestamps.emplace_back(fields[0]);
    for (std::size_t c = 1; c < width; ++c) {
      double v = 0.0;
      if (!parse_number(fields[c], v)) {
        throw DataError(where(source, line_no, c + 1) + " (" + series.names[c - 1] + "): cannot parse '" +
                        std::string(fields[c]) + "' as a number");
      }
      series.values.push_back(v);
    }
    const std::size_t n = series.timestamps.size();
    iso = iso && looks_iso8601(series.timestamps.back());
    if (iso && n >= 2 && !(series.timestamps[n - 2] < series.timestamps[n - 1])) {
      throw DataError(source + ":" + std::to_string(line_no) + ": timestamp '" + series.timestamps.back() +
                      "' does not follow '" + series.timestamps[n - 2] + "'");
    }
  }
  if (series.timestamps.empty()) throw DataError(source + ": no data rows");
  return series;
}

RawSeries load_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  return parse_csv(in, path.string());
}

std::string_view to_string(DatasetKind kind) {
  switch (kind) {
    case DatasetKind::kEttHourly:
      return "etth";
    case DatasetKind::kEttQuarterHourly:
      return "ettm";
    case DatasetKind::kGeneric:
      return "generic";
  }
  return "generic";
}

DatasetKind parse_dataset_kind(std::string_view text) {
  if (text == "etth") return DatasetKind::kEttHourly;
  if (text == "ettm") return DatasetKind::kEttQuarterHourly;
  if (text == "generic") return DatasetKind::kGeneric;
  throw ConfigError("unknown dataset kind '" + std::string(text) + "' (expected etth, ettm or generic)");
}

std::string_view to_string(SplitName split) {
  switch (split) {
    case SplitName::kTrain:
      return "train";
    case SplitName::kVal:
      return "val";
    case SplitName::kTest:
      return "test";
  }
  return "test";
}

SplitName parse_split_name(std::string_view text) {
  if (text == "train") return SplitName::kTrain;
  if (text == "val") return SplitName::kVal;
  if (text == "test") return SplitName::kTest;
  throw ConfigError("unknown split '" + std::string(text) + "' (expected train, val or test)");
}

SplitSpec chronological_split(std::size_t total_rows, DatasetKind kind) {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
  if (kind == DatasetKind::kGeneric) {
    train = total_rows * 7 / 10;
    test = total_rows * 2 / 10;
    val = total_rows - train - test;
    if (train == 0 || val == 0 || test == 0) {
      throw DataError("series of " + std::to_string(total_rows) + " rows is too short for a 70/10/20 split");
    }
  } else {
    const std::size_t per_day = kind == DatasetKind::kEttHourly ? 24 : 96;
    train = 12 * 30 * per_day;
    val = 4 * 30 * per_day;
    test = 4 * 30 * per_day;
    if (total_rows < train + val + test) {
      throw DataError(std::string(to_string(kind)) + " split needs at least " + std::to_string(train + val + test) +
                      " rows, series has " + std::to_string(total_rows));
    }
  }
  return SplitSpec{{0, train}, {train, train + val}, {train + val, train + val + test}};
}

IndexRange usable_range(const SplitSpec& split, SplitName which, std::size_t lookback) {
  switch (which) {
    case SplitName::kTrain:
      return split.train;
    case SplitName::kVal:
      return {split.val.begin >= lookback ? split.val.begin - lookback : 0, split.val.end};
    case SplitName::kTest:
      return {split.test.begin >= lookback ? split.test.begin - lookback : 0, split.test.end};
  }
  return split.test;
}

std::pair<RawSeries, StandardizationStats> standardize(const RawSeries& raw, const SplitSpec& split) {
  const std::size_t v_count = raw.num_variates();
  if (split.train.size() == 0) throw DataError("standardize: empty train range");
  if (split.train.end > raw.length()) throw DataError("standardize: train range exceeds the series");

  StandardizationStats stats{std::vector<double>(v_count, 0.0), std::vector<double>(v_count, 0.0)};
  const double n = static_cast<double>(split.train.size());
  for (std::size_t v = 0; v < v_count; ++v) {
    double sum = 0.0;
    for (std::size_t r = split.train.begin; r < split.train.end; ++r) sum += raw.at(r, v);
    const double mean = sum / n;
    double sq = 0.0;
    for (std::size_t r = split.train.begin; r < split.train.end; ++r) {
      const double d = raw.at(r, v) - mean;
      sq += d * d;
    }
    const double std = std::sqrt(sq / n);
    if (!(std > 0.0)) throw DataError("variate '" + raw.names[v] + "' has zero variance on the train range");
    stats.mean[v] = mean;
    stats.std[v] = std;
  }

  RawSeries out = raw;
  for (std::size_t r = 0; r < out.length(); ++r) {
    for (std::size_t v = 0; v < v_count; ++v) {
      double& cell = out.values[r * v_count + v];
      cell = (cell - stats.mean[v]) / stats.std[v];
    }
  }
  return {std::move(out), std::move(stats)};
}

WindowedDataset::WindowedDataset(std::shared_ptr<const RawSeries> series, IndexRange rows, std::size_t lookback,
                                 std::size_t horizon)
    : series_(std::move(series)), rows_(rows), lookback_(lookback), horizon_(horizon), count_(0) {
  if (!series_) throw DataError("windowed dataset needs a series");
  if (lookback == 0 || horizon == 0) throw ConfigError("lookback and horizon must be positive");
  if (rows.begin > rows.end || rows.end > series_->length()) {
    throw DataError("row range [" + std::to_string(rows.begin) + ", " + std::to_string(rows.end) +
                    ") exceeds the series of " + std::to_string(series_->length()) + " rows");
  }
  if (rows.size() < lookback + horizon) {
    throw DataError("range of " + std::to_string(rows.size()) + " rows is shorter than lookback + horizon = " +
                    std::to_string(lookback + horizon));
  }
  count_ = rows.size() - lookback - horizon + 1;
}

void WindowedDataset::fill(std::size_t index, std::size_t offset, std::size_t steps, double* out) const {
  if (index >= count_) {
    throw std::out_of_range("window " + std::to_string(index) + " of " + std::to_string(count_));
  }
  const std::size_t v_count = series_->num_variates();
  const std::size_t first = rows_.begin + index + offset;
  for (std::size_t v = 0; v < v_count; ++v) {
    for (std::size_t t = 0; t < steps; ++t) out[v * steps + t] = series_->at(first + t, v);
  }
}

std::vector<double> WindowedDataset::input(std::size_t index) const {
  std::vector<double> out(num_variates() * lookback_);
  fill(index, 0, lookback_, out.data());
  return out;
}

std::vector<double> WindowedDataset::target(std::size_t index) const {
  std::vector<double> out(num_variates() * horizon_);
  fill(index, lookback_, horizon_, out.data());
  return out;
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> WindowedDataset::batch(std::span<const std::size_t> indices) const {
  if (indices.empty()) throw std::invalid_argument("batch: no window indices");
  const std::size_t v_count = num_variates();
  const std::size_t b = indices.size();
  std::vector<T> x(b * v_count * lookback_);
  std::vector<T> y(b * v_count * horizon_);
  std::vector<double> scratch(v_count * std::max(lookback_, horizon_));
  for (std::size_t k = 0; k < b; ++k) {
    fill(indices[k], 0, lookback_, scratch.data());
    for (std::size_t j = 0; j < v_count * lookback_; ++j) x[k * v_count * lookback_ + j] = static_cast<T>(scratch[j]);
    fill(indices[k], lookback_, horizon_, scratch.data());
    for (std::size_t j = 0; j < v_count * horizon_; ++j) y[k * v_count * horizon_ + j] = static_cast<T>(scratch[j]);
  }
  return {Tensor<T>(Shape{b, v_count, lookback_}, std::move(x)), Tensor<T>(Shape{b, v_count, horizon_}, std::move(y))};
}

template std::pair<Tensor<float>, Tensor<float>> WindowedDataset::batch(std::span<const std::size_t>) const;
template std::pair<Tensor<double>, Tensor<double>> WindowedDataset::batch(std::span<const std::size_t>) const;

WindowedDataset window_iter(std::shared_ptr<const RawSeries> series, IndexRange rows, std::size_t lookback,
                            std::size_t horizon) {
  return WindowedDataset(std::move(series), rows, lookback, horizon);
}

}  // namespace xlstm_mixer
