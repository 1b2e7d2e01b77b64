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

// CSV ingestion, chronological splits, train-only standardization and lazy
// sliding windows over a multivariate series.

#pragma once

#include <cstddef>
#include <filesystem>
#include <istream>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "xlstm_mixer/tensor.hpp"

namespace xlstm_mixer {

struct RawSeries {
  std::vector<std::string> names;       // one per variate
  std::vector<std::string> timestamps;  // one per row
  std::vector<double> values;           // [length x num_variates], row-major

  std::size_t length() const { return timestamps.size(); }
  std::size_t num_variates() const { return names.size(); }
  double at(std::size_t row, std::size_t variate) const { return values[row * names.size() + variate]; }
};

/// Header row, then `timestamp,v1,v2,...` per line. Errors name the 1-based
/// line and column of the offending cell. ISO 8601 timestamps must increase.
RawSeries parse_csv(std::istream& in, const std::string& source = "<stream>");
RawSeries load_csv(const std::filesystem::path& path);

enum class DatasetKind { kEttHourly, kEttQuarterHourly, kGeneric };
std::string_view to_string(DatasetKind kind);
/// Accepts "etth", "ettm" and "generic".
DatasetKind parse_dataset_kind(std::string_view text);

/// Half-open row range [begin, end).
struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  std::size_t size() const { return end - begin; }
  bool operator==(const IndexRange&) const = default;
};

struct SplitSpec {
  IndexRange train;
  IndexRange val;
  IndexRange test;
};

enum class SplitName { kTrain, kVal, kTest };
std::string_view to_string(SplitName split);
SplitName parse_split_name(std::string_view text);

/// ETT hourly: 8640/2880/2880 rows (trailing rows unused); ETT 15-minute: four
/// times that. Generic: floor(0.7 L) train, floor(0.2 L) test, the rest val.
SplitSpec chronological_split(std::size_t total_rows, DatasetKind kind);

/// Rows a split's windows may read: val and test reach back `lookback` rows
/// into the preceding range for context.
IndexRange usable_range(const SplitSpec& split, SplitName which, std::size_t lookback);

struct StandardizationStats {
  std::vector<double> mean;
  std::vector<double> std;  // population, over train rows only
};

/// Standardizes every row with statistics of the train range. Throws
/// DataError naming the variate when its train variance is zero.
std::pair<RawSeries, StandardizationStats> standardize(const RawSeries& raw, const SplitSpec& split);

/// Every (X, Y) pair of a row range with stride 1: X = rows [s, s+T) and
/// Y = rows [s+T, s+T+H), both transposed to variate-major. Windows are
/// produced on demand from the shared series.
class WindowedDataset {
 public:
  WindowedDataset(std::shared_ptr<const RawSeries> series, IndexRange rows, std::size_t lookback,
                  std::size_t horizon);

  std::size_t size() const { return count_; }
  bool empty() const { return count_ == 0; }
  std::size_t lookback() const { return lookback_; }
  std::size_t horizon() const { return horizon_; }
  std::size_t num_variates() const { return series_->num_variates(); }
  const IndexRange& rows() const { return rows_; }

  /// Window `index` as [V x T] / [V x H], row-major.
  std::vector<double> input(std::size_t index) const;
  std::vector<double> target(std::size_t index) const;

  /// Stacks the selected windows into ([B x V x T], [B x V x H]).
  template <typename T>
  std::pair<Tensor<T>, Tensor<T>> batch(std::span<const std::size_t> indices) const;

 private:
  void fill(std::size_t index, std::size_t offset, std::size_t steps, double* out) const;

  std::shared_ptr<const RawSeries> series_;
  IndexRange rows_;
  std::size_t lookback_;
  std::size_t horizon_;
  std::size_t count_;
};

/// Windows over `rows` of `series`; throws DataError when the range is
/// shorter than lookback + horizon.
WindowedDataset window_iter(std::shared_ptr<const RawSeries> series, IndexRange rows, std::size_t lookback,
                            std::size_t horizon);

}  // namespace xlstm_mixer
