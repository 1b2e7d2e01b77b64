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

#include "xlstm_mixer/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include <nlohmann/json.hpp>

#include "xlstm_mixer/errors.hpp"

namespace xlstm_mixer {

namespace fs = std::filesystem;

Metrics compute_metrics(std::span<const double> pred, std::span<const double> target) {
  if (pred.size() != target.size()) {
    throw ShapeError("compute_metrics: " + std::to_string(pred.size()) + " predictions vs " +
                     std::to_string(target.size()) + " targets");
  }
  if (pred.empty()) throw ShapeError("compute_metrics: no entries");
  double se = 0.0;
  double ae = 0.0;
  double ape = 0.0;
  for (std::size_t k = 0; k < pred.size(); ++k) {
    const double err = target[k] - pred[k];
    se += err * err;
    ae += std::abs(err);
    ape += std::abs(err) / (std::abs(target[k]) + kMapeEpsilon);
  }
  const double n = static_cast<double>(pred.size());
  Metrics m;
  m.mse = se / n;
  m.mae = ae / n;
  m.rmse = std::sqrt(m.mse);
  m.mape = 100.0 * ape / n;
  return m;
}

MetricsReport make_report(const Metrics& m) {
  MetricsReport r;
  r.mse = m.mse;
  r.mae = m.mae;
  r.rmse = m.rmse;
  r.mape = m.mape;
  return r;
}

std::vector<MetricsReport> mean_over_seeds(const std::vector<MetricsReport>& reports) {
  using Key = std::tuple<std::string, std::size_t, std::string>;
  std::vector<Key> order;
  std::map<Key, std::vector<const MetricsReport*>> groups;
  for (const auto& r : reports) {
    if (!r.seed) continue;
    Key key{r.dataset, r.horizon, r.config_id};
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.push_back(&r);
  }
  std::vector<MetricsReport> out;
  for (const auto& key : order) {
    const auto& members = groups[key];
    if (members.size() < 2) continue;
    const double n = static_cast<double>(members.size());
    MetricsReport mean = *members.front();
    mean.seed.reset();
    mean.mse = mean.mae = mean.mape = mean.wall_time_s = 0.0;
    std::size_t epochs = 0;
    for (const auto* r : members) {
      mean.mse += r->mse;
      mean.mae += r->mae;
      mean.mape += r->mape;
      mean.wall_time_s += r->wall_time_s;
      epochs += r->epochs_trained;
    }
    mean.mse /= n;
    mean.mae /= n;
    mean.mape /= n;
    mean.wall_time_s /= n;
    mean.rmse = std::sqrt(mean.mse);
    mean.epochs_trained = static_cast<std::size_t>(std::llround(static_cast<double>(epochs) / n));
    out.push_back(mean);
  }
  return out;
}

fs::path table_path(const fs::path& report) { return fs::path(report).replace_extension(".table.txt"); }
fs::path forecast_path(const fs::path& report) { return fs::path(report).replace_extension(".forecast.csv"); }
fs::path token_path(const fs::path& report) { return fs::path(report).replace_extension(".token.csv"); }

namespace {

std::ofstream open_for_writing(const fs::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string fixed(double v, int digits) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

nlohmann::ordered_json to_json(const MetricsReport& r, bool include_timing) {
  nlohmann::ordered_json j;
  j["dataset"] = r.dataset;
  j["config_id"] = r.config_id;
  j["lookback"] = r.lookback;
  j["horizon"] = r.horizon;
  j["seed"] = r.seed ? nlohmann::ordered_json(*r.seed) : nlohmann::ordered_json(nullptr);
  j["mse"] = r.mse;
  j["mae"] = r.mae;
  j["rmse"] = r.rmse;
  j["mape"] = r.mape;
  j["epochs_trained"] = r.epochs_trained;
  if (include_timing) j["wall_time_s"] = r.wall_time_s;
  return j;
}

MetricsReport from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.dataset = j.at("dataset").get<std::string>();
  r.config_id = j.at("config_id").get<std::string>();
  r.lookback = j.at("lookback").get<std::size_t>();
  r.horizon = j.at("horizon").get<std::size_t>();
  if (!j.at("seed").is_null()) r.seed = j.at("seed").get<std::int64_t>();
  r.mse = j.at("mse").get<double>();
  r.mae = j.at("mae").get<double>();
  r.rmse = j.at("rmse").get<double>();
  r.mape = j.at("mape").get<double>();
  r.epochs_trained = j.at("epochs_trained").get<std::size_t>();
  r.wall_time_s = j.value("wall_time_s", 0.0);
  return r;
}

void write_table(const fs::path& path, const std::vector<MetricsReport>& reports, bool include_timing) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"dataset", "config", "T", "H", "seed", "MSE", "MAE", "RMSE", "MAPE%", "epochs"};
  if (include_timing) header.push_back("time_s");
  rows.push_back(header);
  for (const auto& r : reports) {
    std::vector<std::string> row{r.dataset,
                                 r.config_id,
                                 std::to_string(r.lookback),
                                 std::to_string(r.horizon),
                                 r.seed ? std::to_string(*r.seed) : std::string("mean"),
                                 fixed(r.mse, 4),
                                 fixed(r.mae, 4),
                                 fixed(r.rmse, 4),
                                 fixed(r.mape, 2),
                                 std::to_string(r.epochs_trained)};
    if (include_timing) row.push_back(fixed(r.wall_time_s, 1));
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  }
  auto out = open_for_writing(path);
  for (const auto& row : rows) {
    std::string line;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) line += "  ";
      const std::size_t pad = width[c] - row[c].size();
      // Text columns left-aligned, numbers right-aligned.
      if (c < 2) {
        line += row[c] + std::string(pad, ' ');
      } else {
        line += std::string(pad, ' ') + row[c];
      }
    }
    while (!line.empty() && line.back() == ' ') line.pop_back();
    out << line << '\n';
  }
}

}  // namespace

void write_forecast_csv(const fs::path& path, const std::vector<ForecastSample>& samples) {
  auto out = open_for_writing(path);
  out << "sample,variate,step,x,y,y_hat\n";
  for (const auto& s : samples) {
    if (s.target.size() != s.forecast.size()) throw ShapeError("forecast sample: target and forecast lengths differ");
    const long t_hist = static_cast<long>(s.history.size());
    for (std::size_t t = 0; t < s.history.size(); ++t) {
      out << s.label << ',' << s.variate << ',' << static_cast<long>(t) - t_hist << ',' << exact(s.history[t])
          << ",,\n";
    }
    for (std::size_t t = 0; t < s.target.size(); ++t) {
      out << s.label << ',' << s.variate << ',' << t << ",," << exact(s.target[t]) << ',' << exact(s.forecast[t])
          << '\n';
    }
  }
}

void write_series_csv(const fs::path& path, const std::vector<NamedSeries>& series) {
  auto out = open_for_writing(path);
  std::size_t length = 0;
  out << "step";
  for (const auto& s : series) {
    out << ',' << s.name;
    length = std::max(length, s.values.size());
  }
  out << '\n';
  for (std::size_t t = 0; t < length; ++t) {
    out << t;
    for (const auto& s : series) {
      out << ',';
      if (t < s.values.size()) out << exact(s.values[t]);
    }
    out << '\n';
  }
}

void emit_report(const std::vector<MetricsReport>& reports, const fs::path& path,
                 const std::vector<ForecastSample>& samples, const std::vector<NamedSeries>& series,
                 const EmitOptions& options) {
  if (reports.empty()) throw std::invalid_argument("emit_report: no reports");
  {
    auto out = open_for_writing(path);
    for (const auto& r : reports) out << to_json(r, options.include_timing).dump() << '\n';
    if (!out) throw DataError("failed writing " + path.string());
  }
  write_table(table_path(path), reports, options.include_timing);
  if (!samples.empty()) write_forecast_csv(forecast_path(path), samples);
  if (!series.empty()) write_series_csv(token_path(path), series);
}

std::vector<MetricsReport> parse_report(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open report " + path.string());
  std::vector<MetricsReport> reports;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      reports.push_back(from_json(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return reports;
}

}  // namespace xlstm_mixer
