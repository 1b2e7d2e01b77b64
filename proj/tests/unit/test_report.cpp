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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "oracles.hpp"
#include "xlstm_mixer/errors.hpp"
#include "xlstm_mixer/report.hpp"

namespace xm = xlstm_mixer;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

xm::MetricsReport row(std::string dataset, std::size_t horizon, std::optional<std::int64_t> seed, double mse,
                      double mae, std::string config_id = "full") {
  xm::MetricsReport r;
  r.dataset = std::move(dataset);
  r.horizon = horizon;
  r.lookback = 96;
  r.seed = seed;
  r.mse = mse;
  r.mae = mae;
  r.rmse = std::sqrt(mse);
  r.mape = 10 * mae;
  r.epochs_trained = 12;
  r.wall_time_s = 3.5;
  r.config_id = std::move(config_id);
  return r;
}

class ReportFiles : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("xlstm_mixer_report_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

}  // namespace

TEST(Metrics, Examples) {
  const std::vector<double> y{100.0}, yhat{90.0};
  const auto m = xm::compute_metrics(yhat, y);
  EXPECT_DOUBLE_EQ(m.mae, 10.0);
  EXPECT_DOUBLE_EQ(m.mse, 100.0);
  EXPECT_DOUBLE_EQ(m.rmse, 10.0);
  EXPECT_NEAR(m.mape, 10.0, 1e-6);

  const std::vector<double> same{1.0, -2.0, 3.0};
  const auto zero = xm::compute_metrics(same, same);
  EXPECT_EQ(zero.mse, 0.0);
  EXPECT_EQ(zero.mae, 0.0);
  EXPECT_EQ(zero.mape, 0.0);
}

TEST(Metrics, MatchTripleLoopOracle) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t b = 1 + trial % 4, v = 1 + trial % 3, h = 2 + trial % 5;
    std::vector<double> pred(b * v * h), target(b * v * h);
    for (auto& x : pred) x = n(rng);
    for (auto& x : target) x = n(rng);
    const auto got = xm::compute_metrics(pred, target);
    const auto want = xlstm_mixer::testing::reference_metrics(pred, target, b, v, h);
    EXPECT_NEAR(got.mse, want.mse, 1e-12 * std::max(1.0, want.mse));
    EXPECT_NEAR(got.mae, want.mae, 1e-12 * std::max(1.0, want.mae));
    EXPECT_NEAR(got.rmse, want.rmse, 1e-12 * std::max(1.0, want.rmse));
    EXPECT_NEAR(got.mape, want.mape, 1e-9 * std::max(1.0, want.mape));
    EXPECT_NEAR(got.rmse * got.rmse, got.mse, 1e-12 * std::max(1.0, got.mse));
  }
}

TEST(Metrics, SymmetricExceptMape) {
  const std::vector<double> a{1.0, 2.0, 5.0}, b{2.0, 4.0, 1.0};
  const auto ab = xm::compute_metrics(a, b);
  const auto ba = xm::compute_metrics(b, a);
  EXPECT_DOUBLE_EQ(ab.mse, ba.mse);
  EXPECT_DOUBLE_EQ(ab.mae, ba.mae);
  EXPECT_NE(ab.mape, ba.mape);
}

TEST(Metrics, ZeroTargetsStayFinite) {
  const std::vector<double> pred{0.5, 0.0}, target{0.0, 0.0};
  const auto m = xm::compute_metrics(pred, target);
  EXPECT_TRUE(std::isfinite(m.mape));
  EXPECT_NEAR(m.mape, 100.0 * (0.5 / 1e-8) / 2.0, 1e-3);
}

TEST(Metrics, Errors) {
  const std::vector<double> a{1.0}, b{1.0, 2.0}, none;
  EXPECT_THROW(xm::compute_metrics(a, b), xm::ShapeError);
  EXPECT_THROW(xm::compute_metrics(none, none), xm::ShapeError);
}

TEST(MeanOverSeeds, GroupsByDatasetHorizonAndConfig) {
  const std::vector<xm::MetricsReport> reports{row("a", 96, 2021, 0.4, 0.40), row("a", 96, 2022, 0.6, 0.50),
                                               row("a", 192, 2021, 1.0, 0.7), row("a", 96, 2021, 9.0, 9.0, "6"),
                                               row("a", 96, 2022, 1.0, 1.0, "6")};
  const auto means = xm::mean_over_seeds(reports);
  ASSERT_EQ(means.size(), 2u);
  EXPECT_FALSE(means[0].seed.has_value());
  EXPECT_EQ(means[0].horizon, 96u);
  EXPECT_EQ(means[0].config_id, "full");
  EXPECT_DOUBLE_EQ(means[0].mse, 0.5);
  EXPECT_DOUBLE_EQ(means[0].mae, 0.45);
  EXPECT_DOUBLE_EQ(means[0].rmse, std::sqrt(0.5));
  EXPECT_EQ(means[1].config_id, "6");
  EXPECT_DOUBLE_EQ(means[1].mse, 5.0);
}

TEST_F(ReportFiles, RoundTripAndFixedKeyOrder) {
  std::vector<xm::MetricsReport> reports{row("ETTh1", 96, 2021, 0.38, 0.41), row("ETTh1", 96, 2022, 0.40, 0.42)};
  const auto means = xm::mean_over_seeds(reports);
  reports.insert(reports.end(), means.begin(), means.end());
  const fs::path path = dir_ / "report.jsonl";
  xm::emit_report(reports, path);
  EXPECT_EQ(xm::parse_report(path), reports);
  const auto text = slurp(path);
  EXPECT_EQ(text.rfind("{\"dataset\":\"ETTh1\",\"config_id\":\"full\",\"lookback\":96,\"horizon\":96,\"seed\":2021,", 0),
            0u)
      << text;
  EXPECT_NE(text.find("\"seed\":null"), std::string::npos);
  const auto table = slurp(xm::table_path(path));
  EXPECT_NE(table.find("mean"), std::string::npos);
  EXPECT_NE(table.find("0.3800"), std::string::npos);
}

TEST_F(ReportFiles, EmissionIsByteIdenticalWithoutTiming) {
  auto a = row("x", 24, 7, 0.1, 0.2);
  auto b = a;
  b.wall_time_s = 99.0;
  xm::emit_report({a}, dir_ / "a.jsonl", {}, {}, xm::EmitOptions{false});
  xm::emit_report({b}, dir_ / "b.jsonl", {}, {}, xm::EmitOptions{false});
  EXPECT_EQ(slurp(dir_ / "a.jsonl"), slurp(dir_ / "b.jsonl"));
  EXPECT_EQ(slurp(dir_ / "a.table.txt"), slurp(dir_ / "b.table.txt"));
  EXPECT_EQ(slurp(dir_ / "a.jsonl").find("wall_time_s"), std::string::npos);
}

TEST_F(ReportFiles, PlotFilesOnlyWhenRequested) {
  const fs::path path = dir_ / "r.jsonl";
  xm::emit_report({row("x", 2, 1, 0.1, 0.2)}, path);
  EXPECT_FALSE(fs::exists(xm::forecast_path(path)));
  EXPECT_FALSE(fs::exists(xm::token_path(path)));
  const std::vector<xm::ForecastSample> samples{{"w0", 1, {1.0, 2.0}, {3.0, 4.0}, {2.5, 4.5}}};
  const std::vector<xm::NamedSeries> series{{"eta", {0.1, 0.2, 0.3}}};
  xm::emit_report({row("x", 2, 1, 0.1, 0.2)}, path, samples, series);
  EXPECT_EQ(slurp(xm::forecast_path(path)),
            "sample,variate,step,x,y,y_hat\nw0,1,-2,1,,\nw0,1,-1,2,,\nw0,1,0,,3,2.5\nw0,1,1,,4,4.5\n");
  EXPECT_EQ(slurp(xm::token_path(path)), "step,eta\n0,0.10000000000000001\n1,0.20000000000000001\n2,0.29999999999999999\n");
}

TEST_F(ReportFiles, Errors) {
  EXPECT_THROW(xm::emit_report({}, dir_ / "r.jsonl"), std::invalid_argument);
  fs::create_directories(dir_);
  std::ofstream(dir_ / "blocker") << "file";
  EXPECT_THROW(xm::emit_report({row("x", 2, 1, 0.1, 0.2)}, dir_ / "blocker" / "r.jsonl"), xm::DataError);
  std::ofstream(dir_ / "bad.jsonl") << "{\"dataset\":1}\n";
  EXPECT_THROW(xm::parse_report(dir_ / "bad.jsonl"), xm::DataError);
  EXPECT_THROW(xm::parse_report(dir_ / "missing.jsonl"), xm::DataError);
}
