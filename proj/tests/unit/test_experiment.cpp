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

#include "xlstm_mixer/checkpoint.hpp"
#include "xlstm_mixer/errors.hpp"
#include "xlstm_mixer/experiment.hpp"

namespace xm = xlstm_mixer;
namespace fs = std::filesystem;

namespace {

class ExperimentTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("xlstm_mixer_exp_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    csv_ = dir_ / "wave.csv";
    std::ofstream out(csv_);
    out << "date,a,b\n";
    for (int r = 0; r < 160; ++r) {
      out << r << ',' << std::sin(r * 0.5) << ',' << std::cos(r * 0.3) + 0.01 * (r % 5) << '\n';
    }
  }
  void TearDown() override { fs::remove_all(dir_); }

  xm::ExperimentSpec spec() const {
    xm::ExperimentSpec s;
    s.data = csv_;
    s.kind = xm::DatasetKind::kGeneric;
    s.model.lookback = 12;
    s.model.embed_dim = 4;
    s.model.block = xm::BlockConfig{0, 0.0, 2, 4};
    s.train.batch_size = 16;
    s.train.max_epochs = 2;
    s.train.warmup_steps = 0;
    s.out_dir = dir_ / "out";
    return s;
  }

  fs::path dir_;
  fs::path csv_;
};

}  // namespace

TEST_F(ExperimentTest, PreparedDataIsStandardizedOnTrainRows) {
  const auto data = xm::prepare_dataset(csv_, xm::DatasetKind::kGeneric);
  EXPECT_EQ(data.name, "wave");
  EXPECT_EQ(data.split.train.end, 112u);
  double mean = 0;
  for (std::size_t r = 0; r < 112; ++r) mean += data.series->at(r, 0);
  EXPECT_NEAR(mean / 112, 0.0, 1e-12);
  const auto test = xm::split_windows(data, xm::SplitName::kTest, 12, 4);
  EXPECT_EQ(test.size(), 32u - 4u + 1u);
}

TEST_F(ExperimentTest, SingleRunProducesOneReport) {
  auto s = spec();
  s.horizons = {4};
  s.seeds = {2021};
  const auto result = xm::run_experiment(s);
  ASSERT_TRUE(result.failures.empty()) << result.failures.front().message;
  ASSERT_EQ(result.reports.size(), 1u);
  const auto& r = result.reports.front();
  EXPECT_EQ(r.dataset, "wave");
  EXPECT_EQ(r.horizon, 4u);
  EXPECT_EQ(r.seed, 2021);
  EXPECT_NEAR(r.rmse * r.rmse, r.mse, 1e-12);
  EXPECT_EQ(xm::parse_report(s.out_dir / "report.jsonl"), result.reports);
  const fs::path run_dir = s.out_dir / "H4_seed2021";
  EXPECT_TRUE(fs::exists(run_dir / "loss_log.jsonl"));
  const auto ckpt = xm::load_checkpoint<float>(run_dir / "checkpoint");
  EXPECT_EQ(ckpt.config.num_variates, 2u);
  EXPECT_EQ(ckpt.metadata.at("dataset"), "wave");
  EXPECT_EQ(ckpt.metadata.at("epochs_trained"), r.epochs_trained);
}

TEST_F(ExperimentTest, GridAddsMeanRows) {
  auto s = spec();
  s.horizons = {2, 4};
  s.seeds = {1, 2};
  s.config_id = "6";
  s.model = xm::build_ablation_config(6, s.model);
  const auto result = xm::run_experiment(s);
  ASSERT_TRUE(result.failures.empty());
  ASSERT_EQ(result.reports.size(), 6u);
  EXPECT_EQ(result.reports[0].horizon, 2u);
  EXPECT_EQ(result.reports[1].seed, 2);
  EXPECT_FALSE(result.reports[4].seed.has_value());
  EXPECT_EQ(result.reports[5].horizon, 4u);
  EXPECT_DOUBLE_EQ(result.reports[4].mse, (result.reports[0].mse + result.reports[1].mse) / 2);
  for (const auto& r : result.reports) EXPECT_EQ(r.config_id, "6");
}

TEST_F(ExperimentTest, FailingRunsAreRecordedAndOthersContinue) {
  auto s = spec();
  s.horizons = {4, 500};
  s.seeds = {1};
  const auto result = xm::run_experiment(s);
  ASSERT_EQ(result.failures.size(), 1u);
  EXPECT_EQ(result.failures[0].horizon, 500u);
  EXPECT_EQ(result.reports.size(), 1u);
}

TEST_F(ExperimentTest, EmptyGridIsAConfigError) {
  auto s = spec();
  s.seeds = {1};
  EXPECT_THROW(xm::run_experiment(s), xm::ConfigError);
}
