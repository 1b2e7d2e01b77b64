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

// xlstm-mixer: train, evaluate and inspect forecasting models from the shell.
//
// Every subcommand accepts `--config <file>` with `name = value` lines named
// after the long flags (without dashes). Flags given on the command line win.

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xlstm_mixer/checkpoint.hpp"
#include "xlstm_mixer/errors.hpp"
#include "xlstm_mixer/experiment.hpp"
#include "xlstm_mixer/model_check.hpp"

namespace xm = xlstm_mixer;
namespace fs = std::filesystem;

namespace {

struct TrainArgs {
  fs::path data;
  std::string dataset = "generic";
  std::size_t lookback = 96;
  std::size_t horizon = 96;
  std::size_t embed_dim = 64;
  std::size_t blocks = 1;
  std::size_t heads = 4;
  std::size_t conv_width = 0;
  double dropout = 0.1;
  std::size_t batch = 32;
  double lr = 1e-3;
  std::size_t warmup = 5;
  std::size_t epochs = 60;
  std::size_t patience = 10;
  std::uint64_t seed = 2021;
  fs::path out;
  bool omit_timing = false;
  int ablation_id = 1;
};

void add_train_flags(CLI::App* cmd, TrainArgs& a) {
  cmd->add_option("--data", a.data, "CSV file: timestamp column then one column per variate")->required();
  cmd->add_option("--dataset", a.dataset, "Split convention")->check(CLI::IsMember({"etth", "ettm", "generic"}));
  cmd->add_option("--lookback", a.lookback, "Input window length T");
  cmd->add_option("--horizon", a.horizon, "Forecast length H");
  cmd->add_option("--embed-dim", a.embed_dim, "Token embedding width D");
  cmd->add_option("--blocks", a.blocks, "Number of sLSTM blocks");
  cmd->add_option("--heads", a.heads, "Heads of the block-diagonal recurrence");
  cmd->add_option("--conv-width", a.conv_width, "Causal convolution width")->check(CLI::IsMember({0, 2, 4}));
  cmd->add_option("--dropout", a.dropout, "Dropout after the block projection");
  cmd->add_option("--batch", a.batch, "Mini-batch size");
  cmd->add_option("--lr", a.lr, "Peak learning rate");
  cmd->add_option("--warmup", a.warmup, "Warmup length in optimizer steps");
  cmd->add_option("--epochs", a.epochs, "Maximum number of epochs");
  cmd->add_option("--patience", a.patience, "Epochs without validation improvement before stopping");
  cmd->add_option("--seed", a.seed, "Seed for initialization, shuffling and dropout");
  cmd->add_option("--out", a.out, "Output directory")->required();
  cmd->add_flag("--omit-timing", a.omit_timing, "Leave wall-clock time out of the report");
}

xm::MixerConfig model_from(const TrainArgs& a) {
  xm::MixerConfig cfg;
  cfg.lookback = a.lookback;
  cfg.horizon = a.horizon;
  cfg.embed_dim = a.embed_dim;
  cfg.num_blocks = a.blocks;
  cfg.block = xm::BlockConfig{a.conv_width, a.dropout, a.heads, a.embed_dim};
  return cfg;
}

xm::TrainConfig train_from(const TrainArgs& a) {
  xm::TrainConfig cfg;
  cfg.batch_size = a.batch;
  cfg.lr_initial = a.lr;
  cfg.warmup_steps = a.warmup;
  cfg.max_epochs = a.epochs;
  cfg.patience = a.patience;
  cfg.seed = a.seed;
  return cfg;
}

void print_report(const xm::MetricsReport& r) {
  std::printf("%s H=%zu config=%s: mse %.4f  mae %.4f  rmse %.4f  mape %.2f%%  (%zu epochs)\n", r.dataset.c_str(),
              r.horizon, r.config_id.c_str(), r.mse, r.mae, r.rmse, r.mape, r.epochs_trained);
}

int run_train(const TrainArgs& a, const std::string& config_id) {
  xm::MixerConfig model = model_from(a);
  if (config_id != "full") model = xm::build_ablation_config(a.ablation_id, model);
  const auto data = xm::prepare_dataset(a.data, xm::parse_dataset_kind(a.dataset));
  xm::MixerConfig effective = model;
  effective.num_variates = data.series->num_variates();
  std::printf("training %s on %s: %zu variates, %zu parameters\n", config_id.c_str(), data.name.c_str(),
              effective.num_variates, xm::expected_parameter_count(effective));
  const auto outcome = xm::train_and_evaluate(data, model, train_from(a), a.out, config_id);
  for (const auto& e : outcome.artifacts.log) {
    std::printf("epoch %3zu  train_mae %.5f  val_mae %.5f  lr %.3g\n", e.epoch, e.train_mae, e.val_mae, e.lr);
  }
  xm::EmitOptions emit;
  emit.include_timing = !a.omit_timing;
  xm::emit_report({outcome.report}, a.out / "report.jsonl", {}, {}, emit);
  print_report(outcome.report);
  return 0;
}

template <typename N>
std::vector<N> parse_list(const std::string& text, const std::string& flag) {
  std::vector<N> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = std::min(text.find(',', start), text.size());
    const std::string item = text.substr(start, comma - start);
    N value{};
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), value);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size()) {
      throw xm::ConfigError(flag + ": cannot parse '" + item + "'");
    }
    out.push_back(value);
    start = comma + 1;
  }
  return out;
}

int run_experiment_command(const TrainArgs& a, const std::vector<std::size_t>& horizons,
                           const std::vector<std::uint64_t>& seeds) {
  xm::ExperimentSpec spec;
  spec.data = a.data;
  spec.kind = xm::parse_dataset_kind(a.dataset);
  spec.horizons = horizons;
  spec.seeds = seeds;
  spec.model = model_from(a);
  spec.config_id = "full";
  if (a.ablation_id != 1) {
    spec.model = xm::build_ablation_config(a.ablation_id, spec.model);
    spec.config_id = std::to_string(a.ablation_id);
  }
  spec.train = train_from(a);
  spec.out_dir = a.out;
  spec.emit.include_timing = !a.omit_timing;
  const auto result = xm::run_experiment(spec);
  for (const auto& r : result.reports) print_report(r);
  for (const auto& f : result.failures) {
    std::fprintf(stderr, "run H=%zu seed=%llu failed: %s\n", f.horizon, static_cast<unsigned long long>(f.seed),
                 f.message.c_str());
  }
  return result.failures.empty() ? 0 : 1;
}

struct CheckpointArgs {
  fs::path checkpoint;
  fs::path data;
  std::string dataset;
  std::string split = "test";
  fs::path report;
  fs::path emit;
  std::size_t window_index = 0;
  std::size_t batch = 64;
};

xm::DatasetKind kind_for(const CheckpointArgs& a, const nlohmann::ordered_json& metadata) {
  if (!a.dataset.empty()) return xm::parse_dataset_kind(a.dataset);
  return xm::parse_dataset_kind(metadata.value("dataset_kind", std::string("generic")));
}

int run_eval(const CheckpointArgs& a) {
  const auto ckpt = xm::load_checkpoint<float>(a.checkpoint);
  const auto data = xm::prepare_dataset(a.data, kind_for(a, ckpt.metadata));
  if (data.series->num_variates() != ckpt.config.num_variates) {
    throw xm::DataError("checkpoint expects " + std::to_string(ckpt.config.num_variates) + " variates, data has " +
                        std::to_string(data.series->num_variates()));
  }
  const auto split = xm::parse_split_name(a.split);
  const auto windows = xm::split_windows(data, split, ckpt.config.lookback, ckpt.config.horizon);
  const auto pred = xm::predict_all(ckpt.params, ckpt.config, windows, a.batch);
  std::vector<double> target;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    const auto y = windows.target(w);
    target.insert(target.end(), y.begin(), y.end());
  }
  auto report = xm::make_report(xm::compute_metrics(pred, target));
  report.dataset = data.name;
  report.horizon = ckpt.config.horizon;
  report.lookback = ckpt.config.lookback;
  if (ckpt.metadata.contains("seed")) report.seed = ckpt.metadata["seed"].get<std::int64_t>();
  report.epochs_trained = ckpt.metadata.value("epochs_trained", std::size_t{0});
  report.config_id = ckpt.metadata.value("config_id", std::string("full"));
  xm::EmitOptions emit;
  emit.include_timing = false;
  xm::emit_report({report}, a.report, {}, {}, emit);
  std::printf("%s split, %zu windows\n", a.split.c_str(), windows.size());
  print_report(report);
  return 0;
}

int run_forecast(const CheckpointArgs& a) {
  const auto ckpt = xm::load_checkpoint<float>(a.checkpoint);
  const auto data = xm::prepare_dataset(a.data, kind_for(a, ckpt.metadata));
  const auto windows =
      xm::split_windows(data, xm::parse_split_name(a.split), ckpt.config.lookback, ckpt.config.horizon);
  if (a.window_index >= windows.size()) {
    throw xm::DataError("window index " + std::to_string(a.window_index) + " out of range: the " + a.split +
                        " split has " + std::to_string(windows.size()) + " windows");
  }
  const std::size_t idx[] = {a.window_index};
  const auto [x, y] = windows.batch<float>(idx);
  std::mt19937_64 unused(0);
  const auto pred = xm::mixer_forward(ckpt.params, ckpt.config, x, false, unused).y;
  const std::size_t t_len = ckpt.config.lookback;
  const std::size_t h_len = ckpt.config.horizon;
  std::vector<xm::ForecastSample> samples;
  for (std::size_t v = 0; v < ckpt.config.num_variates; ++v) {
    xm::ForecastSample s;
    s.label = data.series->names[v];
    s.variate = v;
    for (std::size_t t = 0; t < t_len; ++t) s.history.push_back(x.data()[v * t_len + t]);
    for (std::size_t t = 0; t < h_len; ++t) {
      s.target.push_back(y.data()[v * h_len + t]);
      s.forecast.push_back(pred.data()[v * h_len + t]);
    }
    samples.push_back(std::move(s));
  }
  xm::write_forecast_csv(a.emit, samples);
  std::printf("wrote %s (window %zu of the %s split)\n", a.emit.string().c_str(), a.window_index, a.split.c_str());
  return 0;
}

int run_decode_token(const CheckpointArgs& a) {
  const auto ckpt = xm::load_checkpoint<float>(a.checkpoint);
  const auto token = xm::decode_init_token(ckpt.params, ckpt.config);
  const auto values = token.data();
  xm::write_series_csv(a.emit, {{"init_token", std::vector<double>(values.begin(), values.end())}});
  std::printf("wrote %s (%zu steps)\n", a.emit.string().c_str(), values.size());
  return 0;
}

int run_gradcheck() {
  const auto settings = xm::tiny_model_check();
  const auto result = xm::model_gradient_check(settings);
  const double share = result.fraction_below(1e-6);
  const bool ok = share >= 0.99 && result.max_error < 1e-4;
  std::printf("%zu parameter scalars, %.2f%% below 1e-6 relative error, worst %.3g", result.entries.size(),
              100.0 * share, result.max_error);
  if (const auto* w = result.worst()) std::printf(" (%s[%zu])", w->leaf.c_str(), w->index);
  std::printf("\n%s\n", ok ? "gradient check passed" : "gradient check FAILED");
  return ok ? 0 : 1;
}

// Expands `--config <file>` into `--name=value` arguments placed ahead of the
// command-line flags, so explicit flags take precedence under TakeLast.
std::vector<std::string> expand_config(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::vector<std::string> out;
  std::vector<std::string> from_file;
  std::size_t insert_at = std::string::npos;
  for (std::size_t k = 0; k < args.size(); ++k) {
    std::string file;
    if (args[k] == "--config" && k + 1 < args.size()) {
      file = args[++k];
    } else if (args[k].rfind("--config=", 0) == 0) {
      file = args[k].substr(9);
    } else {
      out.push_back(args[k]);
      if (insert_at == std::string::npos && k >= 1 && args[k].rfind("-", 0) != 0) insert_at = out.size();
      continue;
    }
    std::ifstream in(file);
    if (!in) throw xm::ConfigError("cannot open config file " + file);
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      const auto first = line.find_first_not_of(" \t\r");
      if (first == std::string::npos) continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw xm::ConfigError(file + ":" + std::to_string(line_no) + ": expected name = value");
      }
      auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
      };
      const std::string name = trim(line.substr(0, eq));
      std::string key = name.rfind("--", 0) == 0 ? name : "--" + name;
      from_file.push_back(key + "=" + trim(line.substr(eq + 1)));
    }
  }
  if (insert_at == std::string::npos) insert_at = out.size();
  out.insert(out.begin() + static_cast<std::ptrdiff_t>(insert_at), from_file.begin(), from_file.end());
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"xlstm-mixer: multivariate time series forecasting with an sLSTM mixer"};
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  TrainArgs train_args;
  auto* train = app.add_subcommand("train", "Train the full model, then score the test split");
  add_train_flags(train, train_args);

  TrainArgs ablation_args;
  auto* ablation = app.add_subcommand("ablation", "Train one of the ten ablation configurations");
  add_train_flags(ablation, ablation_args);
  ablation->add_option("--id", ablation_args.ablation_id, "Configuration id; 1 is the full model")
      ->required()
      ->check(CLI::Range(1, 10));

  TrainArgs experiment_args;
  std::string horizons;  // empty: --horizon if given, else 96,192,336,720
  std::string seeds = "2021,2022,2023";
  auto* experiment = app.add_subcommand("experiment", "Train every horizon x seed pair and report means over seeds");
  add_train_flags(experiment, experiment_args);
  experiment->add_option("--horizons", horizons, "Comma-separated forecast lengths");
  experiment->add_option("--seeds", seeds, "Comma-separated seeds");
  experiment->add_option("--ablation-id", experiment_args.ablation_id, "Ablation configuration")
      ->check(CLI::Range(1, 10));

  CheckpointArgs eval_args;
  auto* eval = app.add_subcommand("eval", "Score a checkpoint on one split");
  eval->add_option("--checkpoint", eval_args.checkpoint, "Checkpoint directory written by train")->required();
  eval->add_option("--data", eval_args.data, "CSV file the model was trained on")->required();
  eval->add_option("--dataset", eval_args.dataset, "Defaults to the kind recorded in the checkpoint")
      ->check(CLI::IsMember({"etth", "ettm", "generic"}));
  eval->add_option("--split", eval_args.split, "Split to score")->check(CLI::IsMember({"train", "val", "test"}));
  eval->add_option("--report", eval_args.report, "Report file to write")->required();
  eval->add_option("--batch", eval_args.batch, "Evaluation batch size");

  CheckpointArgs forecast_args;
  auto* forecast = app.add_subcommand("forecast", "Write one window's history, truth and forecast as CSV");
  forecast->add_option("--checkpoint", forecast_args.checkpoint, "Checkpoint directory written by train")->required();
  forecast->add_option("--data", forecast_args.data, "CSV file the model was trained on")->required();
  forecast->add_option("--window-index", forecast_args.window_index, "Window within the split")->required();
  forecast->add_option("--emit", forecast_args.emit, "Output CSV")->required();
  forecast->add_option("--dataset", forecast_args.dataset, "Defaults to the kind recorded in the checkpoint")->check(CLI::IsMember({"etth", "ettm", "generic"}));
  forecast->add_option("--split", forecast_args.split, "Split the window is taken from")->check(CLI::IsMember({"train", "val", "test"}));

  bool tiny = false;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every model gradient");
  gradcheck->add_flag("--tiny", tiny, "Use the small reference configuration")->required();

  CheckpointArgs token_args;
  auto* decode = app.add_subcommand("decode-token", "Decode the learned initial token to a series");
  decode->add_option("--checkpoint", token_args.checkpoint, "Checkpoint directory written by train")->required();
  decode->add_option("--emit", token_args.emit, "Output CSV")->required();

  try {
    auto args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());
    args.pop_back();  // program name
    app.parse(args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }

  try {
    if (*train) return run_train(train_args, "full");
    if (*ablation) return run_train(ablation_args, std::to_string(ablation_args.ablation_id));
    if (*experiment) {
      if (horizons.empty()) {
        horizons = experiment->count("--horizon") ? std::to_string(experiment_args.horizon) : "96,192,336,720";
      }
      return run_experiment_command(experiment_args, parse_list<std::size_t>(horizons, "--horizons"),
                                    parse_list<std::uint64_t>(seeds, "--seeds"));
    }
    if (*eval) return run_eval(eval_args);
    if (*forecast) return run_forecast(forecast_args);
    if (*decode) return run_decode_token(token_args);
    if (*gradcheck) return run_gradcheck();
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
