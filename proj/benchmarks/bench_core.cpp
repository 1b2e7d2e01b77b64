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

// Microbenchmarks for the hot paths: dense matmul, the recurrent scan and a
// full mixer forward/backward at the default forecasting shape.

#include <benchmark/benchmark.h>

#include <random>

#include "xlstm_mixer/mixer.hpp"
#include "xlstm_mixer/slstm.hpp"
#include "xlstm_mixer/tensor.hpp"
#include "xlstm_mixer/training.hpp"

namespace xm = xlstm_mixer;

namespace {

void BM_Matmul(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  std::mt19937_64 rng(1);
  const auto a = xm::Tensor<float>::uniform({n, n}, 1.0f, rng);
  const auto b = xm::Tensor<float>::uniform({n, n}, 1.0f, rng);
  for (auto _ : state) benchmark::DoNotOptimize(xm::matmul(a, b));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(2 * n * n * n));
}
BENCHMARK(BM_Matmul)->Arg(32)->Arg(64)->Arg(128)->Arg(256);

void BM_SLstmSequence(benchmark::State& state) {
  const auto steps = static_cast<std::size_t>(state.range(0));
  const std::size_t d = 64;
  std::mt19937_64 rng(2);
  const auto p = xm::SLstmParams<float>::initialized(d, d, 4, rng);
  const auto tokens = xm::Tensor<float>::uniform({steps, d}, 1.0f, rng);
  for (auto _ : state) benchmark::DoNotOptimize(xm::sequence_forward(p, tokens));
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(steps));
}
BENCHMARK(BM_SLstmSequence)->Arg(8)->Arg(32)->Arg(128);

xm::MixerConfig bench_config() {
  xm::MixerConfig cfg;  // T=96, H=96, V=7, D=64, one block
  return cfg;
}

void BM_MixerForward(benchmark::State& state) {
  const auto cfg = bench_config();
  const auto batch = static_cast<std::size_t>(state.range(0));
  const auto p = xm::MixerParams<float>::initialized(cfg, 3);
  std::mt19937_64 rng(3);
  const auto x = xm::Tensor<float>::uniform({batch, cfg.num_variates, cfg.lookback}, 2.0f, rng);
  for (auto _ : state) benchmark::DoNotOptimize(xm::mixer_forward(p, cfg, x, false, rng).y);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_MixerForward)->Arg(1)->Arg(32);

void BM_MixerForwardBackward(benchmark::State& state) {
  const auto cfg = bench_config();
  const auto batch = static_cast<std::size_t>(state.range(0));
  auto p = xm::MixerParams<float>::initialized(cfg, 4);
  for (const auto& np : p.parameters()) {
    xm::Tensor<float> h = np.tensor;
    h.set_requires_grad(true);
  }
  std::mt19937_64 rng(4);
  const auto x = xm::Tensor<float>::uniform({batch, cfg.num_variates, cfg.lookback}, 2.0f, rng);
  const auto y = xm::Tensor<float>::uniform({batch, cfg.num_variates, cfg.horizon}, 2.0f, rng);
  for (auto _ : state) {
    xm::Tape<float> tape;
    const auto out = xm::mixer_forward(p, cfg, x, true, rng).y;
    tape.backward(xm::mean_all(xm::abs(xm::sub(out, y))));
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch));
}
BENCHMARK(BM_MixerForwardBackward)->Arg(32)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
