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

#include "xlstm_mixer/model_check.hpp"

#include <random>

namespace xlstm_mixer {

namespace {
using Real = long double;
}  // namespace

ModelCheckSettings tiny_model_check() {
  ModelCheckSettings s;
  s.config.num_variates = 3;
  s.config.lookback = 8;
  s.config.horizon = 4;
  s.config.embed_dim = 8;
  s.config.num_blocks = 1;
  s.config.block = BlockConfig{0, 0.0, 2, 8};
  return s;
}

GradCheckResult model_gradient_check(const ModelCheckSettings& settings) {
  const MixerConfig& cfg = settings.config;
  cfg.validate();
  MixerParams<Real> params = MixerParams<Real>::initialized(cfg, settings.seed);
  std::mt19937_64 rng(settings.seed + 1);
  std::uniform_real_distribution<Real> jitter(-0.2, 0.2);
  const auto named = params.parameters();
  for (const auto& p : named) {
    if (p.mask.defined() || p.tensor.rank() != 1) continue;
    Tensor<Real> handle = p.tensor;
    for (Real& v : handle.mutable_data()) v += jitter(rng);
  }

  const std::size_t b = settings.batch;
  const Tensor<Real> x = Tensor<Real>::uniform(Shape{b, cfg.num_variates, cfg.lookback}, Real(2), rng);
  const Tensor<Real> y = Tensor<Real>::uniform(Shape{b, cfg.num_variates, cfg.horizon}, Real(2), rng);

  std::vector<GradCheckLeaf<Real>> leaves;
  for (const auto& p : named) leaves.push_back({p.name, p.tensor});
  std::mt19937_64 unused(0);
  auto loss = [&]() { return mean_all(abs(sub(mixer_forward(params, cfg, x, false, unused).y, y))); };
  return finite_difference_check<Real>(loss, leaves, settings.step);
}

}  // namespace xlstm_mixer
