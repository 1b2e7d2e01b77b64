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

// Finite-difference check of the whole model's parameter gradients under the
// MAE loss. Runs in long double: at a 1e-5 step the rounding noise of a
// double-precision loss already swamps the smallest parameter gradients.

#pragma once

#include <cstddef>
#include <cstdint>

#include "xlstm_mixer/gradcheck.hpp"
#include "xlstm_mixer/mixer.hpp"

namespace xlstm_mixer {

struct ModelCheckSettings {
  MixerConfig config;
  std::size_t batch = 2;
  std::uint64_t seed = 7;
  double step = 1e-5;
};

/// V=3, T=8, H=4, D=8, two heads, one block, no convolution, no dropout.
ModelCheckSettings tiny_model_check();

/// Initializes the model from `seed`, jitters every bias and the RevIN affine
/// so no gradient is trivially zero, draws random inputs and targets, and
/// checks every parameter scalar.
GradCheckResult model_gradient_check(const ModelCheckSettings& settings);

}  // namespace xlstm_mixer
