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

#pragma once

#include <functional>
#include <string>
#include <vector>

#include "xlstm_mixer/tensor.hpp"

namespace xlstm_mixer {

template <typename T>
struct GradCheckLeaf {
  std::string name;
  Tensor<T> tensor;
};

struct GradCheckEntry {
  std::string leaf;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double error = 0.0;  // relative, or absolute when |analytic| < 1e-8
};

struct GradCheckResult {
  std::vector<GradCheckEntry> entries;
  double max_error = 0.0;

  /// Share of checked scalars whose error is strictly below `threshold`.
  double fraction_below(double threshold) const;
  const GradCheckEntry* worst() const;
};

/// Compares reverse-mode gradients of the scalar `loss` against central
/// differences (f(x+h) - f(x-h)) / 2h for every scalar of every leaf.
///
/// `loss` must rebuild its graph from the leaves on every call. Leaves are
/// restored bitwise after probing. Throws NumericError naming the leaf when a
/// probe evaluates to a non-finite value.
/// Instantiated for double and long double; the probes run in T.
template <typename T>
GradCheckResult finite_difference_check(const std::function<Tensor<T>()>& loss, std::vector<GradCheckLeaf<T>>& leaves,
                                        double step);

}  // namespace xlstm_mixer
