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

#include "xlstm_mixer/gradcheck.hpp"

#include <algorithm>
#include <cmath>

namespace xlstm_mixer {

double GradCheckResult::fraction_below(double threshold) const {
  if (entries.empty()) return 1.0;
  const auto n = std::count_if(entries.begin(), entries.end(),
                               [threshold](const GradCheckEntry& e) { return e.error < threshold; });
  return static_cast<double>(n) / static_cast<double>(entries.size());
}

const GradCheckEntry* GradCheckResult::worst() const {
  if (entries.empty()) return nullptr;
  return &*std::max_element(entries.begin(), entries.end(),
                            [](const GradCheckEntry& a, const GradCheckEntry& b) { return a.error < b.error; });
}

template <typename T>
GradCheckResult finite_difference_check(const std::function<Tensor<T>()>& loss, std::vector<GradCheckLeaf<T>>& leaves,
                                        double step) {
  if (!(step > 0.0)) throw std::invalid_argument("finite_difference_check: step must be positive");
  const T h = static_cast<T>(step);

  std::vector<std::vector<T>> analytic;
  {
    for (auto& leaf : leaves) {
      leaf.tensor.set_requires_grad(true);
      leaf.tensor.zero_grad();
    }
    Tape<T> tape;
    const Tensor<T> value = loss();
    if (!std::isfinite(value.item())) throw NumericError("finite_difference_check: loss is not finite");
    tape.backward(value);
    for (const auto& leaf : leaves) {
      const auto g = leaf.tensor.grad();
      analytic.emplace_back(g.begin(), g.end());
    }
  }

  GradCheckResult result;
  for (std::size_t l = 0; l < leaves.size(); ++l) {
    auto values = leaves[l].tensor.mutable_data();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const T original = values[i];
      values[i] = original + h;
      const T plus = loss().item();
      values[i] = original - h;
      const T minus = loss().item();
      values[i] = original;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw NumericError("finite_difference_check: non-finite loss while probing leaf '" + leaves[l].name +
                           "' at index " + std::to_string(i));
      }
      const T a = analytic[l][i];
      const T n = (plus - minus) / (T(2) * h);
      const T diff = std::abs(a - n);
      const T error = std::abs(a) < T(1e-8) ? diff : diff / std::max(std::abs(a), std::abs(n));
      GradCheckEntry entry;
      entry.leaf = leaves[l].name;
      entry.index = i;
      entry.analytic = static_cast<double>(a);
      entry.numeric = static_cast<double>(n);
      entry.error = static_cast<double>(error);
      result.max_error = std::max(result.max_error, entry.error);
      result.entries.push_back(std::move(entry));
    }
  }
  return result;
}

template GradCheckResult finite_difference_check(const std::function<Tensor<double>()>&,
                                                 std::vector<GradCheckLeaf<double>>&, double);
template GradCheckResult finite_difference_check(const std::function<Tensor<long double>()>&,
                                                 std::vector<GradCheckLeaf<long double>>&, double);

}  // namespace xlstm_mixer
