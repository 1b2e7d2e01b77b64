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

// Checkpoint directories:
//
//   manifest.txt   one "name<TAB>dims<TAB>f32|f64" line per parameter
//   <name>.bin     raw little-endian values, row-major
//   config.json    the model configuration plus free-form metadata
//
// Save followed by load is bit-exact.

#pragma once

#include <filesystem>

#include <nlohmann/json.hpp>

#include "xlstm_mixer/mixer.hpp"

namespace xlstm_mixer {

nlohmann::ordered_json config_to_json(const MixerConfig& cfg);
/// Missing keys keep their defaults; the result is validated.
MixerConfig config_from_json(const nlohmann::json& j);

template <typename T>
struct Checkpoint {
  MixerConfig config;
  MixerParams<T> params;
  nlohmann::ordered_json metadata;
};

/// Creates `dir` if needed and overwrites any previous checkpoint files.
template <typename T>
void save_checkpoint(const std::filesystem::path& dir, const MixerConfig& cfg, const MixerParams<T>& params,
                     const nlohmann::ordered_json& metadata = nlohmann::ordered_json::object());

/// Throws DataError when files are missing, shapes disagree with the stored
/// configuration, or the stored scalar width differs from T.
template <typename T>
Checkpoint<T> load_checkpoint(const std::filesystem::path& dir);

}  // namespace xlstm_mixer
