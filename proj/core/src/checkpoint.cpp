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

#include "xlstm_mixer/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "xlstm_mixer/errors.hpp"

namespace xlstm_mixer {

namespace fs = std::filesystem;

nlohmann::ordered_json config_to_json(const MixerConfig& cfg) {
  nlohmann::ordered_json j;
  j["lookback"] = cfg.lookback;
  j["horizon"] = cfg.horizon;
  j["num_variates"] = cfg.num_variates;
  j["embed_dim"] = cfg.embed_dim;
  j["num_blocks"] = cfg.num_blocks;
  j["num_heads"] = cfg.block.num_heads;
  j["conv_width"] = cfg.block.conv_width;
  j["dropout"] = cfg.block.dropout_rate;
  j["mix_time"] = cfg.mix_time;
  j["slstm_axis"] = std::string(to_string(cfg.slstm_axis));
  j["init_token"] = cfg.init_token;
  j["mix_view"] = cfg.mix_view;
  return j;
}

MixerConfig config_from_json(const nlohmann::json& j) {
  MixerConfig cfg;
  try {
    cfg.lookback = j.value("lookback", cfg.lookback);
    cfg.horizon = j.value("horizon", cfg.horizon);
    cfg.num_variates = j.value("num_variates", cfg.num_variates);
    cfg.embed_dim = j.value("embed_dim", cfg.embed_dim);
    cfg.num_blocks = j.value("num_blocks", cfg.num_blocks);
    cfg.block.num_heads = j.value("num_heads", cfg.block.num_heads);
    cfg.block.conv_width = j.value("conv_width", cfg.block.conv_width);
    cfg.block.dropout_rate = j.value("dropout", cfg.block.dropout_rate);
    cfg.block.d_hidden = cfg.embed_dim;
    cfg.mix_time = j.value("mix_time", cfg.mix_time);
    cfg.slstm_axis = parse_slstm_axis(j.value("slstm_axis", std::string("variates")));
    cfg.init_token = j.value("init_token", cfg.init_token);
    cfg.mix_view = j.value("mix_view", cfg.mix_view);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed model configuration: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

namespace {

template <typename T>
constexpr const char* width_tag() {
  return sizeof(T) == 4 ? "f32" : "f64";
}

std::string dims_string(const Shape& shape) {
  std::string s;
  for (std::size_t k = 0; k < shape.size(); ++k) {
    if (k) s += 'x';
    s += std::to_string(shape[k]);
  }
  return s;
}

template <typename T>
void write_values(const fs::path& file, std::span<const T> values) {
  using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  std::string bytes(values.size() * sizeof(T), '\0');
  for (std::size_t k = 0; k < values.size(); ++k) {
    Bits bits = std::bit_cast<Bits>(values[k]);
    for (std::size_t b = 0; b < sizeof(T); ++b) {
      bytes[k * sizeof(T) + b] = static_cast<char>((bits >> (8 * b)) & 0xFF);
    }
  }
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + file.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw DataError("failed writing " + file.string());
}

template <typename T>
void read_values(const fs::path& file, std::span<T> values) {
  using Bits = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("missing checkpoint file " + file.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() != values.size() * sizeof(T)) {
    throw DataError(file.string() + ": expected " + std::to_string(values.size() * sizeof(T)) + " bytes, found " +
                    std::to_string(bytes.size()));
  }
  for (std::size_t k = 0; k < values.size(); ++k) {
    Bits bits = 0;
    for (std::size_t b = 0; b < sizeof(T); ++b) {
      bits |= static_cast<Bits>(static_cast<unsigned char>(bytes[k * sizeof(T) + b])) << (8 * b);
    }
    values[k] = std::bit_cast<T>(bits);
  }
}

struct ManifestEntry {
  std::string dims;
  std::string width;
};

std::map<std::string, ManifestEntry> read_manifest(const fs::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("missing checkpoint manifest " + file.string());
  std::map<std::string, ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream fields(line);
    std::string name;
    ManifestEntry e;
    if (!std::getline(fields, name, '\t') || !std::getline(fields, e.dims, '\t') || !std::getline(fields, e.width)) {
      throw DataError(file.string() + ":" + std::to_string(line_no) + ": malformed manifest line");
    }
    entries.emplace(name, e);
  }
  return entries;
}

}  // namespace

template <typename T>
void save_checkpoint(const fs::path& dir, const MixerConfig& cfg, const MixerParams<T>& params,
                     const nlohmann::ordered_json& metadata) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());

  std::ostringstream manifest;
  manifest << "# name\tdims\twidth\n";
  for (const auto& p : params.parameters()) {
    manifest << p.name << '\t' << dims_string(p.tensor.shape()) << '\t' << width_tag<T>() << '\n';
    write_values<T>(dir / (p.name + ".bin"), p.tensor.data());
  }
  {
    std::ofstream out(dir / "manifest.txt", std::ios::trunc);
    if (!out) throw DataError("cannot write " + (dir / "manifest.txt").string());
    out << manifest.str();
  }
  nlohmann::ordered_json doc;
  doc["model"] = config_to_json(cfg);
  doc["metadata"] = metadata;
  std::ofstream out(dir / "config.json", std::ios::trunc);
  if (!out) throw DataError("cannot write " + (dir / "config.json").string());
  out << doc.dump(2) << '\n';
}

template <typename T>
Checkpoint<T> load_checkpoint(const fs::path& dir) {
  std::ifstream cfg_in(dir / "config.json");
  if (!cfg_in) throw DataError("missing checkpoint configuration " + (dir / "config.json").string());
  nlohmann::ordered_json doc;
  try {
    doc = nlohmann::ordered_json::parse(cfg_in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError((dir / "config.json").string() + ": " + e.what());
  }
  Checkpoint<T> ckpt;
  ckpt.config = config_from_json(doc.at("model"));
  ckpt.metadata = doc.value("metadata", nlohmann::ordered_json::object());
  ckpt.params = MixerParams<T>::zeros(ckpt.config);

  const auto manifest = read_manifest(dir / "manifest.txt");
  const auto expected = ckpt.params.parameters();
  if (manifest.size() != expected.size()) {
    throw DataError("checkpoint lists " + std::to_string(manifest.size()) + " parameters, configuration needs " +
                    std::to_string(expected.size()));
  }
  for (const auto& p : expected) {
    const auto it = manifest.find(p.name);
    if (it == manifest.end()) throw DataError("checkpoint is missing parameter " + p.name);
    if (it->second.width != width_tag<T>()) {
      throw DataError("parameter " + p.name + " is stored as " + it->second.width + ", expected " + width_tag<T>());
    }
    if (it->second.dims != dims_string(p.tensor.shape())) {
      throw DataError("parameter " + p.name + " has shape " + it->second.dims + ", configuration implies " +
                      dims_string(p.tensor.shape()));
    }
    Tensor<T> handle = p.tensor;
    read_values<T>(dir / (p.name + ".bin"), handle.mutable_data());
  }
  return ckpt;
}

template void save_checkpoint<float>(const fs::path&, const MixerConfig&, const MixerParams<float>&,
                                     const nlohmann::ordered_json&);
template void save_checkpoint<double>(const fs::path&, const MixerConfig&, const MixerParams<double>&,
                                      const nlohmann::ordered_json&);
template Checkpoint<float> load_checkpoint<float>(const fs::path&);
template Checkpoint<double> load_checkpoint<double>(const fs::path&);

}  // namespace xlstm_mixer
