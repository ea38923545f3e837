// Copyright 2026 The zoqat Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ZOQAT_CLI_CONFIG_H_
#define ZOQAT_CLI_CONFIG_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>

#include <json.hpp>

#include "zoqat/model/model.h"
#include "zoqat/zo/zo.h"

namespace zoqat::cli {

// W{w}A{a}[g{gs}]. a == 16 means weight-only; gs == 0 means per channel.
struct QuantNotation {
  int w_bits = 4;
  int a_bits = 16;
  std::size_t group_size = 0;
  bool operator==(const QuantNotation&) const = default;
};

// Accepts e.g. "W4A4", "W2A16g128" (case-insensitive letters). Throws
// InvalidArgument on anything else or on bits outside [2, 16].
QuantNotation parse_quant_notation(const std::string& text);
std::string format_quant_notation(const QuantNotation& n);
model::QuantConfig to_quant_config(const QuantNotation& n);
QuantNotation notation_of(const model::QuantConfig& q);

struct TrainSettings {
  std::size_t steps = 2000;
  std::size_t eval_interval = 250;
  // 0 evaluates on every held-out chunk.
  std::size_t eval_sequences = 0;
  bool lightweight = false;
  bool operator==(const TrainSettings&) const = default;
};

struct CalibSettings {
  // 0 picks 2 epochs in weight-activation mode and 4 in weight-only mode.
  std::size_t epochs = 0;
  std::size_t samples = 8;
  std::size_t seq_len = 128;
  bool operator==(const CalibSettings&) const = default;

  std::size_t effective_epochs(const model::QuantConfig& q) const;
};

struct RunConfig {
  model::ModelConfig model;
  // Empty: full-precision training.
  std::optional<model::QuantConfig> quant = to_quant_config({4, 4, 0});
  zo::ZoConfig zo;
  TrainSettings train;
  CalibSettings calib;
  std::string corpus = "data/corpus.txt";
  std::string out_dir = "runs/default";
  // Empty: <out_dir>/metrics.
  std::string metrics_dir;
  std::uint64_t seed = 0;

  std::filesystem::path metrics_path() const;
  std::filesystem::path checkpoint_path() const;
  // Throws InvalidArgument on any invalid block.
  void validate() const;
};

// Flat INI file with sections [model], [quant], [zo], [train], [calibration],
// [paths] and [run]. Unknown sections or keys are rejected.
RunConfig load_config(const std::filesystem::path& path);

nlohmann::json to_json(const RunConfig& cfg);
RunConfig config_from_json(const nlohmann::json& j);

}  // namespace zoqat::cli

#endif  // ZOQAT_CLI_CONFIG_H_
