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

#ifndef ZOQAT_CLI_CHECKPOINT_H_
#define ZOQAT_CLI_CHECKPOINT_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>

#include "zoqat/cli/config.h"
#include "zoqat/model/model.h"

namespace zoqat::cli {

// Layout (integers little-endian):
//   magic "ZQCHKPNT", u32 kCheckpointVersion, u64 manifest length, manifest
//   JSON, u64 array count, then per array u64 name length, name, tensor.
// The manifest carries the run configuration, the model's quantization
// config, per-linear flags, the step counter and the RNG cursor.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  RunConfig config;
  model::Model model;
  std::size_t step = 0;
  std::uint64_t rng_cursor = 0;
};

// Writes to a sibling temporary file and renames it into place, so a failed
// save never leaves a partial checkpoint at `path`.
void save_checkpoint(const std::filesystem::path& path, const RunConfig& config,
                     model::Model& model, std::size_t step, std::uint64_t rng_cursor);

// Throws DataError on a missing or malformed file and on a version mismatch.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace zoqat::cli

#endif  // ZOQAT_CLI_CHECKPOINT_H_
