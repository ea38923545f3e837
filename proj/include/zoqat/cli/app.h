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

#ifndef ZOQAT_CLI_APP_H_
#define ZOQAT_CLI_APP_H_

#include <exception>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "zoqat/calibration/calibration.h"
#include "zoqat/cli/config.h"
#include "zoqat/cli/corpus.h"
#include "zoqat/diagnostics/diagnostics.h"
#include "zoqat/theory/theory.h"

namespace zoqat::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitNumeric = 3,
  kExitVerification = 4,
};

// Maps a library exception onto the process exit code.
int exit_code_for(const std::exception& e);

// Held-out sequences used for perplexity: the whole eval split, or its first
// `eval_sequences` chunks.
model::Batch eval_batch(const Corpus& corpus, const TrainSettings& train);

// The first `samples` training chunks, cut to `seq_len` tokens.
model::Batch calibration_batch(const Corpus& corpus, const CalibSettings& calib);

struct QuantInit {
  std::vector<calibration::LayerReport> layers;
  diagnostics::ProbeSet probes;
};

// Attaches cfg.quant, captures activations, calibrates every layer (clipping
// only in weight-only mode) and applies the lightweight freeze if requested.
QuantInit initialize_quantization(model::Model& model, const RunConfig& cfg, const Corpus& corpus);

struct TrainOutcome {
  double initial_ppl = 0.0;
  double final_ppl = 0.0;
  std::size_t final_step = 0;
};

// The full train pipeline. Writes <out_dir>/checkpoint.zqc and, under the
// metrics directory, calibration.csv, zo.csv and diagnostics.csv.
// A checkpoint without quantizers resumed under a quantized config is
// quantized and calibrated first, and training restarts at step 0.
TrainOutcome cmd_train(const RunConfig& cfg, const std::optional<std::filesystem::path>& resume,
                       std::ostream& log);

// RTN baseline; returns the eval perplexity and writes the checkpoint.
double cmd_quantize(const RunConfig& cfg, const std::optional<std::filesystem::path>& resume,
                    std::ostream& log);

// Calibration only; returns the eval perplexity and writes the checkpoint.
double cmd_calibrate(const RunConfig& cfg, const std::optional<std::filesystem::path>& resume,
                     std::ostream& log);

// Perplexity of a checkpoint on the eval split of cfg.corpus; writes
// eval.csv in the tracking format.
double cmd_eval(const std::filesystem::path& checkpoint, const RunConfig& cfg, std::ostream& log);

// Memory accounting of a checkpoint and, when a training diagnostics.csv is
// present in the metrics directory, its inconsistency score.
void cmd_diag(const std::filesystem::path& checkpoint, const RunConfig& cfg, std::ostream& log);

// Runs the theory suite, writes verify.txt and verify.csv, and returns
// kExitOk or kExitVerification.
int cmd_verify(const theory::VerifyOptions& options, const RunConfig& cfg, std::ostream& log);

// Command-line entry point.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace zoqat::cli

#endif  // ZOQAT_CLI_APP_H_
