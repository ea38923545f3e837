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

#ifndef ZOQAT_CALIBRATION_CALIBRATION_H_
#define ZOQAT_CALIBRATION_CALIBRATION_H_

#include <cstddef>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "zoqat/model/model.h"

namespace zoqat::calibration {

using model::LayerAttachment;
using model::LinearId;
using numerics::Tensor;

struct LayerCaptures {
  LinearId id;
  // One [T x D1] input per calibration sequence.
  std::vector<Tensor> inputs;
};

struct CalibSet {
  std::vector<LayerCaptures> layers;

  const LayerCaptures& at(const LinearId& id) const;
  std::size_t sample_count() const;
};

// Records the full-precision input of every linear layer, one forward per
// sequence. Throws InvalidArgument on an empty sample.
CalibSet capture_activations(model::Model& model, const model::Batch& sample);

struct ReconstructOptions {
  std::size_t epochs = 2;
  // Captured rows are thinned to at most this many, evenly spaced.
  std::size_t max_rows = 128;
  // Initial probe sizes: log-scale for s, fraction of the channel range for
  // delta, integer codes for the clipping bounds.
  double log_scale_step = 0.5;
  double shift_step = 0.1;
  double clip_step_codes = 1.0;
  // Probe sizes shrink by this factor after every epoch.
  double step_decay = 0.5;
  // Consecutive successful moves double the probe up to this many times.
  int max_expansions = 8;
};

struct ReconstructResult {
  std::optional<smoothing::SmoothingParams> smoothing;
  quant::QuantState state;
  double loss_before = 0.0;
  double loss_after = 0.0;
};

// Mean squared error between x*w + b and the quantized smoothed layer on the
// given rows. Activations, if quantized, use per-token dynamic ranges.
double reconstruction_loss(const Tensor& x, const Tensor& w, const Tensor& b,
                           const LayerAttachment& attachment);

// Derivative-free coordinate search over (s, delta, clip_lo, clip_hi) of one
// layer. A move is kept only if it lowers the loss; step and zero point are
// re-derived from the smoothed weight after every epoch. The result never has
// a higher loss than the starting attachment.
ReconstructResult reconstruct_layer(const Tensor& w, const Tensor& b,
                                    const std::vector<Tensor>& captures,
                                    const LayerAttachment& attachment,
                                    const ReconstructOptions& options = {},
                                    const std::string& layer_name = "layer");

// (before - after) / before. Throws InvalidArgument unless before > 0.
double delta_loss(double before, double after);

struct LayerReport {
  std::string layer;
  double loss_before;
  double loss_after;
  double delta_loss;
};

// Calibrates every trainable attachment of `model` in place, layer by layer.
// Layers with zero initial loss are reported with delta_loss 0.
std::vector<LayerReport> calibrate_model(model::Model& model, const CalibSet& calib,
                                         const ReconstructOptions& options = {});

// Header layer_id,loss_before,loss_after,delta_loss.
void write_layer_csv(std::ostream& out, const std::vector<LayerReport>& reports);

// Attaches quantizers if absent, then replaces every weight by its
// range-initialized fake-quantized value and freezes it. Layers that are
// already pre-quantized are left alone, so a second call is a no-op.
void rtn_quantize(model::Model& model, const model::QuantConfig& quant);

}  // namespace zoqat::calibration

#endif  // ZOQAT_CALIBRATION_CALIBRATION_H_
