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

#ifndef ZOQAT_ZO_ZO_H_
#define ZOQAT_ZO_ZO_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "zoqat/model/model.h"

namespace zoqat::zo {

using model::Batch;
using model::ParamGroupLabel;
using model::ParamView;

enum class LrSchedule { kConstant, kLinearDecay };

struct ZoConfig {
  double epsilon = 1e-3;
  int directions = 1;
  // Indexed by ParamGroupLabel.
  std::array<double, 4> lr = {1e-3, 5e-6, 1e-5, 1e-5};
  std::size_t steps = 2000;
  std::uint64_t seed = 0;
  LrSchedule schedule = LrSchedule::kConstant;
  std::size_t batch_size = 4;
  // Mutation-test hook: report L+ - L- without the 1/(2 epsilon) factor.
  bool drop_difference_scale = false;

  double lr_for(ParamGroupLabel g) const { return lr[static_cast<int>(g)]; }
  // Learning rate of group g at `step` after the schedule.
  double scheduled_lr(ParamGroupLabel g, std::size_t step) const;
  // Throws InvalidArgument unless epsilon > 0, directions in [1, 65536],
  // every lr >= 0 and finite, and batch_size >= 1.
  void validate() const;
};

// Direction i of step t draws from stream t * kStreamsPerStep + i.
inline constexpr std::uint64_t kStreamsPerStep = std::uint64_t{1} << 16;
std::uint64_t direction_stream(std::size_t step, int i);

struct Direction {
  std::uint64_t stream;
  double coeff;  // (L+ - L-) / (2 epsilon)
};

struct GradientScale {
  std::vector<Direction> directions;
  double mean_loss;  // mean of every L+ and L-
};

using LossFn = std::function<double()>;

// Adds scale * u to every element of `view`, with u regenerated from
// (seed, stream) in view order.
void perturb(ParamView& view, std::uint64_t seed, std::uint64_t stream, double scale);

// Two-point estimate over cfg.directions directions. Parameters are moved by
// +eps u, -2 eps u, +eps u in place. On a non-finite loss or an exception from
// `loss`, the parameters are restored and NumericError (or the exception) is
// propagated.
GradientScale zo_gradient_scale(const LossFn& loss, ParamView& view, const ZoConfig& cfg,
                                std::size_t step);

// W <- W - lr_g / q * sum_i coeff_i u_i, all directions regenerated in
// lock step. Returns the L2 norm of the applied update per group.
std::array<double, 4> apply_update(ParamView& view, const GradientScale& grad,
                                   const ZoConfig& cfg, std::size_t step);

struct StepReport {
  std::size_t step = 0;
  double loss = 0.0;
  std::array<double, 4> update_norm{};
  double wall_ms = 0.0;
  std::uint64_t rng_cursor = 0;  // first direction stream of the next step
};

// One quantization-aware step on `batch`, followed by project_constraints.
StepReport zo_step(model::Model& model, const Batch& batch, const ZoConfig& cfg,
                   std::size_t step);

// Persistent optimizer bytes: one coefficient and one stream cursor per
// direction. Independent of model and batch size.
std::size_t optimizer_state_size(const ZoConfig& cfg);

// `size` sequences drawn with replacement from `data`, a pure function of
// (seed, step).
Batch sample_batch(const std::vector<model::Sequence>& data, std::size_t size,
                   std::uint64_t seed, std::size_t step);

// Header: step,loss,upd_weights,upd_smoothing,upd_clipping,upd_quant_affine,
// wall_ms,rng_cursor.
void write_step_header(std::ostream& out);
void write_step_row(std::ostream& out, const StepReport& r);

}  // namespace zoqat::zo

#endif  // ZOQAT_ZO_ZO_H_
