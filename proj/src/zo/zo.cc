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

#include "zoqat/zo/zo.h"

#include <chrono>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <string>

#include "zoqat/error.h"
#include "zoqat/numerics/rng.h"

namespace zoqat::zo {
namespace {

// Batch sampling streams live far above every direction stream.
constexpr std::uint64_t kBatchStreamBase = std::uint64_t{0xB} << 60;

}  // namespace

double ZoConfig::scheduled_lr(ParamGroupLabel g, std::size_t step) const {
  const double base = lr_for(g);
  if (schedule == LrSchedule::kConstant || steps == 0) return base;
  const double frac = static_cast<double>(std::min(step, steps)) / static_cast<double>(steps);
  return base * (1.0 - frac);
}

void ZoConfig::validate() const {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    throw InvalidArgument("epsilon must be positive and finite");
  }
  if (directions < 1 || static_cast<std::uint64_t>(directions) > kStreamsPerStep) {
    throw InvalidArgument("directions must lie in [1, 65536], got " +
                          std::to_string(directions));
  }
  for (double v : lr) {
    if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidArgument("learning rates must be >= 0");
  }
  if (batch_size == 0) throw InvalidArgument("batch_size must be >= 1");
}

std::uint64_t direction_stream(std::size_t step, int i) {
  return static_cast<std::uint64_t>(step) * kStreamsPerStep + static_cast<std::uint64_t>(i);
}

void perturb(ParamView& view, std::uint64_t seed, std::uint64_t stream, double scale) {
  numerics::RngStream rng(seed, stream);
  for (auto& slice : view.slices) {
    for (double& v : slice.values) v += scale * rng.next_gaussian();
  }
}

GradientScale zo_gradient_scale(const LossFn& loss, ParamView& view, const ZoConfig& cfg,
                                std::size_t step) {
  cfg.validate();
  const double eps = cfg.epsilon;
  GradientScale out;
  out.directions.reserve(cfg.directions);
  double loss_sum = 0.0;
  for (int i = 0; i < cfg.directions; ++i) {
    const std::uint64_t stream = direction_stream(step, i);
    // Net displacement from the unperturbed point, in units of eps u.
    double offset = 0.0;
    auto move = [&](double units) {
      perturb(view, cfg.seed, stream, units * eps);
      offset += units;
    };
    auto evaluate = [&](const char* side) {
      const double l = loss();
      if (!std::isfinite(l)) {
        throw NumericError(std::string("non-finite loss at the ") + side +
                           " perturbation of step " + std::to_string(step) + ", direction " +
                           std::to_string(i));
      }
      return l;
    };
    double plus = 0.0, minus = 0.0;
    try {
      move(1.0);
      plus = evaluate("positive");
      move(-2.0);
      minus = evaluate("negative");
      move(1.0);
    } catch (...) {
      if (offset != 0.0) perturb(view, cfg.seed, stream, -offset * eps);
      throw;
    }
    const double denom = cfg.drop_difference_scale ? 1.0 : 2.0 * eps;
    out.directions.push_back({stream, (plus - minus) / denom});
    loss_sum += plus + minus;
  }
  out.mean_loss = loss_sum / (2.0 * cfg.directions);
  return out;
}

std::array<double, 4> apply_update(ParamView& view, const GradientScale& grad,
                                   const ZoConfig& cfg, std::size_t step) {
  const std::size_t q = grad.directions.size();
  std::vector<numerics::RngStream> rngs;
  rngs.reserve(q);
  for (const Direction& d : grad.directions) rngs.emplace_back(cfg.seed, d.stream);
  std::array<double, 4> sq{};
  for (auto& slice : view.slices) {
    const int g = static_cast<int>(slice.group);
    const double scale = cfg.scheduled_lr(slice.group, step) / static_cast<double>(q);
    for (double& v : slice.values) {
      double acc = 0.0;
      for (std::size_t i = 0; i < q; ++i) acc += grad.directions[i].coeff * rngs[i].next_gaussian();
      const double delta = scale * acc;
      v -= delta;
      sq[g] += delta * delta;
    }
  }
  for (double& s : sq) s = std::sqrt(s);
  return sq;
}

StepReport zo_step(model::Model& model, const Batch& batch, const ZoConfig& cfg,
                   std::size_t step) {
  const auto start = std::chrono::steady_clock::now();
  ParamView view = model.trainable_parameters();
  if (view.count() == 0) throw InvalidState("model has no trainable parameters");
  const GradientScale grad = zo_gradient_scale(
      [&] { return model.loss(batch, model::Mode::kQat); }, view, cfg, step);
  StepReport r;
  r.step = step;
  r.loss = grad.mean_loss;
  r.update_norm = apply_update(view, grad, cfg, step);
  model.project_constraints();
  r.rng_cursor = direction_stream(step + 1, 0);
  r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                  .count();
  return r;
}

std::size_t optimizer_state_size(const ZoConfig& cfg) {
  return static_cast<std::size_t>(cfg.directions) * (sizeof(double) + sizeof(std::uint64_t));
}

Batch sample_batch(const std::vector<model::Sequence>& data, std::size_t size,
                   std::uint64_t seed, std::size_t step) {
  if (data.empty()) throw InvalidArgument("cannot sample a batch from an empty dataset");
  numerics::RngStream rng(seed, kBatchStreamBase + step);
  Batch b;
  b.reserve(size);
  for (std::size_t i = 0; i < size; ++i) b.push_back(data[rng.next_index(data.size())]);
  return b;
}

void write_step_header(std::ostream& out) {
  out << "step,loss,upd_weights,upd_smoothing,upd_clipping,upd_quant_affine,wall_ms,rng_cursor\n";
}

void write_step_row(std::ostream& out, const StepReport& r) {
  out << std::setprecision(17) << r.step << ',' << r.loss;
  for (double n : r.update_norm) out << ',' << n;
  out << ',' << std::setprecision(6) << r.wall_ms << ',' << r.rng_cursor << '\n';
}

}  // namespace zoqat::zo
