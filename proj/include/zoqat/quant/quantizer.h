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

#ifndef ZOQAT_QUANT_QUANTIZER_H_
#define ZOQAT_QUANT_QUANTIZER_H_

#include <cmath>
#include <string>
#include <vector>

#include "zoqat/numerics/stats.h"
#include "zoqat/numerics/tensor.h"

namespace zoqat::quant {

using numerics::Granularity;
using numerics::Tensor;

enum class Scheme { kSymmetric, kAsymmetric };
enum class Role { kWeight, kActivation };

struct QuantSpec {
  int bits = 8;
  Scheme scheme = Scheme::kAsymmetric;
  Granularity granularity;
  Role role = Role::kWeight;

  // Integer code range [q_n, q_p].
  double q_n() const;
  double q_p() const;
  // Throws InvalidArgument on bits outside [2, 30] or per-group activations.
  void validate() const;

  bool operator==(const QuantSpec&) const = default;
};

std::string to_string(const QuantSpec& spec);

// Learnable parameters of one quantizer, one entry per group.
// zero_point is stored as a real so that it can be perturbed; it is rounded
// to the nearest integer wherever it is applied.
struct QuantState {
  std::vector<double> step;
  std::vector<double> zero_point;
  std::vector<double> clip_lo;
  std::vector<double> clip_hi;

  std::size_t group_count() const { return step.size(); }
  // Throws InvalidState unless every step is positive and finite and
  // clip_lo < clip_hi in every group.
  void validate() const;

  bool operator==(const QuantState&) const = default;
};

// Round half to even. Relies on the default FE_TONEAREST mode.
inline double round_half_even(double x) { return std::nearbyint(x); }

// Range initialization.
//   symmetric:  step = absmax / q_p, zero = 0
//   asymmetric: step = (max - min) / q_p, zero = -round(min / step)
// clip_lo = q_n / q_p and clip_hi = 1, so clipping starts inactive.
// A group whose range is zero gets step = |c| (1 when c = 0) with a zero
// point that reproduces the constant c exactly.
QuantState init_range(const Tensor& x, const QuantSpec& spec);

// Integer clamp bounds of group g. Activations use [q_n, q_p]; weights use
// round(clip_lo * q_p), round(clip_hi * q_p) clamped into [q_n, q_p].
struct CodeBounds {
  double lo;
  double hi;
};
CodeBounds code_bounds(const QuantSpec& spec, const QuantState& state,
                       std::size_t g);

// The scalar kernel shared by every fake-quantization path. `zero` must
// already be rounded.
inline double fake_quant_scalar(double x, double step, double zero, CodeBounds b) {
  const double code = round_half_even(x / step) + zero;
  return step * ((code < b.lo ? b.lo : (code > b.hi ? b.hi : code)) - zero);
}

// x_hat = step * (clamp(round(x / step) + z, lo, hi) - z), elementwise.
Tensor fake_quant(const Tensor& x, const QuantSpec& spec,
                  const QuantState& state);

// The clamped integer codes behind fake_quant, as reals.
Tensor quant_codes(const Tensor& x, const QuantSpec& spec,
                   const QuantState& state);

// Mean of (x - fake_quant(x))^2.
double quant_error(const Tensor& x, const QuantSpec& spec,
                   const QuantState& state);

}  // namespace zoqat::quant

#endif  // ZOQAT_QUANT_QUANTIZER_H_
