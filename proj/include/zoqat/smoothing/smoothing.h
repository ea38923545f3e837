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

#ifndef ZOQAT_SMOOTHING_SMOOTHING_H_
#define ZOQAT_SMOOTHING_SMOOTHING_H_

#include <cstddef>
#include <vector>

#include "zoqat/numerics/tensor.h"
#include "zoqat/quant/quantizer.h"

namespace zoqat::smoothing {

using numerics::Tensor;

inline constexpr double kScaleMin = 1e-4;
inline constexpr double kScaleMax = 1e4;

// Per-input-channel scale s (> 0) and shift delta of one linear layer.
struct SmoothingParams {
  std::vector<double> scale;
  std::vector<double> shift;

  static SmoothingParams identity(std::size_t channels);
  std::size_t channels() const { return scale.size(); }
  // Throws InvalidState on a non-positive scale or mismatched lengths.
  void validate() const;
  // Clamps every scale into [kScaleMin, kScaleMax].
  void clamp_scale();

  bool operator==(const SmoothingParams&) const = default;
};

// x [T x D1] -> (x - delta) / s, broadcast over rows.
Tensor smooth_activation(const Tensor& x, const SmoothingParams& p);
// w [D1 x D2] -> row i scaled by s_i.
Tensor smooth_weight(const Tensor& w, const SmoothingParams& p);
// b [1 x D2] or [D2] -> b + delta * w, same shape as b.
Tensor smooth_bias(const Tensor& b, const Tensor& w, const SmoothingParams& p);

struct Smoothed {
  Tensor x;
  Tensor w;
  Tensor b;
};

// (x_bar, w_bar, b_bar) with x_bar * w_bar + b_bar == x * w + b in exact
// arithmetic.
Smoothed apply_smoothing(const Tensor& x, const Tensor& w, const Tensor& b,
                         const SmoothingParams& p);

// Squared reconstruction error of the quantized smoothed layer against the
// plain full-precision output. Both quantizers are range-initialized on the
// smoothed operands.
double smoothing_gain(const Tensor& x, const Tensor& w, const Tensor& b,
                      const SmoothingParams& p, const quant::QuantSpec& spec_w,
                      const quant::QuantSpec& spec_a);

// s_j = max|x_j|^m / max|w_j|^(1-m), clamped. With `center_shift` the shift
// is the channel midpoint (max_j + min_j) / 2 of x, else zero.
SmoothingParams absmax_ratio_init(const Tensor& x, const Tensor& w,
                                  double migration = 0.5,
                                  bool center_shift = false);

}  // namespace zoqat::smoothing

#endif  // ZOQAT_SMOOTHING_SMOOTHING_H_
