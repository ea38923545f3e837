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

#include "zoqat/smoothing/smoothing.h"

#include <algorithm>
#include <cmath>

#include "zoqat/error.h"

namespace zoqat::smoothing {
namespace {

using numerics::shape_string;

void check_channels(const Tensor& t, std::size_t axis_len, const SmoothingParams& p,
                    const char* what) {
  if (t.rank() != 2 || axis_len != p.channels()) {
    throw DimensionError(std::string(what) + " " + shape_string(t.shape()) +
                         " does not match " + std::to_string(p.channels()) +
                         " smoothing channels");
  }
}

}  // namespace

SmoothingParams SmoothingParams::identity(std::size_t channels) {
  return {std::vector<double>(channels, 1.0), std::vector<double>(channels, 0.0)};
}

void SmoothingParams::validate() const {
  if (shift.size() != scale.size()) {
    throw DimensionError("smoothing scale and shift lengths differ");
  }
  for (std::size_t i = 0; i < scale.size(); ++i) {
    if (!(scale[i] > 0.0) || !std::isfinite(scale[i])) {
      throw InvalidState("smoothing scale must be positive, channel " +
                         std::to_string(i) + " has " + std::to_string(scale[i]));
    }
  }
}

void SmoothingParams::clamp_scale() {
  for (double& s : scale) s = std::clamp(s, kScaleMin, kScaleMax);
}

Tensor smooth_activation(const Tensor& x, const SmoothingParams& p) {
  p.validate();
  check_channels(x, x.rank() == 2 ? x.cols() : 0, p, "activation");
  Tensor out(x.shape());
  const std::size_t d = p.channels();
  for (std::size_t r = 0; r < x.rows(); ++r) {
    for (std::size_t j = 0; j < d; ++j) {
      out(r, j) = (x(r, j) - p.shift[j]) / p.scale[j];
    }
  }
  return out;
}

Tensor smooth_weight(const Tensor& w, const SmoothingParams& p) {
  p.validate();
  check_channels(w, w.rank() == 2 ? w.rows() : 0, p, "weight");
  Tensor out(w.shape());
  for (std::size_t i = 0; i < w.rows(); ++i) {
    for (std::size_t j = 0; j < w.cols(); ++j) out(i, j) = p.scale[i] * w(i, j);
  }
  return out;
}

Tensor smooth_bias(const Tensor& b, const Tensor& w, const SmoothingParams& p) {
  check_channels(w, w.rank() == 2 ? w.rows() : 0, p, "weight");
  if (b.size() != w.cols()) {
    throw DimensionError("bias " + shape_string(b.shape()) + " does not match weight " +
                         shape_string(w.shape()));
  }
  Tensor out = b;
  for (std::size_t i = 0; i < w.rows(); ++i) {
    const double d = p.shift[i];
    if (d == 0.0) continue;
    for (std::size_t j = 0; j < w.cols(); ++j) out[j] += d * w(i, j);
  }
  return out;
}

Smoothed apply_smoothing(const Tensor& x, const Tensor& w, const Tensor& b,
                         const SmoothingParams& p) {
  if (x.rank() != 2 || w.rank() != 2 || x.cols() != w.rows()) {
    throw DimensionError("apply_smoothing: activation " + shape_string(x.shape()) +
                         " and weight " + shape_string(w.shape()) + " do not chain");
  }
  return {smooth_activation(x, p), smooth_weight(w, p), smooth_bias(b, w, p)};
}

double smoothing_gain(const Tensor& x, const Tensor& w, const Tensor& b,
                      const SmoothingParams& p, const quant::QuantSpec& spec_w,
                      const quant::QuantSpec& spec_a) {
  const Smoothed sm = apply_smoothing(x, w, b, p);
  const Tensor xq = quant::fake_quant(sm.x, spec_a, quant::init_range(sm.x, spec_a));
  const Tensor wq = quant::fake_quant(sm.w, spec_w, quant::init_range(sm.w, spec_w));
  const Tensor y = numerics::matmul(x, w);
  const Tensor yq = numerics::matmul(xq, wq);
  const std::size_t n = y.cols();
  double loss = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    // Plain output carries b, the quantized one carries b_bar.
    const double e = (y[i] + b[i % n]) - (yq[i] + sm.b[i % n]);
    loss += e * e;
  }
  return loss;
}

SmoothingParams absmax_ratio_init(const Tensor& x, const Tensor& w, double migration,
                                  bool center_shift) {
  if (x.rank() != 2 || w.rank() != 2 || x.cols() != w.rows()) {
    throw DimensionError("absmax_ratio_init: activation " + shape_string(x.shape()) +
                         " and weight " + shape_string(w.shape()) + " do not chain");
  }
  if (!(migration >= 0.0 && migration <= 1.0)) {
    throw InvalidArgument("migration strength must lie in [0, 1]");
  }
  const std::size_t d = x.cols();
  SmoothingParams p = SmoothingParams::identity(d);
  for (std::size_t j = 0; j < d; ++j) {
    double lo = x(0, j), hi = x(0, j);
    for (std::size_t r = 1; r < x.rows(); ++r) {
      lo = std::min(lo, x(r, j));
      hi = std::max(hi, x(r, j));
    }
    const double mid = center_shift ? 0.5 * (lo + hi) : 0.0;
    const double xa = std::max(std::abs(hi - mid), std::abs(lo - mid));
    double wa = 0.0;
    for (std::size_t c = 0; c < w.cols(); ++c) wa = std::max(wa, std::abs(w(j, c)));
    p.shift[j] = mid;
    if (xa > 0.0 && wa > 0.0) {
      p.scale[j] = std::pow(xa, migration) / std::pow(wa, 1.0 - migration);
    }
  }
  p.clamp_scale();
  return p;
}

}  // namespace zoqat::smoothing
