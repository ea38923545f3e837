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

#include "zoqat/quant/quantizer.h"

#include <algorithm>
#include <cmath>

#include "zoqat/error.h"

namespace zoqat::quant {
namespace {

using numerics::GranularityKind;
using numerics::GroupLayout;

void check_groups(const GroupLayout& layout, const QuantState& state) {
  const std::size_t n = layout.group_count();
  if (state.step.size() != n || state.zero_point.size() != n ||
      state.clip_lo.size() != n || state.clip_hi.size() != n) {
    throw DimensionError("quantizer state has " +
                         std::to_string(state.step.size()) +
                         " groups, tensor layout needs " + std::to_string(n));
  }
}

// Per-group constants, resolved once per call.
struct Resolved {
  double step;
  double zero;
  double lo;
  double hi;
};

std::vector<Resolved> resolve(const QuantSpec& spec, const QuantState& state) {
  std::vector<Resolved> out(state.group_count());
  for (std::size_t g = 0; g < out.size(); ++g) {
    const double step = state.step[g];
    if (!(step > 0.0) || !std::isfinite(step)) {
      throw InvalidState("quantizer step must be positive and finite, group " +
                         std::to_string(g) + " has " + std::to_string(step));
    }
    const CodeBounds b = code_bounds(spec, state, g);
    out[g] = {step, round_half_even(state.zero_point[g]), b.lo, b.hi};
  }
  return out;
}

template <typename Fn>
Tensor map_codes(const Tensor& x, const QuantSpec& spec,
                 const QuantState& state, Fn fn) {
  spec.validate();
  const GroupLayout layout(x.shape(), spec.granularity);
  check_groups(layout, state);
  const std::vector<Resolved> groups = resolve(spec, state);
  Tensor out(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Resolved& r = groups[layout.group_of(i)];
    const double code =
        std::clamp(round_half_even(x[i] / r.step) + r.zero, r.lo, r.hi);
    out[i] = fn(code, r);
  }
  return out;
}

}  // namespace

double QuantSpec::q_n() const {
  return scheme == Scheme::kSymmetric ? -std::ldexp(1.0, bits - 1) : 0.0;
}

double QuantSpec::q_p() const {
  return scheme == Scheme::kSymmetric ? std::ldexp(1.0, bits - 1) - 1.0
                                      : std::ldexp(1.0, bits) - 1.0;
}

void QuantSpec::validate() const {
  if (bits < 2 || bits > 30) {
    throw InvalidArgument("quantizer bits must lie in [2, 30], got " +
                          std::to_string(bits));
  }
  if (role == Role::kActivation &&
      granularity.kind == GranularityKind::kPerGroup) {
    throw InvalidArgument("activation quantizers cannot use per-group granularity");
  }
}

std::string to_string(const QuantSpec& spec) {
  return std::to_string(spec.bits) + "-bit " +
         (spec.scheme == Scheme::kSymmetric ? "symmetric " : "asymmetric ") +
         numerics::to_string(spec.granularity) +
         (spec.role == Role::kWeight ? " weight" : " activation");
}

void QuantState::validate() const {
  const std::size_t n = step.size();
  if (zero_point.size() != n || clip_lo.size() != n || clip_hi.size() != n) {
    throw InvalidState("quantizer state vectors differ in length");
  }
  for (std::size_t g = 0; g < n; ++g) {
    if (!(step[g] > 0.0) || !std::isfinite(step[g])) {
      throw InvalidState("quantizer step must be positive, group " + std::to_string(g));
    }
    if (!(clip_lo[g] < clip_hi[g])) {
      throw InvalidState("clipping needs clip_lo < clip_hi, group " + std::to_string(g));
    }
  }
}

QuantState init_range(const Tensor& x, const QuantSpec& spec) {
  spec.validate();
  if (x.empty()) throw InvalidArgument("init_range: empty tensor");
  const auto stats = numerics::reduce_stats(x, spec.granularity);
  const double q_n = spec.q_n();
  const double q_p = spec.q_p();
  QuantState st;
  st.step.resize(stats.size());
  st.zero_point.resize(stats.size());
  st.clip_lo.assign(stats.size(), q_n / q_p);
  st.clip_hi.assign(stats.size(), 1.0);
  for (std::size_t g = 0; g < stats.size(); ++g) {
    const auto& s = stats[g];
    if (spec.scheme == Scheme::kSymmetric) {
      // absmax == 0 only for an all-zero group.
      st.step[g] = s.absmax > 0.0 ? s.absmax / q_p : 1.0;
      st.zero_point[g] = 0.0;
      continue;
    }
    const double range = s.max - s.min;
    if (range > 0.0) {
      st.step[g] = range / q_p;
      st.zero_point[g] = -round_half_even(s.min / st.step[g]);
    } else if (s.min == 0.0) {
      st.step[g] = 1.0;
      st.zero_point[g] = 0.0;
    } else {
      // c maps to code 1 (c > 0, z = 0) or code 0 (c < 0, z = 1).
      st.step[g] = std::abs(s.min);
      st.zero_point[g] = s.min > 0.0 ? 0.0 : 1.0;
    }
  }
  return st;
}

CodeBounds code_bounds(const QuantSpec& spec, const QuantState& state,
                       std::size_t g) {
  const double q_n = spec.q_n();
  const double q_p = spec.q_p();
  if (spec.role == Role::kActivation) return {q_n, q_p};
  const double lo = std::clamp(round_half_even(state.clip_lo[g] * q_p), q_n, q_p);
  const double hi = std::clamp(round_half_even(state.clip_hi[g] * q_p), q_n, q_p);
  return {lo, std::max(lo, hi)};
}

Tensor fake_quant(const Tensor& x, const QuantSpec& spec,
                  const QuantState& state) {
  return map_codes(x, spec, state, [](double code, const Resolved& r) {
    return r.step * (code - r.zero);
  });
}

Tensor quant_codes(const Tensor& x, const QuantSpec& spec,
                   const QuantState& state) {
  return map_codes(x, spec, state, [](double code, const Resolved&) { return code; });
}

double quant_error(const Tensor& x, const QuantSpec& spec,
                   const QuantState& state) {
  const Tensor xq = fake_quant(x, spec, state);
  double sum = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - xq[i];
    sum += d * d;
  }
  return sum / static_cast<double>(x.size());
}

}  // namespace zoqat::quant
