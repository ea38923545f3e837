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

// Numerical checks of the smoothed-objective estimator theory on toy losses.
//
// Notation: Q is the per-coordinate round-to-nearest quantizer of step delta
// (identity when delta == 0), f_eps(W) = E L(Q(W + eps U)) with U standard
// normal, and thresholds of Q sit on the midpoint grid delta * (k + 1/2).

#ifndef ZOQAT_THEORY_THEORY_H_
#define ZOQAT_THEORY_THEORY_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace zoqat::theory {

enum class BaseLoss { kLinear, kQuadratic, kCustom };

struct SmoothedObjective {
  BaseLoss kind = BaseLoss::kLinear;
  std::size_t dim = 1;
  double lipschitz = 1.0;  // G
  double delta = 0.0;      // quantizer step; 0 disables Q
  double epsilon = 1e-2;
  // Linear loss L(z) = G <a, z>; a is normalized. Empty means e_1.
  std::vector<double> direction;
  // kCustom only.
  std::function<double(std::span<const double>)> custom;

  double quantize(double z) const;
  // L(z) without the quantizer.
  double base_loss(std::span<const double> z) const;
  // L(Q(w)).
  double loss(std::span<const double> w) const;
  // Throws InvalidArgument on a non-positive dim, G or epsilon, a negative
  // delta, a direction of the wrong length or zero norm, or a missing
  // custom callback.
  void validate() const;
};

struct Estimate {
  std::vector<double> mean;
  std::vector<double> se;  // standard error of each component
};

// Score-function oracle: mean of (U / eps) (L(Q(W + eps U)) - L(Q(W))) over
// `samples` draws. The baseline term has zero mean and only cuts variance.
Estimate oracle_grad_smoothed(const SmoothedObjective& obj, std::span<const double> w,
                              std::size_t samples, std::uint64_t seed,
                              std::uint64_t stream = 0);

// Two-point oracle: mean of (U / 2eps) (L(Q(W + eps U)) - L(Q(W - eps U))).
Estimate antithetic_oracle(const SmoothedObjective& obj, std::span<const double> w,
                           std::size_t samples, std::uint64_t seed, std::uint64_t stream = 0);

// Closed-form gradient of f_eps for the separable built-in losses. For a
// per-coordinate term h(Q(z)) each threshold theta contributes
// (h(right) - h(left)) phi((theta - w) / eps) / eps.
std::vector<double> exact_grad_smoothed(const SmoothedObjective& obj, std::span<const double> w);

// Mean and standard error of the zo module's estimator over `trials`
// independent steps with `directions` directions each.
Estimate zo_estimate_mean(const SmoothedObjective& obj, std::span<const double> w,
                          int directions, std::size_t trials, std::uint64_t seed,
                          bool drop_difference_scale = false);

// Largest |L(z) - L(z')| / |z - z'| over `samples` random pairs in the box
// [-radius, radius]^d.
double max_lipschitz_ratio(const SmoothedObjective& obj, double radius, std::size_t samples,
                           std::uint64_t seed);

// (1/q) [2 G^2 d (d + 2) + G^2 delta^2 d^2 / (2 eps^2)].
double mse_bound(const SmoothedObjective& obj, int directions);

struct MseCheck {
  double mse;
  double se;
  double bound;
  bool pass;
};

// Empirical E|g - grad f_eps|^2 of the zo estimator against the closed-form
// gradient (built-in losses) or an oracle with `reference_samples` draws.
MseCheck check_mse_bound(const SmoothedObjective& obj, std::span<const double> w, int directions,
                         std::size_t trials, std::uint64_t seed,
                         std::size_t reference_samples = 1000000);

double normal_pdf(double t);
// 1 - Phi(t) through erfc, accurate in the far tail.
double normal_upper_tail(double t);

struct TailValues {
  double abs_moment;     // E |U| 1{|U| >= t}
  double second_moment;  // E U^2 1{|U| >= t}
  double probability;    // P(|U| >= t)
};

struct TailIdentities {
  TailValues analytic;
  TailValues quadrature;
  double max_abs_diff;
};

// Closed forms 2 phi(t), 2 (t phi(t) + 1 - Phi(t)), 2 (1 - Phi(t)) against
// adaptive Gauss-Kronrod quadrature over [t, inf).
TailIdentities gaussian_tail_identities(double t);

// 1 - Phi(t) <= phi(t) / t for t > 0.
bool mills_bound_holds(double t);

// (G / sqrt(2 pi)) (delta/eps + 2t + 2/t) exp(-t^2 / 2).
double grad_decay_bound(double g, double delta, double epsilon, double t);

// A 1-D point at normalized distance t from the threshold delta / 2, inside
// the cell centred at 0. Throws InvalidArgument unless 0 <= t*eps <= delta/2.
double point_at_distance(double delta, double epsilon, double t);

struct SteBiasCheck {
  double ste_mean;  // E g_STE, exactly G
  double oracle;    // MC estimate of f_eps'
  double se;
  double bias;      // |ste_mean - oracle|
  double lower_bound;
  // Empty when the bound is vacuous (non-positive).
  std::optional<bool> pass;
};

SteBiasCheck check_ste_bias(double g, double delta, double epsilon, double t,
                            std::size_t samples, std::uint64_t seed);

// Smallest t on (0, t_max] with grad_decay_bound(1, delta, eps, t) <= target,
// refined by bisection. Throws NumericError if none exists.
double threshold_for_bias(double delta, double epsilon, double target, double t_max = 10.0);

struct DecayRow {
  double t;
  double norm;
  double se;
  double bound;
  bool pass;
};

std::vector<DecayRow> check_grad_decay(double g, double delta, double epsilon,
                                       const std::vector<double>& t_grid, std::size_t samples,
                                       std::uint64_t seed);

struct ReportRow {
  std::string check;
  std::string config;
  double measured;
  double bound;
  double se;
  std::optional<bool> pass;
};

struct VerifyOptions {
  std::size_t estimator_samples = 100000;
  std::size_t tail_samples = 10000000;
  std::uint64_t seed = 0;
  // Mutation-test hook forwarded to the zo estimator.
  bool broken_estimator = false;

  static VerifyOptions quick() { return {20000, 1000000, 0, false}; }
};

// Every check above on its default configuration.
std::vector<ReportRow> run_verification(const VerifyOptions& options);

void write_report_text(std::ostream& out, const std::vector<ReportRow>& rows);
// Header check,config,measured,bound,se,pass.
void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows);

}  // namespace zoqat::theory

#endif  // ZOQAT_THEORY_THEORY_H_
