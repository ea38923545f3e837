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

#include "zoqat/theory/theory.h"

#include <algorithm>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "zoqat/error.h"
#include "zoqat/numerics/rng.h"
#include "zoqat/quant/quantizer.h"
#include "zoqat/zo/zo.h"

namespace zoqat::theory {
namespace {

constexpr double kInvSqrt2Pi = 0.398942280401432677939946059934;

// Componentwise running mean and variance.
class Welford {
 public:
  explicit Welford(std::size_t dim) : mean_(dim, 0.0), m2_(dim, 0.0) {}

  void add(std::span<const double> x) {
    ++n_;
    for (std::size_t j = 0; j < mean_.size(); ++j) {
      const double d = x[j] - mean_[j];
      mean_[j] += d / static_cast<double>(n_);
      m2_[j] += d * (x[j] - mean_[j]);
    }
  }

  Estimate estimate() const {
    Estimate e{mean_, std::vector<double>(mean_.size(), 0.0)};
    if (n_ > 1) {
      for (std::size_t j = 0; j < mean_.size(); ++j) {
        e.se[j] = std::sqrt(m2_[j] / static_cast<double>(n_ - 1) / static_cast<double>(n_));
      }
    }
    return e;
  }

 private:
  std::size_t n_ = 0;
  std::vector<double> mean_, m2_;
};

void check_point(const SmoothedObjective& obj, std::span<const double> w) {
  obj.validate();
  if (w.size() != obj.dim) {
    throw DimensionError("point has " + std::to_string(w.size()) + " coordinates, objective has " +
                         std::to_string(obj.dim));
  }
}

// Shared loop of the two oracles: `kernel(u, z)` returns the scalar that
// multiplies u.
template <typename Kernel>
Estimate mc_oracle(const SmoothedObjective& obj, std::span<const double> w, std::size_t samples,
                   std::uint64_t seed, std::uint64_t stream, Kernel kernel) {
  check_point(obj, w);
  if (samples < 2) throw InvalidArgument("oracle needs at least 2 samples");
  numerics::RngStream rng(seed, stream);
  std::vector<double> u(obj.dim), sample(obj.dim);
  Welford acc(obj.dim);
  for (std::size_t m = 0; m < samples; ++m) {
    rng.fill_gaussian(u);
    const double c = kernel(u);
    for (std::size_t j = 0; j < obj.dim; ++j) sample[j] = c * u[j];
    acc.add(sample);
  }
  return acc.estimate();
}

std::vector<double> zo_sample(const SmoothedObjective& obj, std::span<const double> w,
                              const zo::ZoConfig& cfg, std::size_t trial) {
  std::vector<double> x(w.begin(), w.end());
  model::ParamView view;
  view.slices.push_back({model::ParamGroupLabel::kWeights, "w", x});
  const zo::GradientScale g = zo::zo_gradient_scale([&] { return obj.loss(x); }, view, cfg, trial);
  std::vector<double> est(obj.dim, 0.0);
  for (const zo::Direction& d : g.directions) {
    numerics::RngStream rng(cfg.seed, d.stream);
    for (double& e : est) e += d.coeff * rng.next_gaussian();
  }
  for (double& e : est) e /= static_cast<double>(g.directions.size());
  return est;
}

std::string fmt(double v) {
  std::ostringstream s;
  s << std::setprecision(6) << v;
  return s.str();
}

}  // namespace

double SmoothedObjective::quantize(double z) const {
  return delta == 0.0 ? z : delta * quant::round_half_even(z / delta);
}

double SmoothedObjective::base_loss(std::span<const double> z) const {
  switch (kind) {
    case BaseLoss::kLinear: {
      if (direction.empty()) return lipschitz * z[0];
      double dot = 0.0, nrm = 0.0;
      for (std::size_t j = 0; j < dim; ++j) {
        dot += direction[j] * z[j];
        nrm += direction[j] * direction[j];
      }
      return lipschitz * dot / std::sqrt(nrm);
    }
    case BaseLoss::kQuadratic: {
      double s = 0.0;
      for (std::size_t j = 0; j < dim; ++j) s += 0.5 * z[j] * z[j];
      return s;
    }
    case BaseLoss::kCustom:
      return custom(z);
  }
  return 0.0;
}

double SmoothedObjective::loss(std::span<const double> w) const {
  if (delta == 0.0) return base_loss(w);
  std::vector<double> q(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) q[j] = quantize(w[j]);
  return base_loss(q);
}

void SmoothedObjective::validate() const {
  if (dim == 0) throw InvalidArgument("objective dimension must be positive");
  if (!(lipschitz > 0.0)) throw InvalidArgument("Lipschitz constant must be positive");
  if (!(delta >= 0.0)) throw InvalidArgument("quantizer step must be >= 0");
  if (!(epsilon > 0.0)) throw InvalidArgument("smoothing radius must be positive");
  if (!direction.empty()) {
    if (direction.size() != dim) throw InvalidArgument("direction length must equal dim");
    double n = 0.0;
    for (double a : direction) n += a * a;
    if (!(n > 0.0)) throw InvalidArgument("direction must be nonzero");
  }
  if (kind == BaseLoss::kCustom && !custom) throw InvalidArgument("custom loss needs a callback");
}

Estimate oracle_grad_smoothed(const SmoothedObjective& obj, std::span<const double> w,
                              std::size_t samples, std::uint64_t seed, std::uint64_t stream) {
  const double base = obj.loss(w);
  std::vector<double> z(w.size());
  return mc_oracle(obj, w, samples, seed, stream, [&](std::span<const double> u) {
    for (std::size_t j = 0; j < z.size(); ++j) z[j] = w[j] + obj.epsilon * u[j];
    return (obj.loss(z) - base) / obj.epsilon;
  });
}

Estimate antithetic_oracle(const SmoothedObjective& obj, std::span<const double> w,
                           std::size_t samples, std::uint64_t seed, std::uint64_t stream) {
  std::vector<double> zp(w.size()), zm(w.size());
  return mc_oracle(obj, w, samples, seed, stream, [&](std::span<const double> u) {
    for (std::size_t j = 0; j < zp.size(); ++j) {
      zp[j] = w[j] + obj.epsilon * u[j];
      zm[j] = w[j] - obj.epsilon * u[j];
    }
    return (obj.loss(zp) - obj.loss(zm)) / (2.0 * obj.epsilon);
  });
}

std::vector<double> exact_grad_smoothed(const SmoothedObjective& obj, std::span<const double> w) {
  check_point(obj, w);
  if (obj.kind == BaseLoss::kCustom) {
    throw InvalidArgument("no closed-form smoothed gradient for a custom loss");
  }
  std::vector<double> a(obj.dim, 0.0);
  if (obj.kind == BaseLoss::kLinear) {
    if (obj.direction.empty()) {
      a[0] = 1.0;
    } else {
      double n = 0.0;
      for (double v : obj.direction) n += v * v;
      for (std::size_t j = 0; j < obj.dim; ++j) a[j] = obj.direction[j] / std::sqrt(n);
    }
  }
  const auto h = [&](std::size_t j, double q) {
    return obj.kind == BaseLoss::kLinear ? obj.lipschitz * a[j] * q : 0.5 * q * q;
  };
  std::vector<double> g(obj.dim, 0.0);
  for (std::size_t j = 0; j < obj.dim; ++j) {
    if (obj.delta == 0.0) {
      g[j] = obj.kind == BaseLoss::kLinear ? obj.lipschitz * a[j] : w[j];
      continue;
    }
    // Thresholds farther than 40 eps contribute below double precision.
    const double reach = 40.0 * obj.epsilon;
    const auto k_lo = static_cast<long long>(std::floor((w[j] - reach) / obj.delta)) - 1;
    const auto k_hi = static_cast<long long>(std::ceil((w[j] + reach) / obj.delta)) + 1;
    double s = 0.0;
    for (long long k = k_lo; k <= k_hi; ++k) {
      const double theta = obj.delta * (static_cast<double>(k) + 0.5);
      const double jump = h(j, obj.delta * static_cast<double>(k + 1)) -
                          h(j, obj.delta * static_cast<double>(k));
      s += jump * normal_pdf((theta - w[j]) / obj.epsilon);
    }
    g[j] = s / obj.epsilon;
  }
  return g;
}

Estimate zo_estimate_mean(const SmoothedObjective& obj, std::span<const double> w,
                          int directions, std::size_t trials, std::uint64_t seed,
                          bool drop_difference_scale) {
  check_point(obj, w);
  zo::ZoConfig cfg;
  cfg.epsilon = obj.epsilon;
  cfg.directions = directions;
  cfg.seed = seed;
  cfg.drop_difference_scale = drop_difference_scale;
  Welford acc(obj.dim);
  for (std::size_t t = 0; t < trials; ++t) acc.add(zo_sample(obj, w, cfg, t));
  return acc.estimate();
}

double max_lipschitz_ratio(const SmoothedObjective& obj, double radius, std::size_t samples,
                           std::uint64_t seed) {
  obj.validate();
  numerics::RngStream rng(seed, 0x11);
  std::vector<double> z(obj.dim), z2(obj.dim);
  double worst = 0.0;
  for (std::size_t m = 0; m < samples; ++m) {
    double dist = 0.0;
    for (std::size_t j = 0; j < obj.dim; ++j) {
      z[j] = radius * (2.0 * rng.next_uniform() - 1.0);
      z2[j] = radius * (2.0 * rng.next_uniform() - 1.0);
      dist += (z[j] - z2[j]) * (z[j] - z2[j]);
    }
    if (dist == 0.0) continue;
    worst = std::max(worst, std::abs(obj.base_loss(z) - obj.base_loss(z2)) / std::sqrt(dist));
  }
  return worst;
}

double mse_bound(const SmoothedObjective& obj, int directions) {
  const double g2 = obj.lipschitz * obj.lipschitz;
  const double d = static_cast<double>(obj.dim);
  const double r = obj.delta / obj.epsilon;
  return (2.0 * g2 * d * (d + 2.0) + g2 * r * r * d * d / 2.0) / static_cast<double>(directions);
}

MseCheck check_mse_bound(const SmoothedObjective& obj, std::span<const double> w, int directions,
                         std::size_t trials, std::uint64_t seed,
                         std::size_t reference_samples) {
  check_point(obj, w);
  const std::vector<double> ref = obj.kind == BaseLoss::kCustom
                                      ? oracle_grad_smoothed(obj, w, reference_samples, seed,
                                                             std::uint64_t{1} << 62)
                                            .mean
                                      : exact_grad_smoothed(obj, w);
  zo::ZoConfig cfg;
  cfg.epsilon = obj.epsilon;
  cfg.directions = directions;
  cfg.seed = seed;
  Welford acc(1);
  for (std::size_t t = 0; t < trials; ++t) {
    const std::vector<double> g = zo_sample(obj, w, cfg, t);
    double e = 0.0;
    for (std::size_t j = 0; j < obj.dim; ++j) e += (g[j] - ref[j]) * (g[j] - ref[j]);
    acc.add(std::span<const double>(&e, 1));
  }
  const Estimate est = acc.estimate();
  const double bound = mse_bound(obj, directions);
  return {est.mean[0], est.se[0], bound, est.mean[0] <= bound};
}

double normal_pdf(double t) { return kInvSqrt2Pi * std::exp(-0.5 * t * t); }

double normal_upper_tail(double t) { return 0.5 * std::erfc(t / std::sqrt(2.0)); }

TailIdentities gaussian_tail_identities(double t) {
  if (!(t >= 0.0)) throw InvalidArgument("tail threshold must be >= 0");
  const double phi = normal_pdf(t), tail = normal_upper_tail(t);
  TailIdentities r;
  r.analytic = {2.0 * phi, 2.0 * (t * phi + tail), 2.0 * tail};
  using boost::math::quadrature::gauss_kronrod;
  const double inf = std::numeric_limits<double>::infinity();
  const auto integrate = [&](auto f) {
    return 2.0 * gauss_kronrod<double, 61>::integrate(f, t, inf, 15, 1e-13);
  };
  r.quadrature = {integrate([](double u) { return u * normal_pdf(u); }),
                  integrate([](double u) { return u * u * normal_pdf(u); }),
                  integrate([](double u) { return normal_pdf(u); })};
  r.max_abs_diff = std::max({std::abs(r.analytic.abs_moment - r.quadrature.abs_moment),
                             std::abs(r.analytic.second_moment - r.quadrature.second_moment),
                             std::abs(r.analytic.probability - r.quadrature.probability)});
  return r;
}

bool mills_bound_holds(double t) {
  if (!(t > 0.0)) throw InvalidArgument("Mills' bound needs t > 0");
  return normal_upper_tail(t) <= normal_pdf(t) / t;
}

double grad_decay_bound(double g, double delta, double epsilon, double t) {
  return g * kInvSqrt2Pi * (delta / epsilon + 2.0 * t + 2.0 / t) * std::exp(-0.5 * t * t);
}

double point_at_distance(double delta, double epsilon, double t) {
  const double r = t * epsilon;
  if (!(t >= 0.0) || !(delta > 0.0) || r > delta / 2.0) {
    throw InvalidArgument("normalized distance " + fmt(t) + " does not fit in a cell of width " +
                          fmt(delta / epsilon) + " eps");
  }
  return delta / 2.0 - r;
}

SteBiasCheck check_ste_bias(double g, double delta, double epsilon, double t,
                            std::size_t samples, std::uint64_t seed) {
  const double w = point_at_distance(delta, epsilon, t);
  SmoothedObjective obj;
  obj.lipschitz = g;
  obj.delta = delta;
  obj.epsilon = epsilon;
  const Estimate o = oracle_grad_smoothed(obj, std::span<const double>(&w, 1), samples, seed);
  SteBiasCheck r;
  // The identity surrogate passes L's slope straight through.
  r.ste_mean = g;
  r.oracle = o.mean[0];
  r.se = o.se[0];
  r.bias = std::abs(r.ste_mean - r.oracle);
  r.lower_bound = t > 0.0 ? g - grad_decay_bound(g, delta, epsilon, t)
                          : -std::numeric_limits<double>::infinity();
  if (r.lower_bound > 0.0) r.pass = r.bias >= r.lower_bound - 3.0 * r.se;
  return r;
}

double threshold_for_bias(double delta, double epsilon, double target, double t_max) {
  const auto h = [&](double t) { return grad_decay_bound(1.0, delta, epsilon, t) - target; };
  constexpr double kGrid = 1e-3;
  double prev = kGrid;
  if (h(prev) <= 0.0) return prev;
  for (double t = 2 * kGrid; t <= t_max; t += kGrid) {
    if (h(t) <= 0.0) {
      double lo = prev, hi = t;
      for (int i = 0; i < 100 && hi - lo > 1e-15 * hi; ++i) {
        const double mid = 0.5 * (lo + hi);
        (h(mid) <= 0.0 ? hi : lo) = mid;
      }
      return hi;
    }
    prev = t;
  }
  throw NumericError("no t in (0, " + fmt(t_max) + "] meets the bias target " + fmt(target));
}

std::vector<DecayRow> check_grad_decay(double g, double delta, double epsilon,
                                       const std::vector<double>& t_grid, std::size_t samples,
                                       std::uint64_t seed) {
  SmoothedObjective obj;
  obj.lipschitz = g;
  obj.delta = delta;
  obj.epsilon = epsilon;
  std::vector<DecayRow> rows;
  for (std::size_t i = 0; i < t_grid.size(); ++i) {
    const double t = t_grid[i];
    if (!(t > 0.0 && t <= 10.0)) throw InvalidArgument("decay grid must lie in (0, 10]");
    const double w = point_at_distance(delta, epsilon, t);
    const Estimate o = oracle_grad_smoothed(obj, std::span<const double>(&w, 1), samples, seed, i);
    const double bound = grad_decay_bound(g, delta, epsilon, t);
    const double norm = std::abs(o.mean[0]);
    rows.push_back({t, norm, o.se[0], bound, norm <= bound + 3.0 * o.se[0]});
  }
  return rows;
}

std::vector<ReportRow> run_verification(const VerifyOptions& opt) {
  std::vector<ReportRow> rows;
  const std::uint64_t seed = opt.seed;

  for (double t : {0.0, 0.5, 1.0, 2.0, 5.0}) {
    const TailIdentities ti = gaussian_tail_identities(t);
    rows.push_back({"tail_identities", "t=" + fmt(t), ti.max_abs_diff, 1e-10, 0.0,
                    ti.max_abs_diff <= 1e-10});
  }
  {
    double worst = -std::numeric_limits<double>::infinity();
    bool ok = true;
    for (int i = 1; i <= 1000; ++i) {
      const double t = 0.01 * i;
      ok = ok && mills_bound_holds(t);
      worst = std::max(worst, normal_upper_tail(t) - normal_pdf(t) / t);
    }
    rows.push_back({"mills_bound", "t in (0,10], 1000 points", worst, 0.0, 0.0, ok});
  }

  // Estimator unbiasedness and oracle self-consistency, d = 8.
  std::vector<double> w8(8);
  numerics::RngStream wr(seed, 0x77);
  for (double& v : w8) v = 0.3 * wr.next_gaussian();
  for (BaseLoss kind : {BaseLoss::kLinear, BaseLoss::kQuadratic}) {
    for (double delta : {0.0, 0.1}) {
      SmoothedObjective obj;
      obj.kind = kind;
      obj.dim = 8;
      obj.delta = delta;
      obj.epsilon = 1e-2;
      obj.direction.assign(8, 1.0);
      const Estimate zo_est =
          zo_estimate_mean(obj, w8, 1, opt.estimator_samples, seed, opt.broken_estimator);
      const Estimate orc = oracle_grad_smoothed(obj, w8, opt.estimator_samples, seed + 1);
      const Estimate anti = antithetic_oracle(obj, w8, opt.estimator_samples, seed + 2);
      double z_zo = 0.0, z_self = 0.0;
      for (std::size_t j = 0; j < 8; ++j) {
        z_zo = std::max(z_zo, std::abs(zo_est.mean[j] - orc.mean[j]) /
                                  std::hypot(zo_est.se[j], orc.se[j]));
        z_self = std::max(z_self, std::abs(anti.mean[j] - orc.mean[j]) /
                                      std::hypot(anti.se[j], orc.se[j]));
      }
      const std::string cfg = std::string(kind == BaseLoss::kLinear ? "linear" : "quadratic") +
                              " d=8 delta=" + fmt(delta) + " eps=0.01";
      rows.push_back({"zo_unbiased", cfg, z_zo, 3.0, 1.0, z_zo <= 3.0});
      rows.push_back({"oracle_consistency", cfg, z_self, 3.0, 1.0, z_self <= 3.0});
    }
  }

  for (std::size_t d : {1, 2, 4}) {
    SmoothedObjective obj;
    obj.dim = d;
    obj.delta = 0.1;
    obj.epsilon = 1e-2;
    std::vector<double> w(d);
    for (double& v : w) v = 0.3 * wr.next_gaussian();
    for (int q : {1, 4, 16}) {
      const MseCheck m = check_mse_bound(obj, w, q, opt.estimator_samples / 10, seed + 3);
      rows.push_back({"mse_bound", "linear d=" + std::to_string(d) + " q=" + std::to_string(q) +
                                       " delta=0.1 eps=0.01",
                      m.mse, m.bound, m.se, m.pass});
    }
  }

  {
    const SteBiasCheck s = check_ste_bias(1.0, 0.1, 0.01, 5.0, opt.tail_samples, seed + 4);
    rows.push_back({"ste_bias", "G=1 delta=0.1 eps=0.01 t=5", s.bias, s.lower_bound, s.se,
                    s.pass});
    const SteBiasCheck s0 = check_ste_bias(1.0, 0.1, 0.01, 0.0, opt.estimator_samples, seed + 5);
    rows.push_back({"ste_bias", "G=1 delta=0.1 eps=0.01 t=0 (bound vacuous)", s0.bias,
                    s0.lower_bound, s0.se, s0.pass});
    const double t90 = threshold_for_bias(0.1, 0.01, 0.1);
    const SteBiasCheck s90 = check_ste_bias(1.0, 0.1, 0.01, t90, opt.tail_samples, seed + 6);
    rows.push_back({"ste_bias", "G=1 delta=0.1 eps=0.01 t=" + fmt(t90) + " (bias >= 0.9 G)",
                    s90.bias, 0.9, s90.se, s90.bias >= 0.9 - 3.0 * s90.se});
  }

  for (const DecayRow& r :
       check_grad_decay(1.0, 0.1, 0.01, {0.1, 1.0, 2.0, 3.0, 4.0, 5.0}, opt.tail_samples,
                        seed + 7)) {
    rows.push_back({"grad_decay", "G=1 delta=0.1 eps=0.01 t=" + fmt(r.t), r.norm, r.bound, r.se,
                    r.pass});
  }
  return rows;
}

void write_report_text(std::ostream& out, const std::vector<ReportRow>& rows) {
  for (const ReportRow& r : rows) {
    const char* verdict = !r.pass ? "INFO" : (*r.pass ? "PASS" : "FAIL");
    out << verdict << "  " << r.check << "  [" << r.config << "]  measured=" << fmt(r.measured)
        << " bound=" << fmt(r.bound) << " se=" << fmt(r.se);
    if (r.pass && !*r.pass) out << " margin=" << fmt(r.measured - r.bound);
    out << '\n';
  }
}

void write_report_csv(std::ostream& out, const std::vector<ReportRow>& rows) {
  out << "check,config,measured,bound,se,pass\n" << std::setprecision(17);
  for (const ReportRow& r : rows) {
    out << r.check << ",\"" << r.config << "\"," << r.measured << ',' << r.bound << ',' << r.se
        << ',' << (!r.pass ? "na" : (*r.pass ? "1" : "0")) << '\n';
  }
}

}  // namespace zoqat::theory
