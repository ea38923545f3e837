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

// Acceptance suite: one PASS/FAIL line per criterion. Arguments select
// criteria by number; none runs all eleven.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <iterator>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "zoqat/calibration/calibration.h"
#include "zoqat/cli/app.h"
#include "zoqat/cli/checkpoint.h"
#include "zoqat/cli/config.h"
#include "zoqat/cli/corpus.h"
#include "zoqat/diagnostics/diagnostics.h"
#include "zoqat/model/model.h"
#include "zoqat/numerics/stats.h"
#include "zoqat/numerics/tensor.h"
#include "zoqat/quant/quantizer.h"
#include "zoqat/smoothing/smoothing.h"
#include "zoqat/theory/theory.h"
#include "zoqat/zo/zo.h"

namespace {

namespace fs = std::filesystem;
using namespace zoqat;
using numerics::Tensor;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [violated: " << what << "]";
    }
  }
};

fs::path work_dir(const std::string& name) {
  const fs::path p = fs::path(ZOQAT_ACCEPTANCE_WORKDIR) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string read_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

// ---------------------------------------------------------------------------
// 1. Two-point estimator against the score-function oracle.

theory::SmoothedObjective toy(theory::BaseLoss kind, std::size_t d, double delta) {
  theory::SmoothedObjective obj;
  obj.kind = kind;
  obj.dim = d;
  obj.lipschitz = 1.0;
  obj.delta = delta;
  obj.epsilon = 1e-2;
  if (kind == theory::BaseLoss::kLinear) {
    obj.direction.resize(d);
    for (std::size_t i = 0; i < d; ++i) obj.direction[i] = 1.0 + static_cast<double>(i);
  }
  return obj;
}

// Coordinates within a few epsilon of the 0.05 threshold of a 0.1 grid.
std::vector<double> near_threshold_point(std::size_t d) {
  std::vector<double> w(d);
  for (std::size_t i = 0; i < d; ++i) w[i] = 0.05 + 0.004 * (static_cast<double>(i) - 4.0);
  return w;
}

void criterion1(Outcome& o) {
  const auto t0 = Clock::now();
  constexpr std::size_t kSamples = 100000;
  double worst = 0.0;
  for (const auto kind : {theory::BaseLoss::kLinear, theory::BaseLoss::kQuadratic}) {
    for (const double delta : {0.0, 0.1}) {
      const auto obj = toy(kind, 8, delta);
      const auto w = near_threshold_point(8);
      const auto zo = theory::zo_estimate_mean(obj, w, 1, kSamples, 101);
      const auto oracle = theory::oracle_grad_smoothed(obj, w, kSamples, 202);
      double z_max = 0.0;
      for (std::size_t i = 0; i < 8; ++i) {
        const double se = std::hypot(zo.se[i], oracle.se[i]);
        z_max = std::max(z_max, std::abs(zo.mean[i] - oracle.mean[i]) / se);
      }
      worst = std::max(worst, z_max);
      o.detail << " " << (kind == theory::BaseLoss::kLinear ? "lin" : "quad") << "/D=" << delta
               << ":maxz=" << z_max;
      o.require(z_max <= 3.0, "componentwise |zo - oracle| <= 3 combined SE");
    }
  }
  const double secs = seconds_since(t0);
  o.detail << " runtime=" << secs << "s";
  o.require(secs <= 60.0, "runtime <= 60 s");
}

// ---------------------------------------------------------------------------
// 2. MSE bound over the (d, q, Delta, eps) grid and the 1/q slope.

std::vector<double> slope_point(std::size_t d) {
  const std::vector<double> base = {0.148, -0.262, 0.351, 0.046};
  return {base.begin(), base.begin() + static_cast<std::ptrdiff_t>(d)};
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]);
    my += std::log(y[i]);
  }
  mx /= static_cast<double>(x.size());
  my /= static_cast<double>(x.size());
  double sxy = 0, sxx = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (std::log(x[i]) - mx) * (std::log(y[i]) - my);
    sxx += (std::log(x[i]) - mx) * (std::log(x[i]) - mx);
  }
  return sxy / sxx;
}

void criterion2(Outcome& o) {
  const auto t0 = Clock::now();
  std::size_t checked = 0;
  double worst_ratio = 0.0;
  for (const auto kind : {theory::BaseLoss::kLinear, theory::BaseLoss::kQuadratic}) {
    for (const std::size_t d : {1u, 2u, 4u}) {
      for (const double delta : {0.0, 0.1}) {
        for (const double eps : {1e-2, 5e-2}) {
          for (const int q : {1, 4, 16}) {
            auto obj = toy(kind, d, delta);
            obj.epsilon = eps;
            const auto r = theory::check_mse_bound(obj, slope_point(d), q, 10000, 7 + d + q);
            // The bound must be recomputed independently of the module.
            const double g2 = obj.lipschitz * obj.lipschitz;
            const double dd = static_cast<double>(d);
            const double bound =
                (2 * g2 * dd * (dd + 2) + g2 * delta * delta * dd * dd / (2 * eps * eps)) / q;
            o.require(std::abs(bound - r.bound) <= 1e-12 * bound, "bound formula");
            o.require(r.mse <= bound, "empirical MSE <= bound");
            worst_ratio = std::max(worst_ratio, r.mse / bound);
            ++checked;
          }
        }
      }
    }
  }
  o.detail << " grid=" << checked << " worst_mse/bound=" << worst_ratio;
  for (const std::size_t d : {1u, 2u, 4u}) {
    for (const double delta : {0.0, 0.1}) {
      const auto obj = toy(theory::BaseLoss::kQuadratic, d, delta);
      std::vector<double> qs, mses;
      for (const int q : {1, 2, 4, 8, 16}) {
        const auto r = theory::check_mse_bound(obj, slope_point(d), q, 20000, 300 + q);
        qs.push_back(q);
        mses.push_back(r.mse);
      }
      const double slope = loglog_slope(qs, mses);
      o.detail << " slope(d=" << d << ",D=" << delta << ")=" << slope;
      o.require(std::abs(slope + 1.0) <= 0.15, "log-log slope in -1 +/- 0.15");
    }
  }
  const double secs = seconds_since(t0);
  o.detail << " runtime=" << secs << "s";
  o.require(secs <= 120.0, "runtime <= 120 s");
}

// ---------------------------------------------------------------------------
// 3. Gaussian tail identities, with a composite Simpson rule as a second
// quadrature route.

template <typename F>
double simpson_tail(F f, double t) {
  const double hi = t + 40.0;
  const int n = 400000;
  const double h = (hi - t) / n;
  double s = f(t) + f(hi);
  for (int i = 1; i < n; ++i) s += f(t + i * h) * (i % 2 ? 4.0 : 2.0);
  return s * h / 3.0;
}

void criterion3(Outcome& o) {
  const auto pdf = [](double u) { return std::exp(-0.5 * u * u) / std::sqrt(2 * std::numbers::pi); };
  double worst_module = 0.0, worst_simpson = 0.0;
  for (const double t : {0.0, 0.5, 1.0, 2.0, 5.0}) {
    const auto id = theory::gaussian_tail_identities(t);
    worst_module = std::max(worst_module, id.max_abs_diff);
    const double abs_m = 2 * simpson_tail([&](double u) { return u * pdf(u); }, t);
    const double sec_m = 2 * simpson_tail([&](double u) { return u * u * pdf(u); }, t);
    const double prob = 2 * simpson_tail(pdf, t);
    worst_simpson = std::max({worst_simpson, std::abs(abs_m - id.analytic.abs_moment),
                              std::abs(sec_m - id.analytic.second_moment),
                              std::abs(prob - id.analytic.probability)});
  }
  o.detail << " analytic_vs_gk=" << worst_module << " analytic_vs_simpson=" << worst_simpson;
  o.require(worst_module <= 1e-10, "analytic vs Gauss-Kronrod <= 1e-10");
  o.require(worst_simpson <= 1e-10, "analytic vs Simpson <= 1e-10");

  std::size_t points = 0, violations = 0;
  double worst_gap = -std::numeric_limits<double>::infinity();
  for (int i = 1; i <= 100000; ++i) {
    const double t = 10.0 * i / 100000.0;
    ++points;
    if (!theory::mills_bound_holds(t)) ++violations;
    const double tail = 0.5 * std::erfc(t / std::sqrt(2.0));
    worst_gap = std::max(worst_gap, tail - pdf(t) / t);
  }
  o.detail << " mills_points=" << points << " violations=" << violations
           << " max(tail-pdf/t)=" << worst_gap;
  o.require(violations == 0 && worst_gap <= 0.0, "Mills' bound on (0, 10]");
}

// ---------------------------------------------------------------------------
// 4. STE bias at t = 5.

void criterion4(Outcome& o) {
  const auto t0 = Clock::now();
  const double g = 1.0, eps = 0.01, delta = 10 * eps, t = 5.0;
  const auto r = theory::check_ste_bias(g, delta, eps, t, 10000000, 44);
  const double bound = theory::grad_decay_bound(g, delta, eps, t);
  const double independent_bound =
      g / std::sqrt(2 * std::numbers::pi) * (delta / eps + 2 * t + 2 / t) * std::exp(-t * t / 2);
  // Closed form of f_eps' for the 1-D linear loss: a jump of G*delta at every
  // threshold, smeared by the Gaussian density.
  const double w = theory::point_at_distance(delta, eps, t);
  double exact = 0.0;
  for (int k = -50; k <= 50; ++k) {
    const double theta = delta * (k + 0.5);
    const double z = (theta - w) / eps;
    exact += g * delta * std::exp(-0.5 * z * z) / (std::sqrt(2 * std::numbers::pi) * eps);
  }
  o.detail << " E[g_ste]=" << r.ste_mean << " mc_grad=" << r.oracle << " se=" << r.se
           << " exact_grad=" << exact << " bias=" << r.bias << " decay_bound=" << bound;
  o.require(r.ste_mean == g, "E g_STE == G exactly");
  o.require(r.bias >= 0.99, "bias >= 0.99");
  o.require(std::abs(bound - independent_bound) <= 1e-15, "decay bound formula");
  o.require(std::abs(r.oracle) <= bound + 3 * r.se, "MC gradient below decay bound + 3 SE");
  o.require(std::abs(r.oracle - exact) <= 4 * r.se + 1e-12, "MC gradient matches closed form");
  const double secs = seconds_since(t0);
  o.detail << " runtime=" << secs << "s";
  o.require(secs <= 120.0, "runtime <= 120 s");
}

// ---------------------------------------------------------------------------
// 5. Smoothing equivalence in full precision.

void criterion5(Outcome& o) {
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<std::size_t> dim(1, 12);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> log_s(std::log(0.1), std::log(10.0));
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t t = dim(gen), d1 = dim(gen), d2 = dim(gen);
    Tensor x({t, d1}), w({d1, d2}), b({1, d2});
    for (double& v : x.storage()) v = n01(gen);
    for (double& v : w.storage()) v = n01(gen);
    for (double& v : b.storage()) v = n01(gen);
    smoothing::SmoothingParams p = smoothing::SmoothingParams::identity(d1);
    for (std::size_t j = 0; j < d1; ++j) {
      p.scale[j] = std::exp(log_s(gen));
      p.shift[j] = n01(gen);
    }
    const auto s = smoothing::apply_smoothing(x, w, b, p);
    // Plain route computed here by explicit loops.
    for (std::size_t r = 0; r < t; ++r) {
      for (std::size_t c = 0; c < d2; ++c) {
        double plain = b(0, c), smoothed = s.b(0, c);
        for (std::size_t j = 0; j < d1; ++j) {
          plain += x(r, j) * w(j, c);
          smoothed += s.x(r, j) * s.w(j, c);
        }
        worst = std::max(worst, std::abs(plain - smoothed));
      }
    }
  }
  o.detail << " instances=1000 max_inf_norm=" << worst;
  o.require(worst <= 1e-10, "||smoothed - plain||_inf <= 1e-10");
}

// ---------------------------------------------------------------------------
// 6. Quantizer invariants against a scalar nearest-code oracle.

// Nearest representable value step * (c - z) over integer codes c in [lo, hi];
// exact ties go to the even offset c - z.
double oracle_quant(double x, double step, double zero, double lo, double hi) {
  double best = 0.0, best_dist = std::numeric_limits<double>::infinity(), best_code = lo;
  for (double c = lo; c <= hi; c += 1.0) {
    const double v = step * (c - zero);
    const double dist = std::abs(x - v);
    const bool even = std::fmod(std::abs(c - zero), 2.0) == 0.0;
    if (dist < best_dist || (dist == best_dist && even)) {
      best = v;
      best_dist = dist;
      best_code = c;
    }
  }
  (void)best_code;
  return best;
}

void criterion6(Outcome& o) {
  using quant::QuantSpec;
  using quant::QuantState;
  using quant::Role;
  using quant::Scheme;
  std::size_t oracle_mismatch = 0, roundtrip_fail = 0, idem_fail = 0, mono_fail = 0,
              gran_fail = 0, elements = 0;

  // Exhaustive 2- and 3-bit grids.
  std::size_t grid_cases = 0, grid_mismatch = 0;
  for (const int bits : {2, 3}) {
    for (const auto scheme : {Scheme::kSymmetric, Scheme::kAsymmetric}) {
      QuantSpec spec{bits, scheme, numerics::Granularity::per_tensor(), Role::kWeight};
      const double qn = spec.q_n(), qp = spec.q_p();
      for (double lo = qn; lo <= qp; lo += 1.0) {
        for (double hi = lo; hi <= qp; hi += 1.0) {
          for (double z = qn - 2; z <= qp + 2; z += 1.0) {
            for (const double step : {1.0, 0.25, 0.37}) {
              QuantState st{{step}, {z}, {lo / qp}, {hi / qp}};
              const auto b = quant::code_bounds(spec, st, 0);
              if (b.lo != lo || b.hi != hi) ++grid_mismatch;
              const int span = 4 * (static_cast<int>(qp - qn) + 6);
              std::vector<double> xs;
              for (int m = -span; m <= span; ++m) {
                if (step == 0.37 && ((m % 4) + 4) % 4 == 2) continue;  // inexact ties
                xs.push_back(step * (m / 4.0));
              }
              const Tensor x({xs.size()}, xs);
              const Tensor y = quant::fake_quant(x, spec, st);
              for (std::size_t i = 0; i < xs.size(); ++i) {
                ++grid_cases;
                if (y[i] != oracle_quant(xs[i], step, z, lo, hi)) ++grid_mismatch;
              }
            }
          }
        }
      }
    }
  }

  // Random property sweeps.
  std::mt19937_64 gen(6);
  std::uniform_int_distribution<int> bits_d(2, 8), pick(0, 3), small(1, 6);
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  constexpr int kCases = 10000;
  for (int c = 0; c < kCases; ++c) {
    const bool weight = c % 2 == 0;
    const std::size_t rows = 2 * static_cast<std::size_t>(small(gen));
    const std::size_t cols = static_cast<std::size_t>(small(gen));
    QuantSpec spec;
    spec.bits = bits_d(gen);
    spec.scheme = u01(gen) < 0.5 ? Scheme::kSymmetric : Scheme::kAsymmetric;
    spec.role = weight ? Role::kWeight : Role::kActivation;
    switch (pick(gen)) {
      case 0: spec.granularity = numerics::Granularity::per_tensor(); break;
      case 1: spec.granularity = numerics::Granularity::per_channel(1); break;
      case 2: spec.granularity = numerics::Granularity::per_token(); break;
      default:
        spec.granularity = weight ? numerics::Granularity::per_group(0, 2)
                                  : numerics::Granularity::per_token();
    }
    Tensor x({rows, cols});
    const double scale = std::exp(3 * n01(gen));
    for (double& v : x.storage()) v = scale * n01(gen);
    QuantState st = quant::init_range(x, spec);
    for (std::size_t g = 0; g < st.group_count(); ++g) {
      if (u01(gen) < 0.5) st.zero_point[g] += std::round(2 * n01(gen));
      if (weight && u01(gen) < 0.5) {
        st.clip_lo[g] = spec.q_n() / spec.q_p() + 0.5 * u01(gen);
        st.clip_hi[g] = 1.0 - 0.3 * u01(gen);
      }
    }
    const Tensor y = quant::fake_quant(x, spec, st);
    const numerics::GroupLayout layout(x.shape(), spec.granularity);
    for (std::size_t i = 0; i < x.size(); ++i) {
      ++elements;
      const std::size_t g = layout.group_of(i);
      const auto b = quant::code_bounds(spec, st, g);
      const double z = std::nearbyint(st.zero_point[g]);
      const double step = st.step[g];
      if (y[i] != oracle_quant(x[i], step, z, b.lo, b.hi)) ++oracle_mismatch;
      const double lo_v = step * (b.lo - z), hi_v = step * (b.hi - z);
      if (x[i] >= lo_v && x[i] <= hi_v &&
          std::abs(x[i] - y[i]) > step / 2 * (1 + 1e-12) + 1e-300) {
        ++roundtrip_fail;
      }
    }
    const Tensor yy = quant::fake_quant(y, spec, st);
    if (!numerics::bitwise_equal(y, yy)) ++idem_fail;
    for (std::size_t g = 0; g < layout.group_count(); ++g) {
      std::vector<std::size_t> m = layout.members(g);
      std::sort(m.begin(), m.end(), [&](auto a, auto b) { return x[a] < x[b]; });
      for (std::size_t k = 1; k < m.size(); ++k) {
        if (y[m[k]] < y[m[k - 1]]) {
          ++mono_fail;
          break;
        }
      }
      // The group quantized alone as a per-tensor quantizer.
      const auto members = layout.members(g);
      std::vector<double> vals;
      for (auto idx : members) vals.push_back(x[idx]);
      QuantSpec one = spec;
      one.granularity = numerics::Granularity::per_tensor();
      QuantState sg{{st.step[g]}, {st.zero_point[g]}, {st.clip_lo[g]}, {st.clip_hi[g]}};
      const Tensor yg = quant::fake_quant(Tensor({vals.size()}, vals), one, sg);
      for (std::size_t k = 0; k < members.size(); ++k) {
        if (yg[k] != y[members[k]]) {
          ++gran_fail;
          break;
        }
      }
    }
  }
  o.detail << " exhaustive_cases=" << grid_cases << " exhaustive_mismatch=" << grid_mismatch
           << " sweeps=" << kCases << " elements=" << elements
           << " oracle_mismatch=" << oracle_mismatch << " roundtrip=" << roundtrip_fail
           << " idempotence=" << idem_fail << " monotonicity=" << mono_fail
           << " granularity=" << gran_fail;
  o.require(grid_mismatch == 0, "exact agreement on exhaustive grids");
  o.require(oracle_mismatch == 0, "agreement with nearest-code oracle");
  o.require(roundtrip_fail == 0, "|x - x_hat| <= step/2 in range");
  o.require(idem_fail == 0, "idempotence");
  o.require(mono_fail == 0, "monotonicity");
  o.require(gran_fail == 0, "granularity consistency");
}

// ---------------------------------------------------------------------------
// 7. End-to-end toy training.

cli::RunConfig toy_run(const fs::path& out) {
  cli::RunConfig cfg;
  cfg.corpus = ZOQAT_CORPUS;
  cfg.out_dir = out.string();
  cfg.train.steps = 2000;
  cfg.train.eval_interval = 500;
  return cfg;
}

void criterion7(Outcome& o) {
  const fs::path dir = work_dir("e2e");
  std::ostringstream log;
  // Full-precision base trained with the same forward-only optimizer, stopped
  // short of convergence so the quantized stage still has data to learn from.
  const auto tb = Clock::now();
  cli::RunConfig base = toy_run(dir / "fp");
  base.quant.reset();
  base.train.steps = 1500;
  const auto fp = cli::cmd_train(base, std::nullopt, log);
  const double base_secs = seconds_since(tb);
  const fs::path base_ckpt = base.checkpoint_path();
  o.detail << " fp_base_ppl=" << fp.final_ppl << " base_runtime=" << base_secs << "s";

  for (const char* notation : {"W4A4", "W2A16g16"}) {
    const auto t0 = Clock::now();
    cli::RunConfig q = toy_run(dir / notation);
    q.quant = cli::to_quant_config(cli::parse_quant_notation(notation));
    q.zo.schedule = zo::LrSchedule::kLinearDecay;
    cli::RunConfig rtn_cfg = q;
    rtn_cfg.out_dir = (dir / (std::string(notation) + "_rtn")).string();
    const double rtn = cli::cmd_quantize(rtn_cfg, base_ckpt, log);
    cli::RunConfig cal_cfg = q;
    cal_cfg.out_dir = (dir / (std::string(notation) + "_cal")).string();
    const double cal0 = cli::cmd_calibrate(cal_cfg, base_ckpt, log);
    const auto trained = cli::cmd_train(q, base_ckpt, log);
    const double secs = seconds_since(t0) + base_secs;
    o.detail << " " << notation << ":rtn=" << rtn << ",calib_0_steps=" << cal0
             << ",trained=" << trained.final_ppl << ",runtime=" << secs << "s";
    o.require(trained.initial_ppl == cal0, "train starts from the calibrated model");
    o.require(trained.final_ppl < rtn, std::string(notation) + " trained beats RTN");
    if (std::string(notation) == "W4A4") {
      const double gain = (cal0 - trained.final_ppl) / cal0;
      o.detail << ",gain=" << gain;
      o.require(gain >= 0.10, "W4A4 ppl improves >= 10% over 0 steps");
    }
    o.require(secs <= 20 * 60.0, "runtime <= 20 min");
  }
}

// ---------------------------------------------------------------------------
// 8. Lightweight accounting.

void criterion8(Outcome& o) {
  model::ModelConfig mc;
  model::Model m(mc, 8);
  m.attach_quantizers(cli::to_quant_config({4, 4, 0}));
  m.set_lightweight();
  const std::size_t qv = mc.n_layers * 2 * mc.d_model * mc.d_model;
  std::size_t from_view = 0;
  for (const auto& s : m.trainable_parameters().slices) {
    o.require(s.group == model::ParamGroupLabel::kWeights &&
                  (s.name.ends_with(".q.weight") || s.name.ends_with(".v.weight")),
              "only Q/V weight slices are trainable (" + s.name + ")");
    from_view += s.values.size();
  }
  o.detail << " trainable=" << m.trainable_count() << " qv_sizes=" << qv
           << " view=" << from_view;
  o.require(m.trainable_count() == qv && from_view == qv, "trainable count == |Q| + |V|");
  zo::ZoConfig z;
  const auto a = diagnostics::memory_report(m, z, 4, mc.context);
  const auto b = diagnostics::memory_report(m, z, 8, mc.context);
  o.detail << " params=" << a.parameters << "/" << b.parameters
           << " opt=" << a.optimizer_state << "/" << b.optimizer_state
           << " qfrozen=" << a.quantized_frozen << "/" << b.quantized_frozen
           << " fwd=" << a.transient_forward << "/" << b.transient_forward;
  o.require(a.parameters == b.parameters && a.optimizer_state == b.optimizer_state &&
                a.quantized_frozen == b.quantized_frozen,
            "fields invariant under batch doubling");
  o.require(a.parameters == qv * sizeof(double), "parameter bytes == 8 * |Q + V|");
  o.require(b.transient_forward > a.transient_forward, "forward memory grows with batch");
}

// ---------------------------------------------------------------------------
// 9. Perturb/restore fidelity.

void criterion9(Outcome& o) {
  const auto corpus = cli::ingest_corpus(ZOQAT_CORPUS, 32, 128, 9);
  model::ModelConfig mc;
  mc.context = 32;
  model::Model m(mc, 9);
  m.attach_quantizers(cli::to_quant_config({4, 4, 0}));
  std::vector<double> before;
  for (const auto& s : m.trainable_parameters().slices) {
    before.insert(before.end(), s.values.begin(), s.values.end());
  }
  zo::ZoConfig z;
  z.lr = {0.0, 0.0, 0.0, 0.0};
  z.batch_size = 1;
  for (std::size_t step = 0; step < 1000; ++step) {
    zo::zo_step(m, zo::sample_batch(corpus.train, 1, 9, step), z, step);
  }
  std::size_t i = 0;
  double worst_rel = 0.0, worst_abs_at_zero = 0.0;
  for (const auto& s : m.trainable_parameters().slices) {
    for (const double v : s.values) {
      const double d = std::abs(v - before[i]);
      if (before[i] != 0.0) {
        worst_rel = std::max(worst_rel, d / std::abs(before[i]));
      } else {
        worst_abs_at_zero = std::max(worst_abs_at_zero, d);
      }
      ++i;
    }
  }
  o.detail << " params=" << i << " steps=1000 max_rel_drift=" << worst_rel
           << " max_drift_of_zeros=" << worst_abs_at_zero;
  o.require(worst_rel <= 1e-9 && worst_abs_at_zero <= 1e-9 * z.epsilon,
            "relative drift <= 1e-9");
}

// ---------------------------------------------------------------------------
// 10. Calibration monotonicity.

void criterion10(Outcome& o) {
  // Every layer of the toy model calibrated on corpus activations.
  const auto corpus = cli::ingest_corpus(ZOQAT_CORPUS, 128, 128, 10);
  std::size_t layers = 0, negative = 0;
  double min_delta = std::numeric_limits<double>::infinity();
  for (const char* notation : {"W4A4", "W2A16g16", "W3A16"}) {
    model::Model m(model::ModelConfig{}, 10);
    m.attach_quantizers(cli::to_quant_config(cli::parse_quant_notation(notation)));
    cli::CalibSettings cs;
    const auto calib =
        calibration::capture_activations(m, cli::calibration_batch(corpus, cs));
    calibration::ReconstructOptions opt;
    opt.epochs = cs.effective_epochs(*m.quant_config());
    for (const auto& r : calibration::calibrate_model(m, calib, opt)) {
      ++layers;
      min_delta = std::min(min_delta, r.delta_loss);
      if (!(r.delta_loss >= 0.0) || r.loss_after > r.loss_before) ++negative;
    }
  }
  o.detail << " layers=" << layers << " min_delta_loss=" << min_delta;
  o.require(negative == 0, "every layer delta_loss >= 0");

  // Planted-outlier layer: one input channel 100x the others.
  std::mt19937_64 gen(1010);
  std::normal_distribution<double> n01;
  const std::size_t d1 = 16, d2 = 8;
  Tensor w({d1, d2}), b({1, d2});
  for (double& v : w.storage()) v = 0.3 * n01(gen);
  for (double& v : b.storage()) v = 0.1 * n01(gen);
  std::vector<Tensor> xs;
  for (int s = 0; s < 4; ++s) {
    Tensor x({32, d1});
    for (std::size_t r = 0; r < 32; ++r) {
      for (std::size_t j = 0; j < d1; ++j) x(r, j) = n01(gen) * (j == 5 ? 100.0 : 1.0);
    }
    xs.push_back(std::move(x));
  }
  const model::QuantConfig q = cli::to_quant_config({4, 4, 0});
  model::LayerAttachment att;
  att.weight_spec = q.weight_spec();
  att.weight_state = quant::init_range(w, att.weight_spec);
  att.act_spec = q.act_spec();
  att.smoothing = smoothing::SmoothingParams::identity(d1);
  calibration::ReconstructOptions opt;
  opt.epochs = 4;
  const auto r = calibration::reconstruct_layer(w, b, xs, att, opt, "planted");
  const double dl = calibration::delta_loss(r.loss_before, r.loss_after);
  o.detail << " planted_before=" << r.loss_before << " planted_after=" << r.loss_after
           << " planted_delta_loss=" << dl;
  o.require(dl >= 0.5, "planted outlier delta_loss >= 0.5");
}

// ---------------------------------------------------------------------------
// 11. Determinism of cmd_train.

// zo.csv with its wall-clock column removed.
std::string strip_wall_ms(const std::string& csv) {
  std::istringstream in(csv);
  std::ostringstream out;
  std::string line;
  std::size_t col = std::string::npos;
  while (std::getline(in, line)) {
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (col == std::string::npos) {
      col = static_cast<std::size_t>(
          std::find(f.begin(), f.end(), "wall_ms") - f.begin());
    }
    for (std::size_t i = 0; i < f.size(); ++i) {
      if (i != col) out << f[i] << ',';
    }
    out << '\n';
  }
  return out.str();
}

void criterion11(Outcome& o) {
  const fs::path dir = work_dir("determinism");
  cli::RunConfig cfg;
  cfg.corpus = ZOQAT_CORPUS;
  cfg.out_dir = (dir / "run").string();
  cfg.train.steps = 60;
  cfg.train.eval_interval = 20;
  cfg.seed = 11;
  const std::vector<std::string> files = {"calibration.csv", "diagnostics.csv", "zo.csv"};
  std::vector<std::string> first;
  std::ostringstream log;
  for (int rep = 0; rep < 2; ++rep) {
    cli::cmd_train(cfg, std::nullopt, log);
    std::vector<std::string> artifacts = {read_bytes(cfg.checkpoint_path())};
    for (const auto& f : files) {
      std::string bytes = read_bytes(cfg.metrics_path() / f);
      artifacts.push_back(f == "zo.csv" ? strip_wall_ms(bytes) : bytes);
    }
    if (rep == 0) {
      first = artifacts;
      fs::remove_all(cfg.out_dir);
      continue;
    }
    o.detail << " checkpoint_bytes=" << artifacts[0].size();
    o.require(!artifacts[0].empty() && artifacts[0] == first[0], "identical checkpoint bytes");
    for (std::size_t i = 0; i < files.size(); ++i) {
      o.require(!artifacts[i + 1].empty() && artifacts[i + 1] == first[i + 1],
                "identical " + files[i]);
    }
  }
  o.detail << " compared=checkpoint," << files[0] << "," << files[1] << ",zo.csv(sans wall_ms)";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"zoqat acceptance suite"};
  std::vector<int> selected;
  app.add_option("criteria", selected, "criterion numbers to run (default: all)")
      ->check(CLI::Range(1, 11));
  CLI11_PARSE(app, argc, argv);
  std::set<int> run(selected.begin(), selected.end());
  if (run.empty()) {
    for (int i = 1; i <= 11; ++i) run.insert(i);
  }

  const std::vector<std::pair<const char*, std::function<void(Outcome&)>>> criteria = {
      {"zo_unbiasedness", criterion1},
      {"mse_bound", criterion2},
      {"gaussian_tail_identities", criterion3},
      {"ste_bias", criterion4},
      {"smoothing_equivalence", criterion5},
      {"quantizer_invariants", criterion6},
      {"end_to_end_training", criterion7},
      {"lightweight_variant", criterion8},
      {"perturb_restore_fidelity", criterion9},
      {"calibration_monotonicity", criterion10},
      {"full_determinism", criterion11},
  };
  int failures = 0;
  for (int i = 1; i <= 11; ++i) {
    if (!run.count(i)) continue;
    Outcome o;
    const auto t0 = Clock::now();
    try {
      criteria[i - 1].second(o);
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS" : "FAIL") << " [" << i << "] " << criteria[i - 1].first
              << " (" << seconds_since(t0) << " s):" << o.detail.str() << std::endl;
  }
  return failures == 0 ? 0 : 1;
}
