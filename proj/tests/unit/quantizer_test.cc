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

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "oracles/quant_oracle.h"
#include "zoqat/error.h"

namespace zoqat::quant {
namespace {

QuantSpec spec_of(int bits, Scheme scheme, Granularity g = Granularity::per_tensor(),
                  Role role = Role::kWeight) {
  return {bits, scheme, g, role};
}

QuantState single_group(double step, double z, double lo, double hi) {
  return {{step}, {z}, {lo}, {hi}};
}

TEST(QuantSpecTest, CodeRanges) {
  EXPECT_EQ(spec_of(2, Scheme::kAsymmetric).q_n(), 0);
  EXPECT_EQ(spec_of(2, Scheme::kAsymmetric).q_p(), 3);
  EXPECT_EQ(spec_of(3, Scheme::kSymmetric).q_n(), -4);
  EXPECT_EQ(spec_of(3, Scheme::kSymmetric).q_p(), 3);
  EXPECT_EQ(spec_of(8, Scheme::kAsymmetric).q_p(), 255);
}

TEST(QuantSpecTest, ActivationPerGroupRejected) {
  EXPECT_THROW(spec_of(4, Scheme::kAsymmetric, Granularity::per_group(0, 2),
                       Role::kActivation).validate(),
               InvalidArgument);
  EXPECT_THROW(spec_of(1, Scheme::kAsymmetric).validate(), InvalidArgument);
}

TEST(InitRangeTest, AsymmetricTwoBit) {
  const QuantState st =
      init_range(Tensor::vector({-1.0, 0.5, 2.0}), spec_of(2, Scheme::kAsymmetric));
  EXPECT_DOUBLE_EQ(st.step[0], 1.0);
  EXPECT_EQ(st.zero_point[0], 1.0);
  EXPECT_EQ(st.clip_lo[0], 0.0);
  EXPECT_EQ(st.clip_hi[0], 1.0);
}

TEST(InitRangeTest, SymmetricThreeBit) {
  const QuantState st =
      init_range(Tensor::vector({-2.0, 1.0}), spec_of(3, Scheme::kSymmetric));
  EXPECT_DOUBLE_EQ(st.step[0], 2.0 / 3.0);
  EXPECT_EQ(st.zero_point[0], 0.0);
  EXPECT_EQ(st.clip_lo[0], -4.0 / 3.0);
}

TEST(InitRangeTest, ConstantGroupsRoundTripExactly) {
  for (Scheme scheme : {Scheme::kAsymmetric, Scheme::kSymmetric}) {
    const QuantSpec spec = spec_of(4, scheme);
    const Tensor zeros = Tensor::filled({5}, 0.0);
    const QuantState z = init_range(zeros, spec);
    EXPECT_EQ(z.step[0], 1.0);
    EXPECT_EQ(z.zero_point[0], 0.0);
    EXPECT_TRUE(numerics::bitwise_equal(fake_quant(zeros, spec, z), zeros));
  }
  const QuantSpec asym = spec_of(4, Scheme::kAsymmetric);
  for (double c : {0.37, -0.37, 5.0, -1e-3}) {
    const Tensor x = Tensor::filled({3}, c);
    EXPECT_TRUE(numerics::bitwise_equal(fake_quant(x, asym, init_range(x, asym)), x)) << c;
  }
}

TEST(InitRangeTest, EmptyTensorRejected) {
  EXPECT_THROW(init_range(Tensor(), spec_of(4, Scheme::kAsymmetric)), InvalidArgument);
}

TEST(FakeQuantTest, AsymmetricTwoBitCodes) {
  const QuantSpec spec = spec_of(2, Scheme::kAsymmetric);
  const QuantState st = single_group(1.0, 1.0, 0.0, 1.0);
  const Tensor x = Tensor::vector({-1.0, 0.5, 2.0});
  const Tensor codes = quant_codes(x, spec, st);
  EXPECT_EQ(codes[0], 0);
  EXPECT_EQ(codes[1], 1);
  EXPECT_EQ(codes[2], 3);
  const Tensor xq = fake_quant(x, spec, st);
  EXPECT_EQ(xq[0], -1.0);
  EXPECT_EQ(xq[1], 0.0);
  EXPECT_EQ(xq[2], 2.0);
}

TEST(FakeQuantTest, GridPointsAreFixed) {
  const QuantSpec spec = spec_of(8, Scheme::kSymmetric);
  const QuantState st = single_group(0.25, 0.0, -128.0 / 127.0, 1.0);
  std::vector<double> v;
  for (int k = -128; k <= 127; ++k) v.push_back(0.25 * k);
  const Tensor x = Tensor::vector(v);
  EXPECT_TRUE(numerics::bitwise_equal(fake_quant(x, spec, st), x));
  EXPECT_EQ(quant_error(x, spec, st), 0.0);
}

TEST(FakeQuantTest, InactiveClippingMatchesActivationFormula) {
  std::mt19937_64 gen(5);
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor x({64});
  for (double& v : x.values()) v = 3.0 * n(gen);
  for (Scheme scheme : {Scheme::kSymmetric, Scheme::kAsymmetric}) {
    QuantSpec w = spec_of(3, scheme);
    QuantSpec a = w;
    a.role = Role::kActivation;
    const QuantState st = init_range(x, w);
    EXPECT_TRUE(numerics::bitwise_equal(fake_quant(x, w, st), fake_quant(x, a, st)));
  }
}

TEST(FakeQuantTest, NonPositiveStepIsInvalidState) {
  const QuantSpec spec = spec_of(4, Scheme::kAsymmetric);
  EXPECT_THROW(fake_quant(Tensor::vector({1.0}), spec, single_group(0.0, 0, 0, 1)), InvalidState);
  EXPECT_THROW(fake_quant(Tensor::vector({1.0}), spec, single_group(-1.0, 0, 0, 1)), InvalidState);
}

TEST(QuantErrorTest, HalfStepOffGrid) {
  const QuantSpec spec = spec_of(4, Scheme::kAsymmetric);
  const QuantState st = single_group(0.5, 0.0, 0.0, 1.0);
  // 0.75 lies exactly halfway between codes 1 and 2.
  EXPECT_DOUBLE_EQ(quant_error(Tensor::vector({0.75}), spec, st), 0.0625);
}

TEST(QuantErrorTest, EightBitElementwiseBound) {
  std::mt19937_64 gen(8);
  std::uniform_real_distribution<double> u(-3.0, 5.0);
  Tensor x({4096});
  for (double& v : x.values()) v = u(gen);
  const QuantSpec spec = spec_of(8, Scheme::kAsymmetric);
  const QuantState st = init_range(x, spec);
  const Tensor xq = fake_quant(x, spec, st);
  const double half = st.step[0] / 2;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = x[i] - xq[i];
    EXPECT_LE(e * e, half * half * (1 + 1e-12)) << i;
  }
}

TEST(FakeQuantTest, ExhaustiveLowBitGridsMatchOracle) {
  // Power-of-two steps keep x / step exact, so agreement must be exact.
  for (int bits : {2, 3}) {
    for (Scheme scheme : {Scheme::kSymmetric, Scheme::kAsymmetric}) {
      QuantSpec spec = spec_of(bits, scheme);
      const double q_n = spec.q_n(), q_p = spec.q_p();
      for (double step : {0.25, 1.0}) {
        for (int z = -2; z <= 2; ++z) {
          for (double lo = q_n; lo <= q_p; ++lo) {
            for (double hi = lo + 1; hi <= q_p; ++hi) {
              const QuantState st = single_group(step, z, lo / q_p, hi / q_p);
              std::vector<double> xs;
              for (int k = -96; k <= 96; ++k) xs.push_back(step * k / 8.0);
              const Tensor x = Tensor::vector(xs);
              const Tensor codes = quant_codes(x, spec, st);
              const Tensor xq = fake_quant(x, spec, st);
              for (std::size_t i = 0; i < xs.size(); ++i) {
                const auto want = oracle::nearest_code(xs[i], step, z, std::int64_t(lo),
                                                       std::int64_t(hi));
                ASSERT_EQ(codes[i], double(want.code))
                    << "bits=" << bits << " x=" << xs[i] << " z=" << z << " lo=" << lo
                    << " hi=" << hi;
                ASSERT_EQ(xq[i], step * double(want.code - z));
              }
            }
          }
        }
      }
    }
  }
}

TEST(FakeQuantTest, IdempotentAndMonotone) {
  std::mt19937_64 gen(21);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    Tensor x({8, 6});
    for (double& v : x.values()) v = n(gen);
    const QuantSpec spec = spec_of(2 + trial % 6, trial % 2 ? Scheme::kSymmetric : Scheme::kAsymmetric,
                                   Granularity::per_channel(1));
    const QuantState st = init_range(x, spec);
    const Tensor once = fake_quant(x, spec, st);
    EXPECT_TRUE(numerics::bitwise_equal(fake_quant(once, spec, st), once));
    // Sorting a column must not reorder its quantized values.
    for (std::size_t c = 0; c < 6; ++c) {
      std::vector<double> col;
      for (std::size_t r = 0; r < 8; ++r) col.push_back(x(r, c));
      std::sort(col.begin(), col.end());
      Tensor sorted({8, 6}, std::vector<double>(48, 0.0));
      for (std::size_t r = 0; r < 8; ++r) sorted(r, c) = col[r];
      const Tensor q = fake_quant(sorted, spec, st);
      for (std::size_t r = 1; r < 8; ++r) EXPECT_LE(q(r - 1, c), q(r, c));
    }
  }
}

TEST(FakeQuantTest, TighterClippingNeverAddsCodes) {
  std::mt19937_64 gen(4);
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor x({512});
  for (double& v : x.values()) v = n(gen);
  const QuantSpec spec = spec_of(4, Scheme::kSymmetric);
  QuantState st = init_range(x, spec);
  std::size_t prev = 1000;
  for (int k = 0; k < 7; ++k) {
    const Tensor codes = quant_codes(x, spec, st);
    const std::set<double> distinct(codes.values().begin(), codes.values().end());
    EXPECT_LE(distinct.size(), prev);
    prev = distinct.size();
    st.clip_lo[0] += 1.0 / 7.0;
    st.clip_hi[0] -= 1.0 / 7.0;
  }
}

TEST(GranularityTest, ConsistencyAcrossEquivalentTilings) {
  std::mt19937_64 gen(9);
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor w({8, 4});
  for (double& v : w.values()) v = n(gen);
  const QuantSpec per_channel = spec_of(3, Scheme::kAsymmetric, Granularity::per_channel(1));
  const QuantSpec full_group = spec_of(3, Scheme::kAsymmetric, Granularity::per_group(0, 8));
  EXPECT_TRUE(numerics::bitwise_equal(fake_quant(w, per_channel, init_range(w, per_channel)),
                                      fake_quant(w, full_group, init_range(w, full_group))));
  Tensor col({8, 1});
  for (double& v : col.values()) v = n(gen);
  const QuantSpec one_channel = spec_of(3, Scheme::kSymmetric, Granularity::per_channel(1));
  const QuantSpec tensor = spec_of(3, Scheme::kSymmetric);
  EXPECT_TRUE(numerics::bitwise_equal(fake_quant(col, one_channel, init_range(col, one_channel)),
                                      fake_quant(col, tensor, init_range(col, tensor))));
}

TEST(GranularityTest, GroupCountMismatchIsDimensionError) {
  const QuantSpec spec = spec_of(4, Scheme::kAsymmetric, Granularity::per_channel(1));
  EXPECT_THROW(fake_quant(Tensor({3, 2}), spec, single_group(1, 0, 0, 1)), DimensionError);
}

TEST(QuantStateTest, ValidateChecksOrderAndStep) {
  EXPECT_NO_THROW(single_group(1, 0, 0, 1).validate());
  EXPECT_THROW(single_group(1, 0, 1, 1).validate(), InvalidState);
  EXPECT_THROW(single_group(0, 0, 0, 1).validate(), InvalidState);
}

}  // namespace
}  // namespace zoqat::quant
