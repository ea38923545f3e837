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

#include "zoqat/numerics/rng.h"

#include <cmath>
#include <numbers>

#include "zoqat/error.h"

namespace zoqat::numerics {
namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline double to_unit(std::uint64_t word) {
  return static_cast<double>(word >> 11) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> c,
                                        std::array<std::uint32_t, 2> k) {
  for (int round = 0; round < 10; ++round) {
    const std::uint64_t p0 = std::uint64_t{kPhiloxM0} * c[0];
    const std::uint64_t p1 = std::uint64_t{kPhiloxM1} * c[2];
    const auto hi0 = static_cast<std::uint32_t>(p0 >> 32);
    const auto lo0 = static_cast<std::uint32_t>(p0);
    const auto hi1 = static_cast<std::uint32_t>(p1 >> 32);
    const auto lo1 = static_cast<std::uint32_t>(p1);
    c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
    k[0] += kPhiloxW0;
    k[1] += kPhiloxW1;
  }
  return c;
}

RngStream::RngStream(std::uint64_t seed, std::uint64_t stream_id,
                     std::uint64_t position)
    : seed_(seed), stream_id_(stream_id), position_(position) {}

const std::array<std::uint64_t, 2>& RngStream::block(std::uint64_t index) {
  if (index != cached_index_) {
    const auto out = philox4x32(
        {static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(index >> 32),
         static_cast<std::uint32_t>(stream_id_),
         static_cast<std::uint32_t>(stream_id_ >> 32)},
        {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
    cached_words_ = {(std::uint64_t{out[1]} << 32) | out[0],
                     (std::uint64_t{out[3]} << 32) | out[2]};
    cached_index_ = index;
  }
  return cached_words_;
}

std::uint64_t RngStream::next_u64() {
  const std::uint64_t pos = position_++;
  return block(pos >> 1)[pos & 1];
}

double RngStream::next_uniform() { return to_unit(next_u64()); }

std::uint64_t RngStream::next_index(std::uint64_t n) {
  if (n == 0) throw InvalidArgument("next_index: range must be non-empty");
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x = next_u64();
  while (x >= limit) x = next_u64();
  return x % n;
}

double RngStream::next_gaussian() {
  const std::uint64_t pos = position_++;
  const auto& words = block(pos >> 1);
  // 1 - u lies in (0, 1], so the log is finite.
  const double radius = std::sqrt(-2.0 * std::log(1.0 - to_unit(words[0])));
  const double angle = 2.0 * std::numbers::pi * to_unit(words[1]);
  return (pos & 1) == 0 ? radius * std::cos(angle) : radius * std::sin(angle);
}

void RngStream::fill_gaussian(std::span<double> out) {
  for (double& v : out) v = next_gaussian();
}

Tensor gaussian(RngStream& stream, std::size_t n) {
  if (n == 0) throw InvalidArgument("gaussian: need at least one draw");
  Tensor t({n});
  stream.fill_gaussian(t.values());
  return t;
}

}  // namespace zoqat::numerics
