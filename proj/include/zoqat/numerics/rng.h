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

#ifndef ZOQAT_NUMERICS_RNG_H_
#define ZOQAT_NUMERICS_RNG_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>

#include "zoqat/numerics/tensor.h"

namespace zoqat::numerics {

// Philox4x32-10 block function (Salmon et al., Random123).
std::array<std::uint32_t, 4> philox4x32(std::array<std::uint32_t, 4> counter,
                                        std::array<std::uint32_t, 2> key);

// Counter-based random stream. Draw number `position` of stream
// (seed, stream_id) is a pure function of those three integers, so any
// draw can be regenerated without storing the sequence.
//
// Layout: block b = position / 2 encrypts the counter
// (b_lo, b_hi, stream_lo, stream_hi) under key (seed_lo, seed_hi). The block
// yields two 64-bit words; word position % 2 backs draw `position`. Gaussian
// draws pair the two words of a block through Box-Muller (cos for the even
// position, sin for the odd one).
class RngStream {
 public:
  RngStream(std::uint64_t seed, std::uint64_t stream_id,
            std::uint64_t position = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }
  std::uint64_t position() const { return position_; }
  void seek(std::uint64_t position) { position_ = position; }

  std::uint64_t next_u64();
  // Uniform on [0, 1) with 53 random bits.
  double next_uniform();
  // Uniform integer in [0, n); n > 0.
  std::uint64_t next_index(std::uint64_t n);
  double next_gaussian();
  void fill_gaussian(std::span<double> out);

 private:
  const std::array<std::uint64_t, 2>& block(std::uint64_t index);

  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t position_;
  std::uint64_t cached_index_ = ~std::uint64_t{0};
  std::array<std::uint64_t, 2> cached_words_{};
};

// n i.i.d. standard normal draws; advances the stream by n.
Tensor gaussian(RngStream& stream, std::size_t n);

}  // namespace zoqat::numerics

#endif  // ZOQAT_NUMERICS_RNG_H_
