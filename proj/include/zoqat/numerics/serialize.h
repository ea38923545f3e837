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

#ifndef ZOQAT_NUMERICS_SERIALIZE_H_
#define ZOQAT_NUMERICS_SERIALIZE_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>

#include "zoqat/numerics/tensor.h"

namespace zoqat::numerics {

// Tensor container layout (all integers little-endian):
//   bytes  0..7   magic "ZQTENSOR"
//   bytes  8..11  u32 format version (kTensorFormatVersion)
//   bytes 12..15  u32 element type, 1 = IEEE-754 binary64
//   u64 rank, rank x u64 dims, then product(dims) little-endian doubles.
inline constexpr std::uint32_t kTensorFormatVersion = 1;

void write_tensor(std::ostream& out, const Tensor& t);
Tensor read_tensor(std::istream& in);

void save_tensor(const std::filesystem::path& path, const Tensor& t);
Tensor load_tensor(const std::filesystem::path& path);

// Little-endian primitives shared with the checkpoint format.
void write_u32(std::ostream& out, std::uint32_t v);
void write_u64(std::ostream& out, std::uint64_t v);
void write_f64(std::ostream& out, double v);
std::uint32_t read_u32(std::istream& in);
std::uint64_t read_u64(std::istream& in);
double read_f64(std::istream& in);

}  // namespace zoqat::numerics

#endif  // ZOQAT_NUMERICS_SERIALIZE_H_
