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

#include "zoqat/numerics/serialize.h"

#include <array>
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "zoqat/error.h"

namespace zoqat::numerics {
namespace {

constexpr std::array<char, 8> kMagic = {'Z', 'Q', 'T', 'E', 'N', 'S', 'O', 'R'};
constexpr std::uint32_t kFloat64 = 1;
// Guards against absurd allocations when reading a corrupt header.
constexpr std::uint64_t kMaxRank = 16;
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;

template <typename U>
void write_le(std::ostream& out, U v) {
  std::array<char, sizeof(U)> bytes;
  for (std::size_t i = 0; i < sizeof(U); ++i) {
    bytes[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  }
  out.write(bytes.data(), bytes.size());
}

template <typename U>
U read_le(std::istream& in) {
  std::array<unsigned char, sizeof(U)> bytes;
  in.read(reinterpret_cast<char*>(bytes.data()), bytes.size());
  if (!in) throw DataError("unexpected end of tensor stream");
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= U{bytes[i]} << (8 * i);
  return v;
}

}  // namespace

void write_u32(std::ostream& out, std::uint32_t v) { write_le(out, v); }
void write_u64(std::ostream& out, std::uint64_t v) { write_le(out, v); }
void write_f64(std::ostream& out, double v) {
  write_le(out, std::bit_cast<std::uint64_t>(v));
}
std::uint32_t read_u32(std::istream& in) { return read_le<std::uint32_t>(in); }
std::uint64_t read_u64(std::istream& in) { return read_le<std::uint64_t>(in); }
double read_f64(std::istream& in) {
  return std::bit_cast<double>(read_le<std::uint64_t>(in));
}

void write_tensor(std::ostream& out, const Tensor& t) {
  if (t.empty()) throw InvalidArgument("write_tensor: empty tensor");
  out.write(kMagic.data(), kMagic.size());
  write_u32(out, kTensorFormatVersion);
  write_u32(out, kFloat64);
  write_u64(out, t.rank());
  for (std::size_t d : t.shape()) write_u64(out, d);
  for (double v : t.values()) write_f64(out, v);
  if (!out) throw DataError("write_tensor: stream failure");
}

Tensor read_tensor(std::istream& in) {
  std::array<char, 8> magic;
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw DataError("read_tensor: bad magic");
  const std::uint32_t version = read_u32(in);
  if (version != kTensorFormatVersion) {
    throw DataError("read_tensor: unsupported format version " +
                    std::to_string(version) + " (expected " +
                    std::to_string(kTensorFormatVersion) + ")");
  }
  if (read_u32(in) != kFloat64) throw DataError("read_tensor: unsupported element type");
  const std::uint64_t rank = read_u64(in);
  if (rank == 0 || rank > kMaxRank) throw DataError("read_tensor: bad rank");
  Shape shape(rank);
  std::uint64_t count = 1;
  for (auto& d : shape) {
    d = read_u64(in);
    if (d == 0 || d > kMaxElements) throw DataError("read_tensor: bad dimension");
    count *= d;
    if (count > kMaxElements) throw DataError("read_tensor: tensor too large");
  }
  std::vector<double> data(count);
  for (double& v : data) v = read_f64(in);
  return Tensor(std::move(shape), std::move(data));
}

void save_tensor(const std::filesystem::path& path, const Tensor& t) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open " + path.string() + " for writing");
  write_tensor(out, t);
}

Tensor load_tensor(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return read_tensor(in);
}

}  // namespace zoqat::numerics
