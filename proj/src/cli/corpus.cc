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

#include "zoqat/cli/corpus.h"

#include <fstream>
#include <iterator>
#include <numeric>
#include <string>

#include "zoqat/error.h"
#include "zoqat/numerics/rng.h"

namespace zoqat::cli {
namespace {

constexpr std::uint64_t kSplitStream = 0x5EED'0000'0000'0001;

}  // namespace

std::optional<std::size_t> first_invalid_utf8(std::string_view s) {
  std::size_t i = 0;
  const auto byte = [&](std::size_t k) { return static_cast<unsigned char>(s[k]); };
  while (i < s.size()) {
    const unsigned char c = byte(i);
    std::size_t len;
    std::uint32_t cp;
    if (c < 0x80) {
      ++i;
      continue;
    } else if ((c & 0xE0) == 0xC0) {
      len = 2;
      cp = c & 0x1F;
    } else if ((c & 0xF0) == 0xE0) {
      len = 3;
      cp = c & 0x0F;
    } else if ((c & 0xF8) == 0xF0) {
      len = 4;
      cp = c & 0x07;
    } else {
      return i;
    }
    for (std::size_t k = 1; k < len; ++k) {
      if (i + k >= s.size() || (byte(i + k) & 0xC0) != 0x80) return i;
      cp = (cp << 6) | (byte(i + k) & 0x3F);
    }
    // Overlong forms, surrogates and values beyond U+10FFFF.
    static constexpr std::uint32_t kMin[] = {0, 0, 0x80, 0x800, 0x10000};
    if (cp < kMin[len] || (cp >= 0xD800 && cp <= 0xDFFF) || cp > 0x10FFFF) return i;
    i += len;
  }
  return std::nullopt;
}

Corpus split_corpus(std::string_view bytes, std::size_t context, std::size_t vocab_size,
                    std::uint64_t seed) {
  if (context < 2) throw InvalidArgument("context must be >= 2");
  if (bytes.empty()) throw DataError("corpus is empty");
  if (const auto bad = first_invalid_utf8(bytes)) {
    throw DataError("corpus is not valid UTF-8 at byte offset " + std::to_string(*bad));
  }
  Corpus c;
  c.tokens.reserve(bytes.size());
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const int t = static_cast<unsigned char>(bytes[i]);
    if (static_cast<std::size_t>(t) >= vocab_size) {
      throw DataError("byte value " + std::to_string(t) + " at offset " + std::to_string(i) +
                      " does not fit a vocabulary of " + std::to_string(vocab_size));
    }
    c.tokens.push_back(t);
  }
  std::vector<model::Sequence> chunks;
  for (std::size_t start = 0; start < c.tokens.size(); start += context) {
    const std::size_t end = std::min(start + context, c.tokens.size());
    if (end - start < 2) break;
    chunks.emplace_back(c.tokens.begin() + static_cast<std::ptrdiff_t>(start),
                        c.tokens.begin() + static_cast<std::ptrdiff_t>(end));
  }
  if (chunks.empty()) throw DataError("corpus is shorter than two tokens");
  std::vector<std::size_t> order(chunks.size());
  std::iota(order.begin(), order.end(), 0);
  numerics::RngStream rng(seed, kSplitStream);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.next_index(i)]);
  }
  const std::size_t n_eval = chunks.size() >= 2 ? std::max<std::size_t>(chunks.size() / 10, 1) : 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    (k < n_eval ? c.eval : c.train).push_back(std::move(chunks[order[k]]));
  }
  return c;
}

Corpus ingest_corpus(const std::filesystem::path& path, std::size_t context,
                     std::size_t vocab_size, std::uint64_t seed) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open corpus " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw DataError("error reading corpus " + path.string());
  return split_corpus(bytes, context, vocab_size, seed);
}

}  // namespace zoqat::cli
