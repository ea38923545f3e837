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

#ifndef ZOQAT_CLI_CORPUS_H_
#define ZOQAT_CLI_CORPUS_H_

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string_view>
#include <vector>

#include "zoqat/model/model.h"

namespace zoqat::cli {

struct Corpus {
  std::vector<int> tokens;
  std::vector<model::Sequence> train;
  std::vector<model::Sequence> eval;
};

// Offset of the first byte that breaks UTF-8 well-formedness, if any.
std::optional<std::size_t> first_invalid_utf8(std::string_view bytes);

// Byte tokens cut into consecutive chunks of `context` tokens; a trailing
// chunk shorter than 2 tokens is dropped. A seeded shuffle sends
// chunks / 10 chunks (at least one when there are two or more) to eval.
// Throws DataError on an unreadable or empty file, malformed UTF-8 (naming
// the offset), or a byte value >= vocab_size.
Corpus ingest_corpus(const std::filesystem::path& path, std::size_t context,
                     std::size_t vocab_size, std::uint64_t seed);
Corpus split_corpus(std::string_view bytes, std::size_t context, std::size_t vocab_size,
                    std::uint64_t seed);

}  // namespace zoqat::cli

#endif  // ZOQAT_CLI_CORPUS_H_
