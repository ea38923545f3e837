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

#ifndef ZOQAT_NUMERICS_STATS_H_
#define ZOQAT_NUMERICS_STATS_H_

#include <cstddef>
#include <string>
#include <vector>

#include "zoqat/numerics/tensor.h"

namespace zoqat::numerics {

enum class GranularityKind { kPerTensor, kPerChannel, kPerToken, kPerGroup };

// How a tensor is tiled into quantization groups.
//   per-tensor:  one group.
//   per-channel: one group per index along `axis`.
//   per-token:   one group per index of all axes but the last (row-wise).
//   per-group:   contiguous chunks of `group_size` along `axis`, separately
//                for every index of the remaining axes.
struct Granularity {
  GranularityKind kind = GranularityKind::kPerTensor;
  std::size_t axis = 0;
  std::size_t group_size = 0;

  static Granularity per_tensor() { return {}; }
  static Granularity per_channel(std::size_t axis) {
    return {GranularityKind::kPerChannel, axis, 0};
  }
  static Granularity per_token() { return {GranularityKind::kPerToken, 0, 0}; }
  static Granularity per_group(std::size_t axis, std::size_t size) {
    return {GranularityKind::kPerGroup, axis, size};
  }

  bool operator==(const Granularity&) const = default;
};

std::string to_string(const Granularity& g);

// Maps flat element indices of a fixed shape onto group ids.
//
// Group ids enumerate the reduced index space in row-major order: for
// per-group tiling the shape [.., n, ..] along `axis` becomes [.., n/size, ..].
class GroupLayout {
 public:
  GroupLayout(const Shape& shape, const Granularity& granularity);

  std::size_t group_count() const { return group_count_; }
  std::size_t element_count() const { return element_count_; }
  std::size_t group_of(std::size_t flat) const {
    switch (kind_) {
      case GranularityKind::kPerTensor:
        return 0;
      case GranularityKind::kPerChannel:
        return (flat / inner_) % dim_;
      case GranularityKind::kPerToken:
        return flat / inner_;
      case GranularityKind::kPerGroup: {
        const std::size_t r = flat % inner_;
        const std::size_t rest = flat / inner_;
        const std::size_t i = rest % dim_;
        const std::size_t o = rest / dim_;
        return (o * (dim_ / group_size_) + i / group_size_) * inner_ + r;
      }
    }
    return 0;
  }
  // Flat indices of group `g` in increasing order.
  std::vector<std::size_t> members(std::size_t g) const;

 private:
  GranularityKind kind_;
  std::size_t dim_ = 1;
  std::size_t inner_ = 1;
  std::size_t group_size_ = 1;
  std::size_t group_count_ = 1;
  std::size_t element_count_ = 0;
};

struct GroupStats {
  double min;
  double max;
  double absmax;
};

// One (min, max, absmax) triple per group of `x` under `granularity`.
// Throws DimensionError when a group size does not divide its axis.
std::vector<GroupStats> reduce_stats(const Tensor& x,
                                     const Granularity& granularity);

}  // namespace zoqat::numerics

#endif  // ZOQAT_NUMERICS_STATS_H_
