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

#include "zoqat/numerics/stats.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "zoqat/error.h"

namespace zoqat::numerics {

std::string to_string(const Granularity& g) {
  switch (g.kind) {
    case GranularityKind::kPerTensor:
      return "per-tensor";
    case GranularityKind::kPerChannel:
      return "per-channel(axis=" + std::to_string(g.axis) + ")";
    case GranularityKind::kPerToken:
      return "per-token";
    case GranularityKind::kPerGroup:
      return "per-group(axis=" + std::to_string(g.axis) +
             ", size=" + std::to_string(g.group_size) + ")";
  }
  return "unknown";
}

GroupLayout::GroupLayout(const Shape& shape, const Granularity& granularity)
    : kind_(granularity.kind) {
  if (shape.empty()) throw DimensionError("group layout needs a non-empty shape");
  element_count_ = 1;
  for (std::size_t d : shape) element_count_ *= d;

  switch (kind_) {
    case GranularityKind::kPerTensor:
      group_count_ = 1;
      break;
    case GranularityKind::kPerToken:
      inner_ = shape.back();
      group_count_ = element_count_ / inner_;
      break;
    case GranularityKind::kPerChannel:
    case GranularityKind::kPerGroup: {
      if (granularity.axis >= shape.size()) {
        throw DimensionError("granularity axis " + std::to_string(granularity.axis) +
                             " out of range for shape " + shape_string(shape));
      }
      dim_ = shape[granularity.axis];
      inner_ = 1;
      for (std::size_t a = granularity.axis + 1; a < shape.size(); ++a) inner_ *= shape[a];
      if (kind_ == GranularityKind::kPerChannel) {
        group_count_ = dim_;
        break;
      }
      group_size_ = granularity.group_size;
      if (group_size_ == 0 || dim_ % group_size_ != 0) {
        throw DimensionError("group size " + std::to_string(group_size_) +
                             " does not divide axis length " + std::to_string(dim_));
      }
      group_count_ = element_count_ / group_size_;
      break;
    }
  }
}

std::vector<std::size_t> GroupLayout::members(std::size_t g) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < element_count_; ++i) {
    if (group_of(i) == g) out.push_back(i);
  }
  return out;
}

std::vector<GroupStats> reduce_stats(const Tensor& x,
                                     const Granularity& granularity) {
  if (x.empty()) throw InvalidArgument("reduce_stats: empty tensor");
  const GroupLayout layout(x.shape(), granularity);
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<GroupStats> stats(layout.group_count(), GroupStats{kInf, -kInf, 0.0});
  for (std::size_t i = 0; i < x.size(); ++i) {
    GroupStats& s = stats[layout.group_of(i)];
    const double v = x[i];
    s.min = std::min(s.min, v);
    s.max = std::max(s.max, v);
    s.absmax = std::max(s.absmax, std::abs(v));
  }
  return stats;
}

}  // namespace zoqat::numerics
