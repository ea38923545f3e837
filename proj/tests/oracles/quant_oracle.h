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

#ifndef ZOQAT_TESTS_ORACLES_QUANT_ORACLE_H_
#define ZOQAT_TESTS_ORACLES_QUANT_ORACLE_H_

#include <cmath>
#include <cstdint>
#include <limits>

namespace zoqat::oracle {

struct ScalarCode {
  std::int64_t code;
  // Distance to the runner-up code minus distance to the winner. Zero on an
  // exact tie; tiny values flag near-ties that depend on rounding of x / step.
  double margin;
};

// Scans every integer code in [lo, hi] and keeps the one whose dequantized
// value step * (c - z) is closest to x. Ties go to the even offset c - z.
inline ScalarCode nearest_code(double x, double step, std::int64_t z,
                               std::int64_t lo, std::int64_t hi) {
  std::int64_t best = lo;
  double best_d = std::numeric_limits<double>::infinity();
  double second_d = std::numeric_limits<double>::infinity();
  for (std::int64_t c = lo; c <= hi; ++c) {
    const double d = std::abs(x - step * static_cast<double>(c - z));
    const bool even = ((c - z) % 2) == 0;
    if (d < best_d || (d == best_d && even)) {
      second_d = best_d;
      best_d = d;
      best = c;
    } else if (d < second_d) {
      second_d = d;
    }
  }
  return {best, second_d - best_d};
}

}  // namespace zoqat::oracle

#endif  // ZOQAT_TESTS_ORACLES_QUANT_ORACLE_H_
