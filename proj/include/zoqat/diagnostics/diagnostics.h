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

#ifndef ZOQAT_DIAGNOSTICS_DIAGNOSTICS_H_
#define ZOQAT_DIAGNOSTICS_DIAGNOSTICS_H_

#include <cstddef>
#include <iosfwd>
#include <string>
#include <vector>

#include "zoqat/calibration/calibration.h"
#include "zoqat/model/model.h"
#include "zoqat/zo/zo.h"

namespace zoqat::diagnostics {

using model::LinearId;
using numerics::Tensor;

// Analytic byte accounting. Frozen quantized weights are counted packed at
// their bit width; every other stored real costs 8 bytes.
struct MemoryReport {
  std::size_t parameters = 0;             // trainable reals
  std::size_t quantized_frozen = 0;       // pre-quantized weights, packed
  std::size_t frozen_full_precision = 0;  // everything else that is stored
  std::size_t optimizer_state = 0;
  std::size_t transient_forward = 0;      // peak live activations of one forward

  std::size_t frozen() const { return quantized_frozen + frozen_full_precision; }
  bool operator==(const MemoryReport&) const = default;
};

// `batch` sequences of `seq_len` tokens. The forward peak is modelled as
// 8 * batch * seq_len * (2d + max(4d + heads * seq_len, 2 d_ff, vocab)) bytes:
// the residual stream and its normalized copy plus the largest intermediate.
MemoryReport memory_report(const model::Model& model, const zo::ZoConfig& cfg,
                           std::size_t batch, std::size_t seq_len);

// Inputs of one layer and the full-precision outputs they produced, frozen at
// probe construction time.
struct LayerProbe {
  LinearId id;
  Tensor input;
  Tensor target;
};
using ProbeSet = std::vector<LayerProbe>;

// Builds probes for `layers` (all attached linears when empty) from the
// captures. Call before weights are pre-quantized.
ProbeSet make_probe_set(const model::Model& model, const calibration::CalibSet& calib,
                        const std::vector<LinearId>& layers = {});

struct TrackRecord {
  std::size_t step = 0;
  std::vector<std::pair<std::string, double>> recon_loss;
  double train_loss = 0.0;
  double eval_loss = 0.0;
  double eval_ppl = 0.0;  // exp(eval_loss)
  // Running peaks since the last reset.
  MemoryReport peak;

  double total_recon() const;
};

class Tracker {
 public:
  // Throws InvalidArgument on an empty eval set or a step that does not
  // increase.
  TrackRecord track(const model::Model& model, const model::Batch& eval_set,
                    const ProbeSet& probes, std::size_t step, double train_loss,
                    const MemoryReport& memory);
  void reset_peaks() { peak_ = {}; }
  const std::vector<TrackRecord>& records() const { return records_; }

 private:
  MemoryReport peak_;
  std::vector<TrackRecord> records_;
};

// Mean squared error of the attached layer against its probe target.
double probe_recon_loss(const model::Model& model, const LayerProbe& probe);

// Fraction of consecutive record pairs whose total reconstruction loss and
// perplexity move with different signs. Throws InvalidArgument on fewer than
// two records.
double inconsistency_score(const std::vector<TrackRecord>& records);
double inconsistency_score(const std::vector<double>& recon, const std::vector<double>& ppl);

// Header step,layer_id,recon_loss,train_loss,eval_ppl,bytes_params,
// bytes_frozen,bytes_opt,bytes_fwd; one row per probed layer.
void write_track_header(std::ostream& out);
void write_track_rows(std::ostream& out, const TrackRecord& r);

}  // namespace zoqat::diagnostics

#endif  // ZOQAT_DIAGNOSTICS_DIAGNOSTICS_H_
