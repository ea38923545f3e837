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

#include "zoqat/diagnostics/diagnostics.h"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "zoqat/error.h"

namespace zoqat::diagnostics {
namespace {

Tensor concat_rows(const std::vector<Tensor>& parts) {
  std::size_t rows = 0;
  for (const Tensor& p : parts) rows += p.rows();
  Tensor out({rows, parts.front().cols()});
  std::size_t r = 0;
  for (const Tensor& p : parts) {
    std::copy(p.storage().begin(), p.storage().end(),
              out.storage().begin() + static_cast<std::ptrdiff_t>(r * out.cols()));
    r += p.rows();
  }
  return out;
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

MemoryReport memory_report(const model::Model& model, const zo::ZoConfig& cfg,
                           std::size_t batch, std::size_t seq_len) {
  auto& m = const_cast<model::Model&>(model);
  std::size_t stored = 0;
  for (const model::NamedArray& a : m.state_arrays()) stored += a.data->size();
  const std::size_t trainable = m.trainable_count();
  std::size_t packed_scalars = 0, packed_bits = 0;
  for (const LinearId& id : m.linear_ids()) {
    const model::Linear& lin = m.linear(id);
    if (!lin.attachment || !lin.attachment->pre_quantized) continue;
    packed_scalars += lin.weight.size();
    packed_bits += lin.weight.size() * static_cast<std::size_t>(lin.attachment->weight_spec.bits);
  }
  MemoryReport r;
  r.parameters = trainable * sizeof(double);
  r.quantized_frozen = (packed_bits + 7) / 8;
  r.frozen_full_precision = (stored - trainable - packed_scalars) * sizeof(double);
  r.optimizer_state = zo::optimizer_state_size(cfg);
  const auto& c = model.config();
  const std::size_t widest =
      std::max({4 * c.d_model + c.n_heads * seq_len, 2 * c.d_ff(), c.vocab_size});
  r.transient_forward = sizeof(double) * batch * seq_len * (2 * c.d_model + widest);
  return r;
}

ProbeSet make_probe_set(const model::Model& model, const calibration::CalibSet& calib,
                        const std::vector<LinearId>& layers) {
  const std::vector<LinearId> ids = layers.empty() ? model.linear_ids() : layers;
  ProbeSet probes;
  for (const LinearId& id : ids) {
    const model::Linear& lin = model.linear(id);
    if (lin.attachment && lin.attachment->pre_quantized) {
      throw InvalidState("probe for " + id.name() + " built after pre-quantization");
    }
    Tensor x = concat_rows(calib.at(id).inputs);
    Tensor y = model::linear_fp(x, lin.weight, lin.bias);
    probes.push_back({id, std::move(x), std::move(y)});
  }
  return probes;
}

double probe_recon_loss(const model::Model& model, const LayerProbe& probe) {
  const model::Linear& lin = model.linear(probe.id);
  const bool derive = model.quant_config() && model.quant_config()->derive_weight_affine;
  const Tensor y = model::linear_forward(lin, probe.input, model::Mode::kQat, derive);
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    const double e = y[i] - probe.target[i];
    s += e * e;
  }
  return s / static_cast<double>(y.size());
}

double TrackRecord::total_recon() const {
  double s = 0.0;
  for (const auto& [name, v] : recon_loss) s += v;
  return s;
}

TrackRecord Tracker::track(const model::Model& model, const model::Batch& eval_set,
                           const ProbeSet& probes, std::size_t step, double train_loss,
                           const MemoryReport& memory) {
  if (eval_set.empty()) throw InvalidArgument("tracking needs a nonempty eval set");
  if (!records_.empty() && step <= records_.back().step) {
    throw InvalidArgument("track steps must increase");
  }
  TrackRecord r;
  r.step = step;
  for (const LayerProbe& p : probes) r.recon_loss.emplace_back(p.id.name(), probe_recon_loss(model, p));
  r.train_loss = train_loss;
  r.eval_loss = model.loss(eval_set, model::Mode::kQat);
  r.eval_ppl = std::exp(r.eval_loss);
  peak_.parameters = std::max(peak_.parameters, memory.parameters);
  peak_.quantized_frozen = std::max(peak_.quantized_frozen, memory.quantized_frozen);
  peak_.frozen_full_precision =
      std::max(peak_.frozen_full_precision, memory.frozen_full_precision);
  peak_.optimizer_state = std::max(peak_.optimizer_state, memory.optimizer_state);
  peak_.transient_forward = std::max(peak_.transient_forward, memory.transient_forward);
  r.peak = peak_;
  records_.push_back(r);
  return r;
}

double inconsistency_score(const std::vector<double>& recon, const std::vector<double>& ppl) {
  if (recon.size() != ppl.size()) throw DimensionError("series lengths differ");
  if (recon.size() < 2) throw InvalidArgument("inconsistency_score needs at least 2 records");
  std::size_t disagree = 0;
  for (std::size_t i = 1; i < recon.size(); ++i) {
    if (sign(recon[i] - recon[i - 1]) != sign(ppl[i] - ppl[i - 1])) ++disagree;
  }
  return static_cast<double>(disagree) / static_cast<double>(recon.size() - 1);
}

double inconsistency_score(const std::vector<TrackRecord>& records) {
  std::vector<double> recon, ppl;
  for (const TrackRecord& r : records) {
    recon.push_back(r.total_recon());
    ppl.push_back(r.eval_ppl);
  }
  return inconsistency_score(recon, ppl);
}

void write_track_header(std::ostream& out) {
  out << "step,layer_id,recon_loss,train_loss,eval_ppl,bytes_params,bytes_frozen,bytes_opt,"
         "bytes_fwd\n";
}

void write_track_rows(std::ostream& out, const TrackRecord& r) {
  out << std::setprecision(17);
  auto row = [&](const std::string& layer, double recon) {
    out << r.step << ',' << layer << ',' << recon << ',' << r.train_loss << ',' << r.eval_ppl
        << ',' << r.peak.parameters << ',' << r.peak.frozen() << ',' << r.peak.optimizer_state
        << ',' << r.peak.transient_forward << '\n';
  };
  if (r.recon_loss.empty()) row("none", 0.0);
  for (const auto& [name, v] : r.recon_loss) row(name, v);
}

}  // namespace zoqat::diagnostics
