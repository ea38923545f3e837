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

#include "zoqat/calibration/calibration.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <iomanip>
#include <ostream>

#include "zoqat/error.h"

namespace zoqat::calibration {
namespace {

using model::Linear;
using numerics::GroupLayout;
using smoothing::SmoothingParams;

// Concatenates captures and keeps at most `max_rows` evenly spaced rows.
Tensor thin_rows(const std::vector<Tensor>& captures, std::size_t max_rows) {
  std::size_t total = 0;
  const std::size_t d = captures.front().cols();
  for (const Tensor& c : captures) {
    if (c.rank() != 2 || c.cols() != d) {
      throw DimensionError("calibration captures disagree on feature width");
    }
    total += c.rows();
  }
  const std::size_t keep = std::min(total, std::max<std::size_t>(max_rows, 1));
  Tensor out({keep, d});
  std::size_t src_cap = 0, src_row = 0, seen = 0;
  for (std::size_t k = 0; k < keep; ++k) {
    const std::size_t target = k * total / keep;
    while (seen + captures[src_cap].rows() <= target) {
      seen += captures[src_cap].rows();
      ++src_cap;
    }
    src_row = target - seen;
    const auto row = captures[src_cap].row(src_row);
    std::copy(row.begin(), row.end(), out.row(k).begin());
  }
  return out;
}

Tensor quantized_input(const Tensor& x, const LayerAttachment& att) {
  Tensor xs = att.smoothing ? smoothing::smooth_activation(x, *att.smoothing) : x;
  if (att.act_spec) {
    xs = quant::fake_quant(xs, *att.act_spec, quant::init_range(xs, *att.act_spec));
  }
  return xs;
}

double mean_sq_diff(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double e = a[i] - b[i];
    s += e * e;
  }
  return s / static_cast<double>(a.size());
}

void rederive(LayerAttachment& att, const Tensor& w) {
  const Tensor ws = att.smoothing ? smoothing::smooth_weight(w, *att.smoothing) : w;
  quant::QuantState fresh = quant::init_range(ws, att.weight_spec);
  att.weight_state.step = std::move(fresh.step);
  att.weight_state.zero_point = std::move(fresh.zero_point);
}

// Working state of one layer's search.
class LayerSearch {
 public:
  LayerSearch(const Tensor& x, const Tensor& w, const Tensor& b, LayerAttachment att,
              const std::string& name)
      : x_(x), w_(w), b_(b), att_(std::move(att)), name_(name),
        target_(model::linear_fp(x, w, b)) {}

  LayerAttachment& attachment() { return att_; }
  const Tensor& x() const { return x_; }

  double full_loss() const {
    Linear lin{w_, b_, att_, true};
    const model::EffectiveWeights ew = model::effective_weights(lin, false);
    const double loss =
        mean_sq_diff(target_, model::linear_fp(quantized_input(x_, att_), ew.weight, ew.bias));
    if (!std::isfinite(loss)) {
      throw NumericError("calibration loss became non-finite in " + name_);
    }
    return loss;
  }

  // Pattern search on one scalar: probe value +/- step, keep the better side
  // if it beats `current`, then keep doubling the step while that helps.
  // `set` writes a candidate, `eval` returns the loss at the written value.
  double probe(double origin, double step, double current, int max_expansions,
               const std::function<void(double)>& set, const std::function<double()>& eval,
               const std::function<bool(double)>& feasible) {
    double best_v = origin, best = current;
    for (double dir : {1.0, -1.0}) {
      const double v = origin + dir * step;
      if (!feasible(v)) continue;
      set(v);
      const double l = eval();
      if (l < best) {
        best = l;
        best_v = v;
      }
    }
    if (best_v != origin) {
      const double dir = best_v > origin ? 1.0 : -1.0;
      double s = step;
      for (int k = 0; k < max_expansions; ++k) {
        s *= 2.0;
        const double v = origin + dir * s;
        if (!feasible(v)) break;
        set(v);
        const double l = eval();
        if (!(l < best)) break;
        best = l;
        best_v = v;
      }
    }
    set(best_v);
    return best;
  }

  // Column-local machinery for the clipping coordinates.
  void prepare_columns() {
    xq_ = quantized_input(x_, att_);
    ws_ = att_.smoothing ? smoothing::smooth_weight(w_, *att_.smoothing) : w_;
    bs_ = att_.smoothing ? smoothing::smooth_bias(b_, w_, *att_.smoothing) : b_;
    layout_.emplace(ws_.shape(), att_.weight_spec.granularity);
    col_err_.assign(ws_.cols(), 0.0);
    for (std::size_t c = 0; c < ws_.cols(); ++c) col_err_[c] = column_error(c);
  }

  double column_total() const {
    double s = 0.0;
    for (double e : col_err_) s += e;
    return s / static_cast<double>(target_.size());
  }

  // Squared error of output column c under the current weight state.
  double column_error(std::size_t c) const {
    const std::size_t d1 = ws_.rows(), d2 = ws_.cols();
    std::vector<double> wq(d1);
    const auto& st = att_.weight_state;
    for (std::size_t i = 0; i < d1; ++i) {
      const std::size_t g = layout_->group_of(i * d2 + c);
      wq[i] = quant::fake_quant_scalar(ws_(i, c), std::max(st.step[g], model::kStepFloor),
                                       quant::round_half_even(st.zero_point[g]),
                                       quant::code_bounds(att_.weight_spec, st, g));
    }
    double err = 0.0;
    for (std::size_t r = 0; r < xq_.rows(); ++r) {
      const auto xr = xq_.row(r);
      double y = 0.0;
      for (std::size_t i = 0; i < d1; ++i) y += xr[i] * wq[i];
      const double e = target_(r, c) - (y + bs_[c]);
      err += e * e;
    }
    return err;
  }

  std::size_t column_of_group(std::size_t g) const {
    // Every member of a weight group lives in one output column.
    return layout_->members(g).front() % ws_.cols();
  }

  std::vector<double>& col_err() { return col_err_; }
  std::size_t width() const { return ws_.cols(); }

 private:
  Tensor x_;
  const Tensor& w_;
  const Tensor& b_;
  LayerAttachment att_;
  std::string name_;
  Tensor target_;
  Tensor xq_, ws_, bs_;
  std::optional<GroupLayout> layout_;
  std::vector<double> col_err_;
};

}  // namespace

const LayerCaptures& CalibSet::at(const LinearId& id) const {
  for (const auto& l : layers) {
    if (l.id == id) return l;
  }
  throw InvalidArgument("no captures for " + id.name());
}

std::size_t CalibSet::sample_count() const {
  return layers.empty() ? 0 : layers.front().inputs.size();
}

CalibSet capture_activations(model::Model& model, const model::Batch& sample) {
  if (sample.empty()) throw InvalidArgument("calibration sample is empty");
  CalibSet set;
  for (const LinearId& id : model.linear_ids()) set.layers.push_back({id, {}});
  const std::size_t per_layer = model::kLinearKinds.size();
  model.set_observer([&](const LinearId& id, const Tensor& x) {
    set.layers[id.layer * per_layer + static_cast<std::size_t>(id.kind)].inputs.push_back(x);
  });
  try {
    for (const model::Sequence& seq : sample) model.forward(seq, model::Mode::kFullPrecision);
  } catch (...) {
    model.set_observer(nullptr);
    throw;
  }
  model.set_observer(nullptr);
  return set;
}

double reconstruction_loss(const Tensor& x, const Tensor& w, const Tensor& b,
                           const LayerAttachment& attachment) {
  Linear lin{w, b, attachment, true};
  const model::EffectiveWeights ew = model::effective_weights(lin, false);
  return mean_sq_diff(model::linear_fp(x, w, b),
                      model::linear_fp(quantized_input(x, attachment), ew.weight, ew.bias));
}

ReconstructResult reconstruct_layer(const Tensor& w, const Tensor& b,
                                    const std::vector<Tensor>& captures,
                                    const LayerAttachment& attachment,
                                    const ReconstructOptions& options,
                                    const std::string& layer_name) {
  if (captures.empty()) throw InvalidArgument("reconstruct_layer: no captures for " + layer_name);
  if (captures.front().cols() != w.rows()) {
    throw DimensionError("captures for " + layer_name + " have width " +
                         std::to_string(captures.front().cols()) + ", layer expects " +
                         std::to_string(w.rows()));
  }
  LayerSearch search(thin_rows(captures, options.max_rows), w, b, attachment, layer_name);
  LayerAttachment& att = search.attachment();
  const double before = search.full_loss();
  double cur = before;
  const double q_p = att.weight_spec.q_p();
  const auto never_infeasible = [](double) { return true; };

  // Channel ranges set the shift probe size.
  std::vector<double> channel_range;
  if (att.smoothing) {
    const Tensor& x = search.x();
    channel_range.assign(x.cols(), 0.0);
    for (std::size_t j = 0; j < x.cols(); ++j) {
      double lo = x(0, j), hi = x(0, j);
      for (std::size_t r = 1; r < x.rows(); ++r) {
        lo = std::min(lo, x(r, j));
        hi = std::max(hi, x(r, j));
      }
      channel_range[j] = hi > lo ? hi - lo : 1.0;
    }
  }

  double h_scale = options.log_scale_step;
  double h_shift = options.shift_step;
  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    if (epoch == 0 && att.smoothing && att.act_spec) {
      // Candidate start: absmax-ratio scales with re-derived weight ranges.
      LayerAttachment saved = att;
      att.smoothing = smoothing::absmax_ratio_init(search.x(), w);
      rederive(att, w);
      const double l = search.full_loss();
      if (l < cur) {
        cur = l;
      } else {
        att = std::move(saved);
      }
    }

    if (att.smoothing) {
      SmoothingParams& sp = *att.smoothing;
      for (std::size_t j = 0; j < sp.channels(); ++j) {
        const double s0 = sp.scale[j];
        const double log0 = std::log(s0);
        cur = search.probe(
            log0, h_scale, cur, options.max_expansions,
            [&](double v) { sp.scale[j] = v == log0 ? s0 : std::exp(v); },
            [&] { return search.full_loss(); },
            [&](double v) {
              const double s = std::exp(v);
              return s >= smoothing::kScaleMin && s <= smoothing::kScaleMax;
            });
      }
      for (std::size_t j = 0; j < sp.channels(); ++j) {
        cur = search.probe(
            sp.shift[j], h_shift * channel_range[j], cur, options.max_expansions,
            [&](double v) { sp.shift[j] = v; }, [&] { return search.full_loss(); },
            never_infeasible);
      }
    }

    // Clipping coordinates only touch their own output column.
    search.prepare_columns();
    quant::QuantState& st = att.weight_state;
    const double h_clip = options.clip_step_codes / q_p;
    double col_total = search.column_total();
    for (std::size_t g = 0; g < st.group_count(); ++g) {
      const std::size_t c = search.column_of_group(g);
      auto& col_err = search.col_err();
      for (std::vector<double>* bound : {&st.clip_lo, &st.clip_hi}) {
        const bool is_lo = bound == &st.clip_lo;
        const double n = static_cast<double>(search.x().rows() * search.width());
        const double other = col_total * n - col_err[c];
        col_total = search.probe(
            (*bound)[g], h_clip, col_total, options.max_expansions,
            [&](double v) { (*bound)[g] = v; },
            [&] {
              return (other + search.column_error(c)) / n;
            },
            [&](double v) {
              return is_lo ? v < st.clip_hi[g] && v * q_p >= att.weight_spec.q_n() - 0.5
                           : v > st.clip_lo[g] && v * q_p <= q_p + 0.5;
            });
        col_err[c] = search.column_error(c);
      }
    }
    cur = search.full_loss();

    // Epoch boundary: re-derive the affine parameters, keep them if better.
    LayerAttachment saved = att;
    rederive(att, w);
    const double l = search.full_loss();
    if (l < cur) {
      cur = l;
    } else {
      att = std::move(saved);
    }
    h_scale *= options.step_decay;
    h_shift *= options.step_decay;
  }

  ReconstructResult result;
  result.loss_before = before;
  const double after = search.full_loss();
  if (after <= before) {
    result.smoothing = att.smoothing;
    result.state = att.weight_state;
    result.loss_after = after;
  } else {
    result.smoothing = attachment.smoothing;
    result.state = attachment.weight_state;
    result.loss_after = before;
  }
  return result;
}

double delta_loss(double before, double after) {
  if (!(before > 0.0)) {
    throw InvalidArgument("delta_loss needs a positive baseline loss, got " +
                          std::to_string(before));
  }
  return (before - after) / before;
}

std::vector<LayerReport> calibrate_model(model::Model& model, const CalibSet& calib,
                                         const ReconstructOptions& options) {
  std::vector<LayerReport> reports;
  for (const LinearId& id : model.linear_ids()) {
    Linear& lin = model.linear(id);
    if (!lin.attachment || !lin.attachment->trainable || lin.attachment->pre_quantized) continue;
    const ReconstructResult r = reconstruct_layer(lin.weight, lin.bias, calib.at(id).inputs,
                                                  *lin.attachment, options, id.name());
    lin.attachment->smoothing = r.smoothing;
    lin.attachment->weight_state = r.state;
    const double dl = r.loss_before > 0.0 ? delta_loss(r.loss_before, r.loss_after) : 0.0;
    reports.push_back({id.name(), r.loss_before, r.loss_after, dl});
  }
  return reports;
}

void write_layer_csv(std::ostream& out, const std::vector<LayerReport>& reports) {
  out << "layer_id,loss_before,loss_after,delta_loss\n";
  out << std::setprecision(17);
  for (const auto& r : reports) {
    out << r.layer << ',' << r.loss_before << ',' << r.loss_after << ',' << r.delta_loss << '\n';
  }
}

void rtn_quantize(model::Model& model, const model::QuantConfig& quant) {
  if (!model.quant_config()) model.attach_quantizers(quant);
  for (const LinearId& id : model.linear_ids()) {
    Linear& lin = model.linear(id);
    if (!lin.attachment || lin.attachment->pre_quantized) continue;
    LayerAttachment& att = *lin.attachment;
    if (att.smoothing) att.smoothing = SmoothingParams::identity(lin.weight.rows());
    att.weight_state = quant::init_range(lin.weight, att.weight_spec);
    lin.weight = quant::fake_quant(lin.weight, att.weight_spec, att.weight_state);
    att.pre_quantized = true;
    att.trainable = false;
    lin.weight_trainable = false;
  }
}

}  // namespace zoqat::calibration
