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

#include "zoqat/model/model.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "zoqat/error.h"
#include "zoqat/numerics/rng.h"

namespace zoqat::model {
namespace {

using numerics::Granularity;
using numerics::matmul;
using numerics::shape_string;

// Stream id reserved for weight initialization. ZO streams are derived from
// step indices and never reach this value.
constexpr std::uint64_t kInitStream = 0xFFFF'FFFF'0000'0001ull;

Tensor normal_matrix(numerics::RngStream& rng, std::size_t r, std::size_t c, double std) {
  Tensor t({r, c});
  rng.fill_gaussian(t.values());
  for (double& v : t.values()) v *= std;
  return t;
}

const char* kind_name(LinearKind kind) {
  switch (kind) {
    case LinearKind::kQuery: return "q";
    case LinearKind::kKey: return "k";
    case LinearKind::kValue: return "v";
    case LinearKind::kOutput: return "o";
    case LinearKind::kFfUp: return "ff_up";
    case LinearKind::kFfDown: return "ff_down";
  }
  return "?";
}

bool is_qv(LinearKind kind) {
  return kind == LinearKind::kQuery || kind == LinearKind::kValue;
}

void check_tokens(std::span<const int> tokens, const ModelConfig& cfg) {
  if (tokens.empty()) throw InvalidArgument("forward needs at least one token");
  if (tokens.size() > cfg.context) {
    throw InvalidArgument("sequence length " + std::to_string(tokens.size()) +
                          " exceeds context " + std::to_string(cfg.context));
  }
  for (std::size_t t = 0; t < tokens.size(); ++t) {
    if (tokens[t] < 0 || static_cast<std::size_t>(tokens[t]) >= cfg.vocab_size) {
      throw InvalidArgument("token " + std::to_string(tokens[t]) + " at position " +
                            std::to_string(t) + " is outside vocab of " +
                            std::to_string(cfg.vocab_size));
    }
  }
}

// Quantizer state with every step read through kStepFloor.
const quant::QuantState& floored(const quant::QuantState& st, quant::QuantState& scratch) {
  if (std::all_of(st.step.begin(), st.step.end(), [](double s) { return s >= kStepFloor; })) {
    return st;
  }
  scratch = st;
  for (double& s : scratch.step) s = std::max(s, kStepFloor);
  return scratch;
}

Tensor quantize_tokens(const Tensor& x, const quant::QuantSpec& spec) {
  return quant::fake_quant(x, spec, quant::init_range(x, spec));
}

}  // namespace

void ModelConfig::validate() const {
  if (vocab_size == 0 || d_model == 0 || n_layers == 0 || n_heads == 0 || context == 0) {
    throw InvalidArgument("model sizes must be positive");
  }
  if (d_model % n_heads != 0) {
    throw InvalidArgument("d_model " + std::to_string(d_model) +
                          " is not divisible by n_heads " + std::to_string(n_heads));
  }
  if (!(init_std > 0.0)) throw InvalidArgument("init_std must be positive");
}

quant::QuantSpec QuantConfig::weight_spec() const {
  return {w_bits, weight_scheme,
          group_size == 0 ? Granularity::per_channel(1) : Granularity::per_group(0, group_size),
          quant::Role::kWeight};
}

quant::QuantSpec QuantConfig::act_spec() const {
  return {a_bits, act_scheme, Granularity::per_token(), quant::Role::kActivation};
}

void QuantConfig::validate(const ModelConfig& model) const {
  if (w_bits < 2 || w_bits > 16) {
    throw InvalidArgument("w_bits must lie in [2, 16], got " + std::to_string(w_bits));
  }
  if (a_bits < 2 || a_bits > 16) {
    throw InvalidArgument("a_bits must lie in [2, 16], got " + std::to_string(a_bits));
  }
  if (group_size != 0 && model.d_model % group_size != 0) {
    throw InvalidArgument("group size " + std::to_string(group_size) +
                          " does not divide d_model " + std::to_string(model.d_model));
  }
}

std::string LinearId::name() const {
  return "layer" + std::to_string(layer) + "." + kind_name(kind);
}

std::string to_string(ParamGroupLabel label) {
  switch (label) {
    case ParamGroupLabel::kWeights: return "weights";
    case ParamGroupLabel::kSmoothing: return "smoothing";
    case ParamGroupLabel::kClipping: return "clipping";
    case ParamGroupLabel::kQuantAffine: return "quant_affine";
  }
  return "?";
}

std::size_t ParamView::count() const {
  std::size_t n = 0;
  for (const auto& s : slices) n += s.values.size();
  return n;
}

std::size_t ParamView::count(ParamGroupLabel group) const {
  std::size_t n = 0;
  for (const auto& s : slices) {
    if (s.group == group) n += s.values.size();
  }
  return n;
}

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  const std::size_t d = config_.d_model;
  const std::size_t f = config_.d_ff();
  const double sd = config_.init_std;
  numerics::RngStream rng(seed, kInitStream);
  tok_emb_ = normal_matrix(rng, config_.vocab_size, d, sd);
  pos_ = sinusoidal_table(config_.context, d);
  blocks_.resize(config_.n_layers);
  for (Block& b : blocks_) {
    b.ln1_gain = Tensor::filled({1, d}, 1.0);
    b.ln1_bias = Tensor({1, d});
    b.ln2_gain = Tensor::filled({1, d}, 1.0);
    b.ln2_bias = Tensor({1, d});
    for (LinearKind kind : kLinearKinds) {
      const std::size_t in = kind == LinearKind::kFfDown ? f : d;
      const std::size_t out = kind == LinearKind::kFfUp ? f : d;
      Linear& lin = b.linear(kind);
      lin.weight = normal_matrix(rng, in, out, sd);
      lin.bias = Tensor({1, out});
    }
  }
  lnf_gain_ = Tensor::filled({1, d}, 1.0);
  lnf_bias_ = Tensor({1, d});
  head_w_ = normal_matrix(rng, d, config_.vocab_size, sd);
  head_b_ = Tensor({1, config_.vocab_size});
}

void Model::attach_quantizers(const QuantConfig& quant) {
  quant.validate(config_);
  if (lightweight_) throw InvalidState("attach quantizers before set_lightweight");
  quant_ = quant;
  for (Block& b : blocks_) {
    for (Linear& lin : b.linears) {
      LayerAttachment att;
      att.weight_spec = quant.weight_spec();
      if (quant.mode == QuantMode::kWeightActivation) {
        att.act_spec = quant.act_spec();
        att.smoothing = smoothing::SmoothingParams::identity(lin.weight.rows());
      }
      att.weight_state = quant::init_range(lin.weight, att.weight_spec);
      lin.attachment = std::move(att);
    }
  }
}

std::vector<LinearId> Model::linear_ids() const {
  std::vector<LinearId> ids;
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    for (LinearKind kind : kLinearKinds) ids.push_back({l, kind});
  }
  return ids;
}

Tensor Model::forward(std::span<const int> tokens, Mode mode) const {
  return forward_batch(Batch{Sequence(tokens.begin(), tokens.end())}, mode)[0];
}

Tensor Model::forward(const Tensor& tokens, Mode mode) const {
  if (tokens.rank() != 1) throw InvalidArgument("token tensor must be rank 1");
  Sequence seq(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    const double v = tokens[i];
    if (v != std::floor(v) || v < 0 || v >= static_cast<double>(config_.vocab_size)) {
      throw InvalidArgument("token value " + std::to_string(v) + " at position " +
                            std::to_string(i) + " is not a valid id");
    }
    seq[i] = static_cast<int>(v);
  }
  return forward(seq, mode);
}

std::vector<Tensor> Model::forward_batch(const Batch& batch, Mode mode) const {
  std::vector<std::size_t> offsets;
  const Tensor logits = run(batch, mode, &offsets);
  const std::size_t v = config_.vocab_size;
  std::vector<Tensor> out;
  out.reserve(batch.size());
  for (std::size_t s = 0; s < batch.size(); ++s) {
    const std::size_t t = batch[s].size();
    std::vector<double> rows(logits.values().begin() + offsets[s] * v,
                             logits.values().begin() + (offsets[s] + t) * v);
    out.emplace_back(Shape{t, v}, std::move(rows));
  }
  return out;
}

Tensor Model::run(const Batch& batch, Mode mode, std::vector<std::size_t>* offsets) const {
  if (batch.empty()) throw InvalidArgument("forward needs a non-empty batch");
  const std::size_t d = config_.d_model;
  const std::size_t heads = config_.n_heads;
  const std::size_t dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const bool derive = quant_ && quant_->derive_weight_affine;

  offsets->assign(batch.size(), 0);
  std::size_t n = 0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    check_tokens(batch[s], config_);
    (*offsets)[s] = n;
    n += batch[s].size();
  }

  Tensor h({n, d});
  for (std::size_t s = 0; s < batch.size(); ++s) {
    for (std::size_t t = 0; t < batch[s].size(); ++t) {
      const auto e = tok_emb_.row(static_cast<std::size_t>(batch[s][t]));
      const auto p = pos_.row(t);
      auto dst = h.row((*offsets)[s] + t);
      for (std::size_t j = 0; j < d; ++j) dst[j] = e[j] + p[j];
    }
  }

  auto apply = [&](std::size_t layer, LinearKind kind, const Tensor& x) {
    if (observer_) observer_(LinearId{layer, kind}, x);
    return linear_forward(blocks_[layer].linear(kind), x, mode, derive);
  };

  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    const Block& blk = blocks_[l];
    const Tensor a = layer_norm(h, blk.ln1_gain, blk.ln1_bias);
    const Tensor q = apply(l, LinearKind::kQuery, a);
    const Tensor k = apply(l, LinearKind::kKey, a);
    const Tensor v = apply(l, LinearKind::kValue, a);
    Tensor ctx({n, d});
    for (std::size_t s = 0; s < batch.size(); ++s) {
      const std::size_t t_len = batch[s].size();
      const std::size_t base = (*offsets)[s];
      for (std::size_t hd = 0; hd < heads; ++hd) {
        Tensor qh({t_len, dh}), kh({t_len, dh});
        for (std::size_t t = 0; t < t_len; ++t) {
          for (std::size_t j = 0; j < dh; ++j) {
            qh(t, j) = q(base + t, hd * dh + j);
            kh(t, j) = k(base + t, hd * dh + j);
          }
        }
        const Tensor probs = causal_attention_probs(qh, kh, scale);
        for (std::size_t t = 0; t < t_len; ++t) {
          for (std::size_t u = 0; u <= t; ++u) {
            const double p = probs(t, u);
            for (std::size_t j = 0; j < dh; ++j) {
              ctx(base + t, hd * dh + j) += p * v(base + u, hd * dh + j);
            }
          }
        }
      }
    }
    const Tensor o = apply(l, LinearKind::kOutput, ctx);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += o[i];

    const Tensor a2 = layer_norm(h, blk.ln2_gain, blk.ln2_bias);
    Tensor up = apply(l, LinearKind::kFfUp, a2);
    for (double& x : up.values()) x = gelu(x);
    const Tensor down = apply(l, LinearKind::kFfDown, up);
    for (std::size_t i = 0; i < h.size(); ++i) h[i] += down[i];
  }
  return linear_fp(layer_norm(h, lnf_gain_, lnf_bias_), head_w_, head_b_);
}

double Model::loss(const Batch& batch, Mode mode) const {
  for (const Sequence& s : batch) {
    if (s.size() < 2) throw InvalidArgument("loss needs sequences of length >= 2");
  }
  const std::vector<Tensor> logits = forward_batch(batch, mode);
  double total = 0.0;
  std::size_t predicted = 0;
  for (std::size_t s = 0; s < batch.size(); ++s) {
    std::size_t k = 0;
    const double mean = sequence_cross_entropy(logits[s], batch[s], &k);
    total += mean * static_cast<double>(k);
    predicted += k;
  }
  return total / static_cast<double>(predicted);
}

void Model::set_lightweight() {
  const bool derive = quant_ && quant_->derive_weight_affine;
  for (Block& b : blocks_) {
    for (LinearKind kind : kLinearKinds) {
      Linear& lin = b.linear(kind);
      if (is_qv(kind)) {
        lin.weight_trainable = true;
        if (lin.attachment) lin.attachment->trainable = false;
        continue;
      }
      lin.weight_trainable = false;
      if (lin.attachment && !lin.attachment->pre_quantized) {
        EffectiveWeights ew = effective_weights(lin, derive);
        lin.weight = std::move(ew.weight);
        lin.bias = std::move(ew.bias);
        lin.attachment->pre_quantized = true;
        lin.attachment->trainable = false;
      }
    }
  }
  lightweight_ = true;
}

void Model::restore_lightweight_flags() {
  for (Block& b : blocks_) {
    for (LinearKind kind : kLinearKinds) {
      Linear& lin = b.linear(kind);
      lin.weight_trainable = is_qv(kind);
      if (lin.attachment) {
        lin.attachment->trainable = false;
        lin.attachment->pre_quantized = !is_qv(kind);
      }
    }
  }
  lightweight_ = true;
}

ParamView Model::trainable_parameters() {
  ParamView view;
  auto add = [&](ParamGroupLabel g, std::string name, std::vector<double>& v) {
    view.slices.push_back({g, std::move(name), std::span<double>(v)});
  };
  const auto W = ParamGroupLabel::kWeights;
  const bool derive = quant_ && quant_->derive_weight_affine;

  if (!lightweight_) add(W, "tok_emb", tok_emb_.storage());
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    Block& b = blocks_[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    auto add_linear = [&](LinearKind kind) {
      Linear& lin = b.linear(kind);
      const std::string nm = LinearId{l, kind}.name();
      if (lin.weight_trainable) add(W, nm + ".weight", lin.weight.storage());
      if (!lightweight_) add(W, nm + ".bias", lin.bias.storage());
    };
    if (!lightweight_) {
      add(W, p + "ln1_gain", b.ln1_gain.storage());
      add(W, p + "ln1_bias", b.ln1_bias.storage());
    }
    for (LinearKind kind : {LinearKind::kQuery, LinearKind::kKey, LinearKind::kValue,
                            LinearKind::kOutput}) {
      add_linear(kind);
    }
    if (!lightweight_) {
      add(W, p + "ln2_gain", b.ln2_gain.storage());
      add(W, p + "ln2_bias", b.ln2_bias.storage());
    }
    add_linear(LinearKind::kFfUp);
    add_linear(LinearKind::kFfDown);
  }
  if (!lightweight_) {
    add(W, "lnf_gain", lnf_gain_.storage());
    add(W, "lnf_bias", lnf_bias_.storage());
    add(W, "head.weight", head_w_.storage());
    add(W, "head.bias", head_b_.storage());
  }

  auto for_attached = [&](auto&& fn) {
    for (const LinearId& id : linear_ids()) {
      Linear& lin = linear(id);
      if (lin.attachment && lin.attachment->trainable) fn(id.name(), *lin.attachment);
    }
  };
  for_attached([&](const std::string& nm, LayerAttachment& att) {
    if (!att.smoothing) return;
    add(ParamGroupLabel::kSmoothing, nm + ".smooth_scale", att.smoothing->scale);
    add(ParamGroupLabel::kSmoothing, nm + ".smooth_shift", att.smoothing->shift);
  });
  for_attached([&](const std::string& nm, LayerAttachment& att) {
    add(ParamGroupLabel::kClipping, nm + ".clip_lo", att.weight_state.clip_lo);
    add(ParamGroupLabel::kClipping, nm + ".clip_hi", att.weight_state.clip_hi);
  });
  if (!derive) {
    for_attached([&](const std::string& nm, LayerAttachment& att) {
      add(ParamGroupLabel::kQuantAffine, nm + ".step", att.weight_state.step);
      add(ParamGroupLabel::kQuantAffine, nm + ".zero_point", att.weight_state.zero_point);
    });
  }
  return view;
}

std::size_t Model::trainable_count() const {
  return const_cast<Model*>(this)->trainable_parameters().count();
}

std::size_t Model::total_parameter_count() const {
  std::size_t n = tok_emb_.size() + lnf_gain_.size() + lnf_bias_.size() + head_w_.size() +
                  head_b_.size();
  for (const Block& b : blocks_) {
    n += b.ln1_gain.size() + b.ln1_bias.size() + b.ln2_gain.size() + b.ln2_bias.size();
    for (const Linear& lin : b.linears) n += lin.weight.size() + lin.bias.size();
  }
  return n;
}

void Model::project_constraints() {
  for (Block& b : blocks_) {
    for (Linear& lin : b.linears) {
      if (!lin.attachment) continue;
      LayerAttachment& att = *lin.attachment;
      if (att.smoothing) att.smoothing->clamp_scale();
      quant::QuantState& st = att.weight_state;
      const double q_p = att.weight_spec.q_p();
      for (std::size_t g = 0; g < st.group_count(); ++g) {
        st.step[g] = std::max(st.step[g], kStepFloor);
        if (!(st.clip_lo[g] < st.clip_hi[g])) {
          const double mid = 0.5 * (st.clip_lo[g] + st.clip_hi[g]);
          st.clip_lo[g] = mid - 0.5 / q_p;
          st.clip_hi[g] = mid + 0.5 / q_p;
        }
      }
    }
  }
}

void Model::reinit_weight_ranges() {
  for (Block& b : blocks_) {
    for (Linear& lin : b.linears) {
      if (!lin.attachment || lin.attachment->pre_quantized) continue;
      LayerAttachment& att = *lin.attachment;
      const Tensor w =
          att.smoothing ? smoothing::smooth_weight(lin.weight, *att.smoothing) : lin.weight;
      quant::QuantState fresh = quant::init_range(w, att.weight_spec);
      att.weight_state.step = std::move(fresh.step);
      att.weight_state.zero_point = std::move(fresh.zero_point);
    }
  }
}

std::vector<NamedArray> Model::state_arrays() {
  std::vector<NamedArray> out;
  auto add = [&](std::string name, Tensor& t) {
    out.push_back({std::move(name), t.shape(), &t.storage()});
  };
  auto add_vec = [&](std::string name, std::vector<double>& v) {
    out.push_back({std::move(name), Shape{v.size()}, &v});
  };
  add("tok_emb", tok_emb_);
  for (std::size_t l = 0; l < blocks_.size(); ++l) {
    Block& b = blocks_[l];
    const std::string p = "layer" + std::to_string(l) + ".";
    add(p + "ln1_gain", b.ln1_gain);
    add(p + "ln1_bias", b.ln1_bias);
    add(p + "ln2_gain", b.ln2_gain);
    add(p + "ln2_bias", b.ln2_bias);
    for (LinearKind kind : kLinearKinds) {
      Linear& lin = b.linear(kind);
      const std::string nm = LinearId{l, kind}.name();
      add(nm + ".weight", lin.weight);
      add(nm + ".bias", lin.bias);
      if (!lin.attachment) continue;
      LayerAttachment& att = *lin.attachment;
      add_vec(nm + ".step", att.weight_state.step);
      add_vec(nm + ".zero_point", att.weight_state.zero_point);
      add_vec(nm + ".clip_lo", att.weight_state.clip_lo);
      add_vec(nm + ".clip_hi", att.weight_state.clip_hi);
      if (att.smoothing) {
        add_vec(nm + ".smooth_scale", att.smoothing->scale);
        add_vec(nm + ".smooth_shift", att.smoothing->shift);
      }
    }
  }
  add("lnf_gain", lnf_gain_);
  add("lnf_bias", lnf_bias_);
  add("head.weight", head_w_);
  add("head.bias", head_b_);
  return out;
}

Tensor linear_fp(const Tensor& x, const Tensor& w, const Tensor& b) {
  Tensor y = matmul(x, w);
  const std::size_t n = y.cols();
  if (b.size() != n) {
    throw DimensionError("bias " + shape_string(b.shape()) + " does not match output " +
                         shape_string(y.shape()));
  }
  for (std::size_t r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    for (std::size_t j = 0; j < n; ++j) row[j] += b[j];
  }
  return y;
}

EffectiveWeights effective_weights(const Linear& lin, bool derive_weight_affine) {
  if (!lin.attachment) throw InvalidState("layer has no quantizer attachment");
  const LayerAttachment& att = *lin.attachment;
  Tensor w = att.smoothing ? smoothing::smooth_weight(lin.weight, *att.smoothing) : lin.weight;
  Tensor b = att.smoothing ? smoothing::smooth_bias(lin.bias, lin.weight, *att.smoothing)
                           : lin.bias;
  quant::QuantState scratch;
  const quant::QuantState* st = &floored(att.weight_state, scratch);
  if (derive_weight_affine) {
    quant::QuantState fresh = quant::init_range(w, att.weight_spec);
    fresh.clip_lo = att.weight_state.clip_lo;
    fresh.clip_hi = att.weight_state.clip_hi;
    scratch = std::move(fresh);
    st = &scratch;
  }
  return {quant::fake_quant(w, att.weight_spec, *st), std::move(b)};
}

Tensor linear_forward(const Linear& lin, const Tensor& x, Mode mode, bool derive_weight_affine) {
  if (!lin.attachment) return linear_fp(x, lin.weight, lin.bias);
  const LayerAttachment& att = *lin.attachment;
  if (mode == Mode::kFullPrecision && !att.pre_quantized) {
    return linear_fp(x, lin.weight, lin.bias);
  }
  Tensor xs = att.smoothing ? smoothing::smooth_activation(x, *att.smoothing) : x;
  if (mode == Mode::kQat && att.act_spec) xs = quantize_tokens(xs, *att.act_spec);
  if (att.pre_quantized) return linear_fp(xs, lin.weight, lin.bias);
  const EffectiveWeights ew = effective_weights(lin, derive_weight_affine);
  return linear_fp(xs, ew.weight, ew.bias);
}

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  const std::size_t d = x.cols();
  if (gain.size() != d || bias.size() != d) {
    throw DimensionError("layer_norm parameters do not match width " + std::to_string(d));
  }
  Tensor y(x.shape());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto in = x.row(r);
    double mean = 0.0;
    for (double v : in) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : in) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    auto out = y.row(r);
    for (std::size_t j = 0; j < d; ++j) out[j] = (in[j] - mean) * inv * gain[j] + bias[j];
  }
  return y;
}

double gelu(double x) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2 / pi)
  return 0.5 * x * (1.0 + std::tanh(kC * (x + 0.044715 * x * x * x)));
}

Tensor causal_attention_probs(const Tensor& q, const Tensor& k, double scale) {
  if (q.rank() != 2 || k.rank() != 2 || q.shape() != k.shape()) {
    throw DimensionError("attention needs equal q/k shapes, got " + shape_string(q.shape()) +
                         " and " + shape_string(k.shape()));
  }
  const std::size_t t_len = q.rows();
  const std::size_t dh = q.cols();
  Tensor p({t_len, t_len});
  for (std::size_t t = 0; t < t_len; ++t) {
    const auto qr = q.row(t);
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t u = 0; u <= t; ++u) {
      const auto kr = k.row(u);
      double s = 0.0;
      for (std::size_t j = 0; j < dh; ++j) s += qr[j] * kr[j];
      p(t, u) = s * scale;
      mx = std::max(mx, p(t, u));
    }
    double z = 0.0;
    for (std::size_t u = 0; u <= t; ++u) {
      p(t, u) = std::exp(p(t, u) - mx);
      z += p(t, u);
    }
    for (std::size_t u = 0; u <= t; ++u) p(t, u) /= z;
  }
  return p;
}

Tensor sinusoidal_table(std::size_t context, std::size_t d) {
  Tensor t({context, d});
  for (std::size_t pos = 0; pos < context; ++pos) {
    for (std::size_t i = 0; i < d; ++i) {
      const double freq = std::pow(10000.0, -static_cast<double>(2 * (i / 2)) / static_cast<double>(d));
      const double a = static_cast<double>(pos) * freq;
      t(pos, i) = (i % 2 == 0) ? std::sin(a) : std::cos(a);
    }
  }
  return t;
}

double sequence_cross_entropy(const Tensor& logits, std::span<const int> tokens,
                              std::size_t* predicted) {
  if (tokens.size() < 2 || logits.rows() < tokens.size() - 1) {
    throw InvalidArgument("cross-entropy needs at least two tokens");
  }
  const std::size_t v = logits.cols();
  double total = 0.0;
  for (std::size_t t = 0; t + 1 < tokens.size(); ++t) {
    const auto row = logits.row(t);
    const double mx = *std::max_element(row.begin(), row.end());
    double z = 0.0;
    for (std::size_t j = 0; j < v; ++j) z += std::exp(row[j] - mx);
    total += (mx + std::log(z)) - row[static_cast<std::size_t>(tokens[t + 1])];
  }
  const std::size_t n = tokens.size() - 1;
  if (predicted) *predicted = n;
  return total / static_cast<double>(n);
}

}  // namespace zoqat::model
