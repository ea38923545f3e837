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

#ifndef ZOQAT_MODEL_MODEL_H_
#define ZOQAT_MODEL_MODEL_H_

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "zoqat/numerics/tensor.h"
#include "zoqat/quant/quantizer.h"
#include "zoqat/smoothing/smoothing.h"

namespace zoqat::model {

using numerics::Shape;
using numerics::Tensor;
using Sequence = std::vector<int>;
using Batch = std::vector<Sequence>;

struct ModelConfig {
  std::size_t vocab_size = 128;
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t context = 128;
  double init_std = 0.02;

  std::size_t d_ff() const { return 4 * d_model; }
  // Throws InvalidArgument on zero sizes or d_model % n_heads != 0.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

enum class QuantMode { kWeightOnly, kWeightActivation };

// Quantization applied to every attached linear layer.
//   group_size == 0: per-output-channel weights, else groups of that many
//   consecutive input rows. Activations are quantized per token, with ranges
//   taken from the live batch, and only in weight-activation mode.
struct QuantConfig {
  int w_bits = 4;
  int a_bits = 16;
  std::size_t group_size = 0;
  QuantMode mode = QuantMode::kWeightOnly;
  quant::Scheme weight_scheme = quant::Scheme::kAsymmetric;
  quant::Scheme act_scheme = quant::Scheme::kAsymmetric;
  // Re-derive step and zero point from the smoothed weight at every forward
  // instead of treating them as trainable parameters.
  bool derive_weight_affine = false;

  quant::QuantSpec weight_spec() const;
  quant::QuantSpec act_spec() const;
  void validate(const ModelConfig& model) const;
  bool operator==(const QuantConfig&) const = default;
};

enum class Mode { kFullPrecision, kQat };

enum class LinearKind { kQuery, kKey, kValue, kOutput, kFfUp, kFfDown };
inline constexpr std::array<LinearKind, 6> kLinearKinds = {
    LinearKind::kQuery,  LinearKind::kKey,  LinearKind::kValue,
    LinearKind::kOutput, LinearKind::kFfUp, LinearKind::kFfDown};

struct LinearId {
  std::size_t layer = 0;
  LinearKind kind = LinearKind::kQuery;

  // e.g. "layer0.q", "layer1.ff_down".
  std::string name() const;
  bool operator==(const LinearId&) const = default;
};

struct LayerAttachment {
  quant::QuantSpec weight_spec;
  quant::QuantState weight_state;
  std::optional<quant::QuantSpec> act_spec;
  // Always empty: activation ranges are dynamic.
  std::optional<quant::QuantState> act_state;
  std::optional<smoothing::SmoothingParams> smoothing;
  bool trainable = true;
  bool pre_quantized = false;
};

// y = x * weight + bias, weight laid out [in x out].
struct Linear {
  Tensor weight;
  Tensor bias;  // [1 x out]
  std::optional<LayerAttachment> attachment;
  // Whether the weight matrix itself is trainable. Biases follow the
  // attachment-independent model-wide rule (frozen under lightweight).
  bool weight_trainable = true;
};

struct Block {
  Tensor ln1_gain, ln1_bias;
  Tensor ln2_gain, ln2_bias;
  std::array<Linear, 6> linears;

  Linear& linear(LinearKind kind) { return linears[static_cast<int>(kind)]; }
  const Linear& linear(LinearKind kind) const {
    return linears[static_cast<int>(kind)];
  }
};

enum class ParamGroupLabel { kWeights, kSmoothing, kClipping, kQuantAffine };
inline constexpr std::array<ParamGroupLabel, 4> kParamGroupLabels = {
    ParamGroupLabel::kWeights, ParamGroupLabel::kSmoothing,
    ParamGroupLabel::kClipping, ParamGroupLabel::kQuantAffine};
std::string to_string(ParamGroupLabel label);

struct ParamSlice {
  ParamGroupLabel group;
  std::string name;
  std::span<double> values;
};

// Ordered, group-major view of the trainable reals: every weights slice
// precedes every smoothing slice, and so on in kParamGroupLabels order.
struct ParamView {
  std::vector<ParamSlice> slices;

  std::size_t count() const;
  std::size_t count(ParamGroupLabel group) const;
};

// Named storage for checkpointing.
struct NamedArray {
  std::string name;
  Shape shape;
  std::vector<double>* data;
};

// Called with the full-precision input of every linear layer during forward.
using LinearObserver = std::function<void(const LinearId&, const Tensor&)>;

// Decoder-only pre-LayerNorm transformer over byte tokens.
//
// Embeddings, LayerNorms and the output head stay full precision. Each block
// has six linear layers that can carry quantizer and smoothing attachments.
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const std::optional<QuantConfig>& quant_config() const { return quant_; }
  bool lightweight() const { return lightweight_; }

  // Creates attachments on every linear layer, range-initialized from the
  // current weights. Smoothing starts at identity in weight-activation mode.
  void attach_quantizers(const QuantConfig& quant);

  // Logits [T x vocab] for one sequence, 1 <= T <= context.
  Tensor forward(std::span<const int> tokens, Mode mode) const;
  // Token ids given as an integer-valued rank-1 tensor.
  Tensor forward(const Tensor& tokens, Mode mode) const;
  // One logits tensor per sequence; rows of all sequences share the linear
  // layer kernels.
  std::vector<Tensor> forward_batch(const Batch& batch, Mode mode) const;

  // Mean next-token cross-entropy in nats over all predicted positions.
  double loss(const Batch& batch, Mode mode) const;

  // Freezes and pre-quantizes everything except the Q and V weights.
  void set_lightweight();

  ParamView trainable_parameters();
  std::size_t trainable_count() const;
  std::size_t total_parameter_count() const;

  // Restores attachment invariants after an update: scales clamped, steps
  // floored, clip_lo < clip_hi.
  void project_constraints();

  // Re-derives step and zero point of every trainable attachment from its
  // current smoothed weight. Clipping coefficients are kept.
  void reinit_weight_ranges();

  void set_observer(LinearObserver observer) { observer_ = std::move(observer); }

  Block& block(std::size_t i) { return blocks_.at(i); }
  const Block& block(std::size_t i) const { return blocks_.at(i); }
  Linear& linear(const LinearId& id) { return block(id.layer).linear(id.kind); }
  const Linear& linear(const LinearId& id) const { return block(id.layer).linear(id.kind); }
  std::vector<LinearId> linear_ids() const;

  Tensor& token_embedding() { return tok_emb_; }
  const Tensor& token_embedding() const { return tok_emb_; }
  const Tensor& positional() const { return pos_; }
  const Tensor& final_gain() const { return lnf_gain_; }
  const Tensor& final_bias() const { return lnf_bias_; }
  const Tensor& head_weight() const { return head_w_; }
  const Tensor& head_bias() const { return head_b_; }

  // Every stored real, in a fixed order.
  std::vector<NamedArray> state_arrays();
  // Marks the model lightweight without re-quantizing; used when loading a
  // checkpoint whose arrays already hold pre-quantized values.
  void restore_lightweight_flags();

 private:
  Tensor run(const Batch& batch, Mode mode, std::vector<std::size_t>* offsets) const;

  ModelConfig config_;
  std::optional<QuantConfig> quant_;
  bool lightweight_ = false;
  Tensor tok_emb_;  // [vocab x d]
  Tensor pos_;      // [context x d], fixed sinusoidal
  std::vector<Block> blocks_;
  Tensor lnf_gain_, lnf_bias_;
  Tensor head_w_;  // [d x vocab]
  Tensor head_b_;  // [1 x vocab]
  LinearObserver observer_;
};

// Building blocks, exposed for oracles and calibration.
inline constexpr double kLayerNormEps = 1e-5;
// Steps are read through max(step, kStepFloor) during forward so that a
// perturbation through zero cannot flip the quantization grid.
inline constexpr double kStepFloor = 1e-8;

Tensor linear_fp(const Tensor& x, const Tensor& w, const Tensor& b);
// The attached computation: fq_a(x_bar) * fq_w(w_bar) + b_bar, or the
// pre-quantized shortcut. Falls back to linear_fp without an attachment or
// in full-precision mode (a pre-quantized layer still divides by s there).
Tensor linear_forward(const Linear& lin, const Tensor& x, Mode mode,
                      bool derive_weight_affine = false);
// Smoothed, fake-quantized weight and adjusted bias of an attached layer.
struct EffectiveWeights {
  Tensor weight;
  Tensor bias;
};
EffectiveWeights effective_weights(const Linear& lin, bool derive_weight_affine);

Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias);
double gelu(double x);
// Row-wise causal softmax of scale * q k^T; q, k are [T x dh].
Tensor causal_attention_probs(const Tensor& q, const Tensor& k, double scale);
Tensor sinusoidal_table(std::size_t context, std::size_t d);
// Mean next-token cross-entropy of one sequence's logits.
double sequence_cross_entropy(const Tensor& logits, std::span<const int> tokens,
                              std::size_t* predicted = nullptr);

}  // namespace zoqat::model

#endif  // ZOQAT_MODEL_MODEL_H_
