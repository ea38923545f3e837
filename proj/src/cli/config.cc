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

#include "zoqat/cli/config.h"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <cctype>
#include <map>
#include <regex>
#include <set>

#include "zoqat/error.h"

namespace zoqat::cli {
namespace {

using nlohmann::json;

std::string scheme_name(quant::Scheme s) {
  return s == quant::Scheme::kSymmetric ? "symmetric" : "asymmetric";
}

quant::Scheme parse_scheme(const std::string& s) {
  if (s == "symmetric") return quant::Scheme::kSymmetric;
  if (s == "asymmetric") return quant::Scheme::kAsymmetric;
  throw InvalidArgument("unknown quantization scheme '" + s + "'");
}

std::string schedule_name(zo::LrSchedule s) {
  return s == zo::LrSchedule::kConstant ? "constant" : "linear_decay";
}

zo::LrSchedule parse_schedule(const std::string& s) {
  if (s == "constant") return zo::LrSchedule::kConstant;
  if (s == "linear_decay") return zo::LrSchedule::kLinearDecay;
  throw InvalidArgument("unknown lr schedule '" + s + "'");
}

template <typename T>
T parse_value(const std::string& key, const std::string& text) {
  try {
    std::size_t used = 0;
    T v{};
    if constexpr (std::is_same_v<T, double>) {
      v = std::stod(text, &used);
    } else if constexpr (std::is_same_v<T, bool>) {
      if (text == "true" || text == "1") return true;
      if (text == "false" || text == "0") return false;
      throw InvalidArgument("");
    } else if constexpr (std::is_signed_v<T>) {
      v = static_cast<T>(std::stoll(text, &used));
    } else {
      if (!text.empty() && text[0] == '-') throw InvalidArgument("");
      v = static_cast<T>(std::stoull(text, &used));
    }
    if (used != text.size()) throw InvalidArgument("");
    return v;
  } catch (const std::exception&) {
    throw InvalidArgument("config key '" + key + "' has invalid value '" + text + "'");
  }
}

}  // namespace

QuantNotation parse_quant_notation(const std::string& text) {
  static const std::regex re("[Ww]([0-9]+)[Aa]([0-9]+)(?:[Gg]([0-9]+))?");
  std::smatch m;
  if (!std::regex_match(text, m, re)) {
    throw InvalidArgument("quantization '" + text + "' is not of the form W{w}A{a}[g{gs}]");
  }
  QuantNotation n;
  try {
    n.w_bits = std::stoi(m[1]);
    n.a_bits = std::stoi(m[2]);
    n.group_size = m[3].matched ? std::stoull(m[3]) : 0;
  } catch (const std::exception&) {
    throw InvalidArgument("quantization '" + text + "' has out-of-range numbers");
  }
  if (n.w_bits < 2 || n.w_bits > 16 || n.a_bits < 2 || n.a_bits > 16) {
    throw InvalidArgument("quantization '" + text + "': bits must lie in [2, 16]");
  }
  if (m[3].matched && n.group_size == 0) {
    throw InvalidArgument("quantization '" + text + "': group size must be positive");
  }
  return n;
}

std::string format_quant_notation(const QuantNotation& n) {
  std::string s = "W" + std::to_string(n.w_bits) + "A" + std::to_string(n.a_bits);
  if (n.group_size > 0) s += "g" + std::to_string(n.group_size);
  return s;
}

model::QuantConfig to_quant_config(const QuantNotation& n) {
  model::QuantConfig q;
  q.w_bits = n.w_bits;
  q.a_bits = n.a_bits;
  q.group_size = n.group_size;
  q.mode = n.a_bits < 16 ? model::QuantMode::kWeightActivation : model::QuantMode::kWeightOnly;
  return q;
}

QuantNotation notation_of(const model::QuantConfig& q) {
  const int a = q.mode == model::QuantMode::kWeightActivation ? q.a_bits : 16;
  return {q.w_bits, a, q.group_size};
}

std::size_t CalibSettings::effective_epochs(const model::QuantConfig& q) const {
  if (epochs > 0) return epochs;
  return q.mode == model::QuantMode::kWeightActivation ? 2 : 4;
}

std::filesystem::path RunConfig::metrics_path() const {
  return metrics_dir.empty() ? std::filesystem::path(out_dir) / "metrics"
                             : std::filesystem::path(metrics_dir);
}

std::filesystem::path RunConfig::checkpoint_path() const {
  return std::filesystem::path(out_dir) / "checkpoint.zqc";
}

void RunConfig::validate() const {
  model.validate();
  if (quant) quant->validate(model);
  zo.validate();
  if (train.eval_interval == 0) throw InvalidArgument("eval_interval must be >= 1");
  if (calib.samples == 0 || calib.seq_len < 2) {
    throw InvalidArgument("calibration needs >= 1 sample of >= 2 tokens");
  }
  if (calib.seq_len > model.context) {
    throw InvalidArgument("calibration seq_len exceeds the model context");
  }
  if (out_dir.empty()) throw InvalidArgument("out_dir must be set");
}

RunConfig load_config(const std::filesystem::path& path) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(path.string(), tree);
  } catch (const pt::ini_parser_error& e) {
    throw DataError("cannot read config " + path.string() + ": " + e.message());
  }
  RunConfig c;
  std::optional<QuantNotation> notation;
  bool quant_none = false;
  quant::Scheme w_scheme = quant::Scheme::kAsymmetric, a_scheme = quant::Scheme::kAsymmetric;
  bool derive = false;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, std::map<std::string, Setter>> schema = {
      {"model",
       {{"vocab_size", [&](auto& k, auto& v) { c.model.vocab_size = parse_value<std::size_t>(k, v); }},
        {"d_model", [&](auto& k, auto& v) { c.model.d_model = parse_value<std::size_t>(k, v); }},
        {"n_layers", [&](auto& k, auto& v) { c.model.n_layers = parse_value<std::size_t>(k, v); }},
        {"n_heads", [&](auto& k, auto& v) { c.model.n_heads = parse_value<std::size_t>(k, v); }},
        {"context", [&](auto& k, auto& v) { c.model.context = parse_value<std::size_t>(k, v); }},
        {"init_std", [&](auto& k, auto& v) { c.model.init_std = parse_value<double>(k, v); }}}},
      {"quant",
       {{"notation",
         [&](auto&, auto& v) {
           if (v == "fp" || v == "none") {
             quant_none = true;
           } else {
             notation = parse_quant_notation(v);
           }
         }},
        {"weight_scheme", [&](auto&, auto& v) { w_scheme = parse_scheme(v); }},
        {"act_scheme", [&](auto&, auto& v) { a_scheme = parse_scheme(v); }},
        {"derive_weight_affine", [&](auto& k, auto& v) { derive = parse_value<bool>(k, v); }}}},
      {"zo",
       {{"epsilon", [&](auto& k, auto& v) { c.zo.epsilon = parse_value<double>(k, v); }},
        {"directions", [&](auto& k, auto& v) { c.zo.directions = parse_value<int>(k, v); }},
        {"lr_weights", [&](auto& k, auto& v) { c.zo.lr[0] = parse_value<double>(k, v); }},
        {"lr_smoothing", [&](auto& k, auto& v) { c.zo.lr[1] = parse_value<double>(k, v); }},
        {"lr_clipping", [&](auto& k, auto& v) { c.zo.lr[2] = parse_value<double>(k, v); }},
        {"lr_quant_affine", [&](auto& k, auto& v) { c.zo.lr[3] = parse_value<double>(k, v); }},
        {"schedule", [&](auto&, auto& v) { c.zo.schedule = parse_schedule(v); }},
        {"batch_size", [&](auto& k, auto& v) { c.zo.batch_size = parse_value<std::size_t>(k, v); }}}},
      {"train",
       {{"steps", [&](auto& k, auto& v) { c.train.steps = parse_value<std::size_t>(k, v); }},
        {"eval_interval",
         [&](auto& k, auto& v) { c.train.eval_interval = parse_value<std::size_t>(k, v); }},
        {"eval_sequences",
         [&](auto& k, auto& v) { c.train.eval_sequences = parse_value<std::size_t>(k, v); }},
        {"lightweight", [&](auto& k, auto& v) { c.train.lightweight = parse_value<bool>(k, v); }}}},
      {"calibration",
       {{"epochs", [&](auto& k, auto& v) { c.calib.epochs = parse_value<std::size_t>(k, v); }},
        {"samples", [&](auto& k, auto& v) { c.calib.samples = parse_value<std::size_t>(k, v); }},
        {"seq_len", [&](auto& k, auto& v) { c.calib.seq_len = parse_value<std::size_t>(k, v); }}}},
      {"paths",
       {{"corpus", [&](auto&, auto& v) { c.corpus = v; }},
        {"out_dir", [&](auto&, auto& v) { c.out_dir = v; }},
        {"metrics_dir", [&](auto&, auto& v) { c.metrics_dir = v; }}}},
      {"run", {{"seed", [&](auto& k, auto& v) { c.seed = parse_value<std::uint64_t>(k, v); }}}},
  };

  for (const auto& [section, body] : tree) {
    const auto s = schema.find(section);
    if (s == schema.end() || body.data() != "") {
      throw InvalidArgument("unknown config section '" + section + "'");
    }
    for (const auto& [key, value] : body) {
      const auto k = s->second.find(key);
      if (k == s->second.end()) {
        throw InvalidArgument("unknown config key '" + section + "." + key + "'");
      }
      k->second(section + "." + key, value.data());
    }
  }
  if (quant_none) {
    c.quant.reset();
  } else {
    model::QuantConfig q = to_quant_config(notation.value_or(QuantNotation{4, 4, 0}));
    q.weight_scheme = w_scheme;
    q.act_scheme = a_scheme;
    q.derive_weight_affine = derive;
    c.quant = q;
  }
  c.validate();
  return c;
}

nlohmann::json to_json(const RunConfig& c) {
  json j;
  j["model"] = {{"vocab_size", c.model.vocab_size}, {"d_model", c.model.d_model},
                {"n_layers", c.model.n_layers},     {"n_heads", c.model.n_heads},
                {"context", c.model.context},       {"init_std", c.model.init_std}};
  if (c.quant) {
    j["quant"] = {{"notation", format_quant_notation(notation_of(*c.quant))},
                  {"weight_scheme", scheme_name(c.quant->weight_scheme)},
                  {"act_scheme", scheme_name(c.quant->act_scheme)},
                  {"derive_weight_affine", c.quant->derive_weight_affine}};
  } else {
    j["quant"] = nullptr;
  }
  j["zo"] = {{"epsilon", c.zo.epsilon},       {"directions", c.zo.directions},
             {"lr", c.zo.lr},                 {"steps", c.zo.steps},
             {"seed", c.zo.seed},             {"schedule", schedule_name(c.zo.schedule)},
             {"batch_size", c.zo.batch_size}};
  j["train"] = {{"steps", c.train.steps},
                {"eval_interval", c.train.eval_interval},
                {"eval_sequences", c.train.eval_sequences},
                {"lightweight", c.train.lightweight}};
  j["calibration"] = {
      {"epochs", c.calib.epochs}, {"samples", c.calib.samples}, {"seq_len", c.calib.seq_len}};
  j["paths"] = {{"corpus", c.corpus}, {"out_dir", c.out_dir}, {"metrics_dir", c.metrics_dir}};
  j["seed"] = c.seed;
  return j;
}

RunConfig config_from_json(const nlohmann::json& j) {
  try {
    RunConfig c;
    const json& m = j.at("model");
    c.model.vocab_size = m.at("vocab_size");
    c.model.d_model = m.at("d_model");
    c.model.n_layers = m.at("n_layers");
    c.model.n_heads = m.at("n_heads");
    c.model.context = m.at("context");
    c.model.init_std = m.at("init_std");
    if (j.at("quant").is_null()) {
      c.quant.reset();
    } else {
      const json& q = j.at("quant");
      model::QuantConfig qc = to_quant_config(parse_quant_notation(q.at("notation")));
      qc.weight_scheme = parse_scheme(q.at("weight_scheme"));
      qc.act_scheme = parse_scheme(q.at("act_scheme"));
      qc.derive_weight_affine = q.at("derive_weight_affine");
      c.quant = qc;
    }
    const json& z = j.at("zo");
    c.zo.epsilon = z.at("epsilon");
    c.zo.directions = z.at("directions");
    c.zo.lr = z.at("lr").get<std::array<double, 4>>();
    c.zo.steps = z.at("steps");
    c.zo.seed = z.at("seed");
    c.zo.schedule = parse_schedule(z.at("schedule"));
    c.zo.batch_size = z.at("batch_size");
    const json& t = j.at("train");
    c.train.steps = t.at("steps");
    c.train.eval_interval = t.at("eval_interval");
    c.train.eval_sequences = t.at("eval_sequences");
    c.train.lightweight = t.at("lightweight");
    const json& cb = j.at("calibration");
    c.calib.epochs = cb.at("epochs");
    c.calib.samples = cb.at("samples");
    c.calib.seq_len = cb.at("seq_len");
    const json& p = j.at("paths");
    c.corpus = p.at("corpus");
    c.out_dir = p.at("out_dir");
    c.metrics_dir = p.at("metrics_dir");
    c.seed = j.at("seed");
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed run configuration: ") + e.what());
  }
}

}  // namespace zoqat::cli
