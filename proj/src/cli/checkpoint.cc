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

#include "zoqat/cli/checkpoint.h"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>

#include "zoqat/error.h"
#include "zoqat/numerics/serialize.h"

namespace zoqat::cli {
namespace {

using nlohmann::json;
constexpr char kMagic[8] = {'Z', 'Q', 'C', 'H', 'K', 'P', 'N', 'T'};
constexpr std::uint64_t kMaxManifest = std::uint64_t{1} << 26;
constexpr std::uint64_t kMaxName = 4096;

void write_string(std::ostream& out, const std::string& s) {
  numerics::write_u64(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in, std::uint64_t limit) {
  const std::uint64_t n = numerics::read_u64(in);
  if (n > limit) throw DataError("checkpoint string length " + std::to_string(n) + " is implausible");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw DataError("checkpoint truncated inside a string");
  return s;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const RunConfig& config,
                     model::Model& model, std::size_t step, std::uint64_t rng_cursor) {
  if (!(model.config() == config.model)) {
    throw InvalidArgument("checkpoint config does not describe the model being saved");
  }
  json manifest;
  manifest["format_version"] = kCheckpointVersion;
  manifest["config"] = to_json(config);
  if (const auto& q = model.quant_config()) {
    RunConfig qc = config;
    qc.quant = *q;
    manifest["model_quant"] = to_json(qc)["quant"];
  } else {
    manifest["model_quant"] = nullptr;
  }
  manifest["lightweight"] = model.lightweight();
  manifest["step"] = step;
  manifest["rng_cursor"] = rng_cursor;
  json linears = json::array();
  for (const model::LinearId& id : model.linear_ids()) {
    const model::Linear& lin = model.linear(id);
    json l = {{"name", id.name()}, {"weight_trainable", lin.weight_trainable},
              {"attached", lin.attachment.has_value()}};
    if (lin.attachment) {
      l["trainable"] = lin.attachment->trainable;
      l["pre_quantized"] = lin.attachment->pre_quantized;
      l["smoothing"] = lin.attachment->smoothing.has_value();
    }
    linears.push_back(l);
  }
  manifest["linears"] = linears;

  std::filesystem::path tmp = path;
  tmp += ".tmp";
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  try {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint " + tmp.string());
    out.write(kMagic, sizeof(kMagic));
    numerics::write_u32(out, kCheckpointVersion);
    write_string(out, manifest.dump());
    const std::vector<model::NamedArray> arrays = model.state_arrays();
    numerics::write_u64(out, arrays.size());
    for (const model::NamedArray& a : arrays) {
      write_string(out, a.name);
      numerics::write_tensor(out, numerics::Tensor(a.shape, *a.data));
    }
    out.close();
    if (!out) throw DataError("error while writing checkpoint " + tmp.string());
    std::filesystem::rename(tmp, path);
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove(tmp, ec);
    throw;
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw DataError(path.string() + " is not a zoqat checkpoint");
  }
  const std::uint32_t version = numerics::read_u32(in);
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint " + path.string() + " has format version " +
                    std::to_string(version) + ", this build reads version " +
                    std::to_string(kCheckpointVersion));
  }
  json manifest;
  try {
    manifest = json::parse(read_string(in, kMaxManifest));
  } catch (const json::exception& e) {
    throw DataError(std::string("checkpoint manifest is not valid JSON: ") + e.what());
  }
  try {
    RunConfig cfg = config_from_json(manifest.at("config"));
    Checkpoint ck{cfg, model::Model(cfg.model, cfg.seed), manifest.at("step").get<std::size_t>(),
                  manifest.at("rng_cursor").get<std::uint64_t>()};
    model::Model& m = ck.model;
    if (!manifest.at("model_quant").is_null()) {
      json qj = to_json(cfg);
      qj["quant"] = manifest.at("model_quant");
      m.attach_quantizers(*config_from_json(qj).quant);
    }
    if (manifest.at("lightweight").get<bool>()) m.restore_lightweight_flags();
    const json& linears = manifest.at("linears");
    const std::vector<model::LinearId> ids = m.linear_ids();
    if (linears.size() != ids.size()) throw DataError("checkpoint linear count mismatch");
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const json& l = linears[i];
      model::Linear& lin = m.linear(ids[i]);
      if (l.at("name") != ids[i].name()) throw DataError("checkpoint linear order mismatch");
      lin.weight_trainable = l.at("weight_trainable");
      if (l.at("attached").get<bool>() != lin.attachment.has_value()) {
        throw DataError("checkpoint attachment of " + ids[i].name() + " disagrees with config");
      }
      if (lin.attachment) {
        lin.attachment->trainable = l.at("trainable");
        lin.attachment->pre_quantized = l.at("pre_quantized");
        if (!l.at("smoothing").get<bool>()) lin.attachment->smoothing.reset();
      }
    }
    std::map<std::string, model::NamedArray> slots;
    for (const model::NamedArray& a : m.state_arrays()) slots.emplace(a.name, a);
    const std::uint64_t count = numerics::read_u64(in);
    if (count != slots.size()) {
      throw DataError("checkpoint holds " + std::to_string(count) + " arrays, model expects " +
                      std::to_string(slots.size()));
    }
    for (std::uint64_t k = 0; k < count; ++k) {
      const std::string name = read_string(in, kMaxName);
      const numerics::Tensor t = numerics::read_tensor(in);
      const auto it = slots.find(name);
      if (it == slots.end()) throw DataError("checkpoint array '" + name + "' is unknown");
      if (t.shape() != it->second.shape) {
        throw DataError("checkpoint array '" + name + "' has shape " +
                        numerics::shape_string(t.shape()) + ", expected " +
                        numerics::shape_string(it->second.shape));
      }
      std::copy(t.storage().begin(), t.storage().end(), it->second.data->begin());
      slots.erase(it);
    }
    if (in.peek() != std::char_traits<char>::eof()) throw DataError("checkpoint has trailing bytes");
    return ck;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint manifest: ") + e.what());
  }
}

}  // namespace zoqat::cli
