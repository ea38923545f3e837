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

#include "zoqat/cli/app.h"

#include <CLI11.hpp>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

#include "zoqat/cli/checkpoint.h"
#include "zoqat/error.h"

namespace zoqat::cli {
namespace {

namespace fs = std::filesystem;

std::ofstream open_metrics(const RunConfig& cfg, const std::string& name, bool append = false) {
  fs::create_directories(cfg.metrics_path());
  const fs::path p = cfg.metrics_path() / name;
  std::ofstream out(p, append ? std::ios::app : std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  return out;
}

Corpus load_corpus(const RunConfig& cfg) {
  return ingest_corpus(cfg.corpus, cfg.model.context, cfg.model.vocab_size, cfg.seed);
}

double perplexity(const model::Model& m, const model::Batch& eval) {
  if (eval.empty()) throw DataError("the corpus has no held-out chunks to evaluate on");
  return std::exp(m.loss(eval, model::Mode::kQat));
}

zo::ZoConfig zo_config(const RunConfig& cfg) {
  zo::ZoConfig z = cfg.zo;
  z.steps = cfg.train.steps;
  z.seed = cfg.seed;
  return z;
}

// The model a command starts from: a checkpoint or a fresh initialization.
struct Start {
  std::optional<model::Model> model;
  std::size_t step = 0;
};

Start start_model(const RunConfig& cfg, const std::optional<fs::path>& resume) {
  Start s;
  if (resume) {
    Checkpoint ck = load_checkpoint(*resume);
    if (!(ck.config.model == cfg.model)) {
      throw InvalidArgument("checkpoint architecture differs from the configured model");
    }
    s.model.emplace(std::move(ck.model));
    s.step = ck.step;
  } else {
    s.model.emplace(cfg.model, cfg.seed);
  }
  return s;
}

void log_layers(std::ostream& log, const std::vector<calibration::LayerReport>& layers) {
  for (const auto& r : layers) {
    log << "  calibrated " << r.layer << "  loss " << r.loss_before << " -> " << r.loss_after
        << "  delta_loss " << r.delta_loss << '\n';
  }
}

// Probes for every layer whose weights are still full precision.
diagnostics::ProbeSet probes_for(const model::Model& m, const RunConfig& cfg,
                                 const Corpus& corpus) {
  std::vector<model::LinearId> ids;
  for (const model::LinearId& id : m.linear_ids()) {
    const model::Linear& lin = m.linear(id);
    if (!lin.attachment || !lin.attachment->pre_quantized) ids.push_back(id);
  }
  if (ids.empty()) return {};
  auto& mm = const_cast<model::Model&>(m);
  return diagnostics::make_probe_set(
      m, calibration::capture_activations(mm, calibration_batch(corpus, cfg.calib)), ids);
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InvalidArgument*>(&e)) return kExitUsage;
  if (dynamic_cast<const DataError*>(&e)) return kExitData;
  if (dynamic_cast<const fs::filesystem_error*>(&e)) return kExitData;
  if (dynamic_cast<const VerificationFailure*>(&e)) return kExitVerification;
  return kExitNumeric;
}

model::Batch eval_batch(const Corpus& corpus, const TrainSettings& train) {
  const std::size_t n = train.eval_sequences == 0
                            ? corpus.eval.size()
                            : std::min(train.eval_sequences, corpus.eval.size());
  return model::Batch(corpus.eval.begin(), corpus.eval.begin() + static_cast<std::ptrdiff_t>(n));
}

model::Batch calibration_batch(const Corpus& corpus, const CalibSettings& calib) {
  if (corpus.train.empty()) throw DataError("the corpus has no training chunks");
  model::Batch b;
  for (std::size_t i = 0; i < calib.samples && i < corpus.train.size(); ++i) {
    const model::Sequence& s = corpus.train[i];
    b.emplace_back(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(
                                              std::min(calib.seq_len, s.size())));
  }
  return b;
}

QuantInit initialize_quantization(model::Model& model, const RunConfig& cfg,
                                  const Corpus& corpus) {
  if (!cfg.quant) throw InvalidArgument("no quantization configured");
  QuantInit init;
  model.attach_quantizers(*cfg.quant);
  const calibration::CalibSet calib =
      calibration::capture_activations(model, calibration_batch(corpus, cfg.calib));
  init.probes = diagnostics::make_probe_set(model, calib);
  calibration::ReconstructOptions opt;
  opt.epochs = cfg.calib.effective_epochs(*cfg.quant);
  init.layers = calibration::calibrate_model(model, calib, opt);
  if (cfg.train.lightweight) model.set_lightweight();
  return init;
}

TrainOutcome cmd_train(const RunConfig& cfg, const std::optional<fs::path>& resume,
                       std::ostream& log) {
  cfg.validate();
  const Corpus corpus = load_corpus(cfg);
  const model::Batch eval = eval_batch(corpus, cfg.train);
  Start s = start_model(cfg, resume);
  model::Model& m = *s.model;
  diagnostics::ProbeSet probes;
  if (cfg.quant && !m.quant_config()) {
    QuantInit init = initialize_quantization(m, cfg, corpus);
    auto csv = open_metrics(cfg, "calibration.csv");
    calibration::write_layer_csv(csv, init.layers);
    log_layers(log, init.layers);
    probes = std::move(init.probes);
    s.step = 0;
  } else {
    if (cfg.train.lightweight && !m.lightweight()) m.set_lightweight();
    probes = probes_for(m, cfg, corpus);
  }
  if (m.trainable_count() == 0 && cfg.train.steps > s.step) {
    throw InvalidState("model has no trainable parameters");
  }

  const zo::ZoConfig zcfg = zo_config(cfg);
  const bool fresh = s.step == 0;
  auto zo_csv = open_metrics(cfg, "zo.csv", !fresh);
  auto diag_csv = open_metrics(cfg, "diagnostics.csv", !fresh);
  if (fresh) {
    zo::write_step_header(zo_csv);
    diagnostics::write_track_header(diag_csv);
  }
  const std::size_t seq = cfg.model.context;
  diagnostics::Tracker tracker;
  auto track = [&](std::size_t step, double train_loss) {
    const auto mem = diagnostics::memory_report(m, zcfg, zcfg.batch_size, seq);
    const auto rec = tracker.track(m, eval, probes, step, train_loss, mem);
    diagnostics::write_track_rows(diag_csv, rec);
    log << "step " << step << "  train_loss " << train_loss << "  eval_ppl " << rec.eval_ppl
        << '\n';
    return rec.eval_ppl;
  };

  TrainOutcome out;
  out.initial_ppl = track(s.step, m.loss(zo::sample_batch(corpus.train, zcfg.batch_size,
                                                          cfg.seed, s.step),
                                         model::Mode::kQat));
  out.final_ppl = out.initial_ppl;
  std::uint64_t cursor = zo::direction_stream(s.step, 0);
  for (std::size_t step = s.step; step < cfg.train.steps; ++step) {
    const model::Batch batch = zo::sample_batch(corpus.train, zcfg.batch_size, cfg.seed, step);
    const zo::StepReport r = zo::zo_step(m, batch, zcfg, step);
    zo::write_step_row(zo_csv, r);
    cursor = r.rng_cursor;
    if ((step + 1) % cfg.train.eval_interval == 0 || step + 1 == cfg.train.steps) {
      out.final_ppl = track(step + 1, r.loss);
    }
  }
  out.final_step = std::max(s.step, cfg.train.steps);
  save_checkpoint(cfg.checkpoint_path(), cfg, m, out.final_step, cursor);
  log << "checkpoint " << cfg.checkpoint_path().string() << "  eval_ppl " << out.final_ppl
      << '\n';
  return out;
}

double cmd_quantize(const RunConfig& cfg, const std::optional<fs::path>& resume,
                    std::ostream& log) {
  cfg.validate();
  if (!cfg.quant) throw InvalidArgument("quantize needs a quantization setting");
  const Corpus corpus = load_corpus(cfg);
  Start s = start_model(cfg, resume);
  if (s.model->quant_config() && !(*s.model->quant_config() == *cfg.quant)) {
    throw InvalidArgument("checkpoint is already quantized with a different setting");
  }
  calibration::rtn_quantize(*s.model, *cfg.quant);
  const double ppl = perplexity(*s.model, eval_batch(corpus, cfg.train));
  save_checkpoint(cfg.checkpoint_path(), cfg, *s.model, 0, 0);
  log << "rtn " << format_quant_notation(notation_of(*cfg.quant)) << "  eval_ppl " << ppl << '\n';
  return ppl;
}

double cmd_calibrate(const RunConfig& cfg, const std::optional<fs::path>& resume,
                     std::ostream& log) {
  cfg.validate();
  if (!cfg.quant) throw InvalidArgument("calibrate needs a quantization setting");
  const Corpus corpus = load_corpus(cfg);
  Start s = start_model(cfg, resume);
  if (s.model->quant_config()) throw InvalidArgument("checkpoint is already quantized");
  const QuantInit init = initialize_quantization(*s.model, cfg, corpus);
  auto csv = open_metrics(cfg, "calibration.csv");
  calibration::write_layer_csv(csv, init.layers);
  log_layers(log, init.layers);
  const double ppl = perplexity(*s.model, eval_batch(corpus, cfg.train));
  save_checkpoint(cfg.checkpoint_path(), cfg, *s.model, 0, 0);
  log << "calibrated " << format_quant_notation(notation_of(*cfg.quant)) << "  eval_ppl " << ppl
      << '\n';
  return ppl;
}

double cmd_eval(const fs::path& checkpoint, const RunConfig& cfg, std::ostream& log) {
  Checkpoint ck = load_checkpoint(checkpoint);
  RunConfig run = cfg;
  run.model = ck.config.model;
  const Corpus corpus = load_corpus(run);
  const model::Batch eval = eval_batch(corpus, run.train);
  if (eval.empty()) throw DataError("the corpus has no held-out chunks to evaluate on");
  const diagnostics::ProbeSet probes = probes_for(ck.model, run, corpus);
  diagnostics::Tracker tracker;
  const zo::ZoConfig zcfg = zo_config(run);
  const auto rec = tracker.track(
      ck.model, eval, probes, ck.step, std::nan(""),
      diagnostics::memory_report(ck.model, zcfg, zcfg.batch_size, run.model.context));
  auto csv = open_metrics(run, "eval.csv");
  diagnostics::write_track_header(csv);
  diagnostics::write_track_rows(csv, rec);
  log << std::setprecision(10) << "eval_ppl " << rec.eval_ppl << '\n';
  for (const auto& [name, v] : rec.recon_loss) log << "  recon " << name << ' ' << v << '\n';
  return rec.eval_ppl;
}

void cmd_diag(const fs::path& checkpoint, const RunConfig& cfg, std::ostream& log) {
  Checkpoint ck = load_checkpoint(checkpoint);
  const zo::ZoConfig zcfg = zo_config(ck.config);
  auto csv = open_metrics(cfg, "memory.csv");
  csv << "batch,bytes_params,bytes_quantized_frozen,bytes_frozen_fp,bytes_opt,bytes_fwd\n";
  for (std::size_t b : {zcfg.batch_size, 2 * zcfg.batch_size}) {
    const auto r = diagnostics::memory_report(ck.model, zcfg, b, ck.config.model.context);
    csv << b << ',' << r.parameters << ',' << r.quantized_frozen << ','
        << r.frozen_full_precision << ',' << r.optimizer_state << ',' << r.transient_forward
        << '\n';
    log << "batch " << b << "  params " << r.parameters << "  quantized_frozen "
        << r.quantized_frozen << "  frozen_fp " << r.frozen_full_precision << "  optimizer "
        << r.optimizer_state << "  forward " << r.transient_forward << '\n';
  }
  log << "trainable scalars " << ck.model.trainable_count() << '\n';

  const fs::path diag = cfg.metrics_path() / "diagnostics.csv";
  std::ifstream in(diag);
  if (!in) return;
  std::map<std::size_t, std::pair<double, double>> by_step;  // recon sum, ppl
  std::string line;
  std::getline(in, line);
  while (std::getline(in, line)) {
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> f;
    while (std::getline(ss, field, ',')) f.push_back(field);
    if (f.size() < 5) throw DataError("malformed row in " + diag.string());
    auto& e = by_step[std::stoull(f[0])];
    e.first += std::stod(f[2]);
    e.second = std::stod(f[4]);
  }
  if (by_step.size() < 2) return;
  std::vector<double> recon, ppl;
  for (const auto& [step, v] : by_step) {
    recon.push_back(v.first);
    ppl.push_back(v.second);
  }
  log << "inconsistency_score " << diagnostics::inconsistency_score(recon, ppl) << " over "
      << recon.size() << " records\n";
}

int cmd_verify(const theory::VerifyOptions& options, const RunConfig& cfg, std::ostream& log) {
  const auto rows = theory::run_verification(options);
  theory::write_report_text(log, rows);
  auto txt = open_metrics(cfg, "verify.txt");
  theory::write_report_text(txt, rows);
  auto csv = open_metrics(cfg, "verify.csv");
  theory::write_report_csv(csv, rows);
  for (const auto& r : rows) {
    if (r.pass && !*r.pass) return kExitVerification;
  }
  return kExitOk;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"zoqat: forward-only quantization-aware training"};
  app.require_subcommand(1);
  std::string config_path, quant, resume, metrics_dir, out_dir, corpus;
  std::optional<std::size_t> steps;
  std::optional<std::uint64_t> seed;
  bool lightweight = false, quick = false, mutate = false;
  app.add_option("--config", config_path, "INI run configuration");
  app.add_option("--quant", quant, "W{w}A{a}[g{gs}], or fp for no quantization");
  app.add_option("--steps", steps, "ZO training steps");
  app.add_option("--seed", seed, "run seed");
  app.add_flag("--lightweight", lightweight, "train only the Q and V weights");
  app.add_option("--resume,--checkpoint", resume, "input checkpoint");
  app.add_flag("--quick", quick, "reduced sample sizes for verify");
  app.add_option("--metrics-dir", metrics_dir, "metrics output directory");
  app.add_option("--out", out_dir, "run output directory");
  app.add_option("--corpus", corpus, "UTF-8 text corpus");
  app.add_flag("--mutate-estimator", mutate)->group("");
  std::string command;
  const std::pair<const char*, const char*> commands[] = {
      {"train", "quantize, calibrate and ZO-train, or resume a checkpoint"},
      {"eval", "perplexity and per-layer reconstruction of a checkpoint"},
      {"verify", "numerical checks of the estimator and its bounds"},
      {"quantize", "round-to-nearest baseline checkpoint"},
      {"calibrate", "calibrated checkpoint without ZO steps"},
      {"diag", "memory breakdown and inconsistency score"}};
  for (const auto& [name, help] : commands) {
    app.add_subcommand(name, help)->fallthrough()->callback([&command, name] { command = name; });
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    RunConfig cfg;
    const std::optional<fs::path> resume_path =
        resume.empty() ? std::nullopt : std::optional<fs::path>(resume);
    if (!config_path.empty()) {
      cfg = load_config(config_path);
    } else if (resume_path && command != "verify") {
      cfg = load_checkpoint(*resume_path).config;
    }
    if (!quant.empty()) {
      if (quant == "fp" || quant == "none") {
        cfg.quant.reset();
      } else {
        model::QuantConfig q = to_quant_config(parse_quant_notation(quant));
        if (cfg.quant) {
          q.weight_scheme = cfg.quant->weight_scheme;
          q.act_scheme = cfg.quant->act_scheme;
          q.derive_weight_affine = cfg.quant->derive_weight_affine;
        }
        cfg.quant = q;
      }
    }
    if (steps) cfg.train.steps = *steps;
    if (seed) cfg.seed = *seed;
    if (lightweight) cfg.train.lightweight = true;
    if (!out_dir.empty()) {
      cfg.out_dir = out_dir;
      if (metrics_dir.empty()) cfg.metrics_dir.clear();
    }
    if (!metrics_dir.empty()) cfg.metrics_dir = metrics_dir;
    if (!corpus.empty()) cfg.corpus = corpus;
    cfg.validate();

    out << std::setprecision(8);
    if (command == "train") {
      cmd_train(cfg, resume_path, out);
    } else if (command == "quantize") {
      cmd_quantize(cfg, resume_path, out);
    } else if (command == "calibrate") {
      cmd_calibrate(cfg, resume_path, out);
    } else if (command == "eval" || command == "diag") {
      if (!resume_path) throw InvalidArgument(command + " needs --resume PATH");
      if (command == "eval") {
        cmd_eval(*resume_path, cfg, out);
      } else {
        cmd_diag(*resume_path, cfg, out);
      }
    } else {
      theory::VerifyOptions opt = quick ? theory::VerifyOptions::quick() : theory::VerifyOptions{};
      opt.seed = cfg.seed;
      opt.broken_estimator = mutate;
      return cmd_verify(opt, cfg, out);
    }
    return kExitOk;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
}

}  // namespace zoqat::cli
