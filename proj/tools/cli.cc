// Copyright 2026 The AGN Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cli.h"

#include <CLI11.hpp>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>

#include "agn/checkpoint.h"
#include "agn/config.h"
#include "agn/corpus_io.h"
#include "agn/error.h"
#include "agn/io_util.h"
#include "agn/metrics.h"
#include "agn/optim.h"
#include "agn/synth.h"
#include "agn/wav.h"

namespace agn::cli {
namespace {

namespace fs = std::filesystem;

// Thrown for bad flag combinations found after parsing.
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

RunConfig load_run_config(const std::string& path) {
  RunConfig c = path.empty() ? RunConfig{} : load_config(path);
  c.model.freq_bins = c.stft.num_bins();
  c.validate();
  return c;
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

std::string checkpoint_id(const std::string& path) {
  return hex64(fnv1a64(read_file_bytes(path)));
}

void write_text(const std::string& path, const std::string& text) {
  atomic_write_file(path, std::span<const std::uint8_t>(
                              reinterpret_cast<const std::uint8_t*>(text.data()),
                              text.size()));
}

CorpusRole parse_role(const std::string& s) {
  if (s == "well-known") return CorpusRole::kWellKnown;
  if (s == "new") return CorpusRole::kNew;
  throw UsageError("--role must be well-known or new");
}

Corpus pick_split(const Corpus& corpus, const std::string& split,
                  double seconds) {
  if (split == "eval") return eval_split(corpus, seconds);
  if (split == "train") return train_split(corpus, seconds);
  if (split == "all") return corpus;
  throw UsageError("--split must be eval, train or all");
}

// ---------------------------------------------------------------------------

struct SynthArgs {
  std::string out;
  int speakers = 8;
  double seconds = 120.0;
  double utterance_seconds = 10.0;
  std::uint64_t seed = 0;
  std::string prefix = "spk";
  bool force = false;
};

int synth_corpus_cmd(const SynthArgs& a, std::ostream& out) {
  if (fs::exists(a.out) && !fs::is_directory(a.out)) {
    throw UsageError("'" + a.out + "' exists and is not a directory");
  }
  if (fs::is_directory(a.out) && !fs::is_empty(a.out) && !a.force) {
    throw UsageError("output directory '" + a.out +
                     "' is not empty (use --force to write into it)");
  }
  SynthCorpusSpec spec;
  spec.speakers = a.speakers;
  spec.seconds = a.seconds;
  spec.utterance_seconds = a.utterance_seconds;
  spec.seed = a.seed;
  spec.label_prefix = a.prefix;
  const Corpus corpus = synth_corpus(spec);

  fs::create_directories(a.out);
  std::vector<ManifestRow> rows;
  for (const SpeakerProfile& p : corpus.profiles) {
    fs::create_directories(fs::path(a.out) / p.label);
    for (std::size_t u = 0; u < p.utterances.size(); ++u) {
      std::ostringstream name;
      name << p.label << "/" << p.label << "_" << std::setw(3)
           << std::setfill('0') << u << ".wav";
      write_wav(p.utterances[u], (fs::path(a.out) / name.str()).string());
      rows.push_back({p.label, name.str(), p.utterances[u].size()});
    }
  }
  const std::string manifest = (fs::path(a.out) / "manifest.tsv").string();
  write_manifest(rows, manifest);
  out << "speakers = " << corpus.size() << "\n";
  out << "utterances = " << rows.size() << "\n";
  out << "manifest = " << manifest << "\n";
  return kOk;
}

int make_manifest_cmd(const std::string& root, std::string manifest,
                      std::ostream& out) {
  if (manifest.empty()) manifest = (fs::path(root) / "manifest.tsv").string();
  const auto rows = scan_corpus_tree(root);
  if (rows.empty()) throw InvalidInput("no .wav files under '" + root + "'");
  write_manifest(rows, manifest);
  out << "utterances = " << rows.size() << "\n";
  out << "manifest = " << manifest << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string corpus;
  std::string config;
  std::string out;
  std::string init;
  std::string mode;
  std::string log;
};

int train_cmd(const TrainArgs& a, bool is_finetune, std::ostream& out) {
  RunConfig cfg = load_run_config(a.config);
  if (is_finetune) {
    if (a.mode.empty()) throw UsageError("finetune needs --mode conventional|robust");
    if (a.init.empty()) throw UsageError("finetune needs --init CKPT");
    if (a.mode == "conventional") {
      cfg.train.mode = TrainMode::kFinetuneConventional;
    } else if (a.mode == "robust") {
      cfg.train.mode = TrainMode::kFinetuneRobust;
    } else {
      throw UsageError("--mode must be conventional or robust");
    }
  } else {
    if (!a.mode.empty()) throw UsageError("pretrain takes no --mode");
    cfg.train.mode = TrainMode::kPretrain;
  }

  const Corpus corpus = load_corpus(
      a.corpus, is_finetune ? CorpusRole::kNew : CorpusRole::kWellKnown);
  const Corpus train_set = train_split(corpus, cfg.split_seconds);

  AgnModel model;
  OptimizerState state;
  if (!a.init.empty()) {
    Checkpoint ck = load_checkpoint(a.init);
    check_dims(ck, cfg.model);
    if (!(ck.model.stft == cfg.stft) || ck.model.compression_p != cfg.compression_p) {
      throw DimensionMismatch("checkpoint front end (window, hop, p) differs from config");
    }
    model = std::move(ck.model);
    // Pretraining resumes; fine-tuning starts a fresh optimizer.
    if (!is_finetune) state = std::move(ck.optimizer);
  } else {
    model = AgnModel::create(cfg.model, corpus.labels(), cfg.stft,
                             cfg.compression_p, cfg.train.seed);
  }

  std::ofstream log_file;
  TrainOptions opts;
  opts.checkpoint_path = a.out;
  if (!a.log.empty()) {
    log_file.open(a.log);
    if (!log_file) throw IoError("cannot open log file '" + a.log + "'");
    opts.log_stream = &log_file;
  } else {
    opts.log_stream = &out;
  }

  const TrainLog log =
      is_finetune ? finetune(model, state, train_set, cfg.task, cfg.train, opts)
                  : pretrain(model, state, train_set, cfg.task, cfg.train, opts);
  save_checkpoint(model, state, Rng(cfg.train.seed).state(), a.out);
  out << "steps = " << log.steps.size() << "\n";
  if (log.stopped_early) out << "stopped_early = 1\n";
  out << "checkpoint = " << a.out << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string ckpt;
  std::string corpus;
  std::string config;
  std::string split = "eval";
  std::string role = "well-known";
  std::vector<int> g_range;
  std::vector<int> h_range;
  std::vector<double> snr_range;
  long tau = 0;
  std::size_t n = 100;
  std::optional<std::uint64_t> seed;  // default: the config's task_seed
  std::string out = "report";
  bool oracle = false;
};

int eval_cmd(const EvalArgs& a, std::ostream& out) {
  const RunConfig cfg = load_run_config(a.config);
  const Checkpoint ck = load_checkpoint(a.ckpt);
  if (!a.config.empty()) check_dims(ck, cfg.model);
  const Corpus corpus = load_corpus(a.corpus, parse_role(a.role));
  const Corpus split = pick_split(corpus, a.split, cfg.split_seconds);

  TaskConfig task = cfg.task;
  if (!a.g_range.empty()) task.g_range = {a.g_range[0], a.g_range[1]};
  if (!a.h_range.empty()) task.h_range = {a.h_range[0], a.h_range[1]};
  if (!a.snr_range.empty()) task.snr_range_db = {a.snr_range[0], a.snr_range[1]};
  if (a.tau > 0) task.tau = a.tau;
  if (a.seed) task.seed = *a.seed;
  task.validate(split.size());
  // Every corpus speaker needs an embedding row.
  for (const auto& label : split.labels()) {
    if (ck.model.embeddings.find(label) < 0) {
      throw DimensionMismatch("speaker '" + label +
                              "' has no embedding row in the checkpoint");
    }
  }

  EvalReport r = evaluate(ck.model, split, task, a.n,
                          a.oracle ? EvalEstimate::kOracleTarget
                                   : EvalEstimate::kNetwork);
  r.checkpoint_id = checkpoint_id(a.ckpt);
  std::ostringstream summary, csv;
  write_report_summary(r, summary);
  write_report_csv(r, csv);
  write_text(a.out + ".txt", summary.str());
  write_text(a.out + ".csv", csv.str());
  out << std::setprecision(6);
  out << "count = " << r.count << "\n";
  if (r.mean) {
    out << "mean_sisnr_db = " << *r.mean << "\n";
    out << "mixture_mean_sisnr_db = " << *r.mixture_mean << "\n";
    out << "mean_improvement_db = " << *r.mean_improvement() << "\n";
  } else {
    out << "mean_sisnr_db = undefined\n";
  }
  return kOk;
}

// ---------------------------------------------------------------------------

std::vector<std::string> split_ids(const std::string& s) {
  std::vector<std::string> ids;
  std::stringstream in(s);
  std::string id;
  while (std::getline(in, id, ',')) {
    if (id.empty()) throw UsageError("empty speaker id in --speakers");
    ids.push_back(id);
  }
  if (ids.empty()) throw UsageError("--speakers needs at least one id");
  return ids;
}

int separate_cmd(const std::string& ckpt_path, const std::string& mix_path,
                 const std::string& speakers, const std::string& out_path,
                 std::ostream& out) {
  const Checkpoint ck = load_checkpoint(ckpt_path);
  const EmbeddingTable& table = ck.model.embeddings;
  Indicator b(table.rows(), 0);
  for (const std::string& id : split_ids(speakers)) {
    const int row = table.find(id);
    if (row < 0) {
      std::string known;
      for (const auto& l : table.labels) known += (known.empty() ? "" : ", ") + l;
      throw UsageError("unknown speaker id '" + id + "'; known ids: " + known);
    }
    if (b[row]) throw UsageError("speaker id '" + id + "' listed twice");
    b[row] = 1;
  }
  const Waveform mix = read_wav(mix_path);
  const ComplexSpectrogram spec = stft(mix, ck.model.stft);
  const CompressedMagnitude x = compress(magnitude(spec), ck.model.compression_p);
  const Mask m = forward(x, superpose(table, b), ck.model.params);
  const Waveform y = reconstruct(apply_mask(m, x), spec);
  write_wav(y, out_path);
  out << "samples = " << y.size() << "\n";
  out << "output = " << out_path << "\n";
  return kOk;
}

// ---------------------------------------------------------------------------

void print_header(const std::string& path, const Checkpoint& ck,
                  std::ostream& out) {
  const ModelDims& d = ck.model.params.dims;
  out << "file = " << path << "\n";
  out << "id = " << checkpoint_id(path) << "\n";
  out << "freq_bins = " << d.freq_bins << "\n";
  out << "embedding_dim = " << d.embedding_dim << "\n";
  out << "blstm_layers = " << d.blstm_layers << "\n";
  out << "hidden_units = " << d.hidden_units << "\n";
  out << "fc_layers = " << d.fc_layers << "\n";
  out << "fc_units = " << d.fc_units << "\n";
  out << "window_len = " << ck.model.stft.window_len << "\n";
  out << "hop = " << ck.model.stft.hop << "\n";
  out << "compression_p = " << ck.model.compression_p << "\n";
  out << "theta_parameters = " << ck.model.params.num_parameters() << "\n";
  out << "optimizer_step = " << ck.optimizer.step << "\n";
  out << "theta_optimizer_state = " << (ck.optimizer.theta_sq ? 1 : 0) << "\n";
  out << "embedding_rows = " << ck.model.embeddings.rows() << "\n";
  for (int r = 0; r < ck.model.embeddings.rows(); ++r) {
    out << "speaker = " << ck.model.embeddings.labels[r]
        << " trainable=" << int(ck.model.embeddings.trainable[r]) << "\n";
  }
}

std::size_t count_differences(std::span<const double> a,
                              std::span<const double> b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::memcmp(&a[i], &b[i], sizeof(double)) != 0) ++n;
  }
  return n;
}

void print_diff(const Checkpoint& a, const Checkpoint& b, std::ostream& out) {
  std::size_t differing = 0;
  if (!(a.model.params.dims == b.model.params.dims)) {
    out << "differs = dims\n";
    ++differing;
  } else {
    const auto ta = a.model.params.tensors();
    const auto tb = b.model.params.tensors();
    const auto names = a.model.params.tensor_names();
    for (std::size_t i = 0; i < ta.size(); ++i) {
      if (std::size_t n = count_differences(ta[i], tb[i])) {
        out << "differs = " << names[i] << " entries=" << n << "\n";
        ++differing;
      }
    }
  }
  const EmbeddingTable& ea = a.model.embeddings;
  const EmbeddingTable& eb = b.model.embeddings;
  for (int r = 0; r < eb.rows(); ++r) {
    const int ra = ea.find(eb.labels[r]);
    if (ra < 0) {
      out << "differs = embedding/" << eb.labels[r] << " added\n";
      ++differing;
      continue;
    }
    if (ea.dim() != eb.dim()) continue;
    const Eigen::VectorXd va = ea.weights.row(ra);
    const Eigen::VectorXd vb = eb.weights.row(r);
    if (std::size_t n = count_differences({va.data(), std::size_t(va.size())},
                                          {vb.data(), std::size_t(vb.size())})) {
      out << "differs = embedding/" << eb.labels[r] << " entries=" << n << "\n";
      ++differing;
    }
  }
  for (int r = 0; r < ea.rows(); ++r) {
    if (eb.find(ea.labels[r]) < 0) {
      out << "differs = embedding/" << ea.labels[r] << " removed\n";
      ++differing;
    }
  }
  out << "differing = " << differing << "\n";
}

int inspect_cmd(const std::string& path, const std::string& diff_path,
                std::ostream& out) {
  const Checkpoint ck = load_checkpoint(path);
  if (diff_path.empty()) {
    print_header(path, ck, out);
  } else {
    print_diff(ck, load_checkpoint(diff_path), out);
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out,
        std::ostream& err) {
  CLI::App app{"Speaker-set conditioned source separation"};
  app.name("agn");
  app.require_subcommand(1);

  SynthArgs synth;
  auto* c_synth = app.add_subcommand("synth-corpus", "Generate a synthetic corpus");
  c_synth->add_option("--out", synth.out, "Output directory")->required();
  c_synth->add_option("--speakers", synth.speakers, "Number of speakers")
      ->check(CLI::PositiveNumber);
  c_synth->add_option("--seconds", synth.seconds, "Seconds of audio per speaker");
  c_synth->add_option("--utterance-seconds", synth.utterance_seconds,
                      "Length of each utterance");
  c_synth->add_option("--seed", synth.seed, "Random seed");
  c_synth->add_option("--prefix", synth.prefix, "Speaker id prefix");
  c_synth->add_flag("--force", synth.force, "Write into a non-empty directory");

  std::string mm_root, mm_out;
  auto* c_manifest = app.add_subcommand("make-manifest", "Index a directory of WAV files");
  c_manifest->add_option("--root", mm_root, "Corpus root (root/<speaker>/...wav)")
      ->required();
  c_manifest->add_option("--out", mm_out, "Manifest path (default root/manifest.tsv)");

  TrainArgs pre, fine;
  auto add_train = [](CLI::App* c, TrainArgs& t) {
    c->add_option("--corpus", t.corpus, "Manifest file")->required();
    c->add_option("--config", t.config, "Config file");
    c->add_option("--out", t.out, "Output checkpoint")->required();
    c->add_option("--init", t.init, "Starting checkpoint");
    c->add_option("--log", t.log, "Training log file (default stdout)");
  };
  auto* c_pre = app.add_subcommand("pretrain", "Train network and embeddings jointly");
  add_train(c_pre, pre);
  auto* c_fine = app.add_subcommand("finetune", "Adapt to new speakers");
  add_train(c_fine, fine);
  c_fine->add_option("--mode", fine.mode, "conventional or robust");

  EvalArgs ev;
  auto* c_eval = app.add_subcommand("eval", "Evaluate SI-SNR on held-out tasks");
  c_eval->add_option("--ckpt", ev.ckpt, "Checkpoint")->required();
  c_eval->add_option("--corpus", ev.corpus, "Manifest file")->required();
  c_eval->add_option("--config", ev.config, "Config file (task defaults)");
  c_eval->add_option("--split", ev.split, "eval, train or all");
  c_eval->add_option("--role", ev.role, "well-known or new");
  c_eval->add_option("--g-range", ev.g_range, "Target count range")->expected(2);
  c_eval->add_option("--h-range", ev.h_range, "Interferer count range")->expected(2);
  c_eval->add_option("--snr-range", ev.snr_range, "Mixing SNR range in dB")
      ->expected(2);
  c_eval->add_option("--tau", ev.tau, "Task length in samples");
  c_eval->add_option("--n", ev.n, "Number of tasks");
  c_eval->add_option("--seed", ev.seed, "Task seed");
  c_eval->add_option("--out", ev.out, "Report prefix (.txt and .csv)");
  c_eval->add_flag("--oracle", ev.oracle, "Use the true target magnitude");

  std::string sep_ckpt, sep_mix, sep_speakers, sep_out;
  auto* c_sep = app.add_subcommand("separate", "Extract a speaker set from a mixture");
  c_sep->add_option("--ckpt", sep_ckpt, "Checkpoint")->required();
  c_sep->add_option("--mix", sep_mix, "Mixture WAV")->required();
  c_sep->add_option("--speakers", sep_speakers, "Comma-separated speaker ids")
      ->required();
  c_sep->add_option("--out", sep_out, "Output WAV")->required();

  std::string ins_ckpt, ins_diff;
  auto* c_ins = app.add_subcommand("inspect-ckpt", "Describe or compare checkpoints");
  c_ins->add_option("--ckpt", ins_ckpt, "Checkpoint")->required();
  c_ins->add_option("--diff", ins_diff, "Second checkpoint to compare against");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*c_synth) return synth_corpus_cmd(synth, out);
    if (*c_manifest) return make_manifest_cmd(mm_root, mm_out, out);
    if (*c_pre) return train_cmd(pre, false, out);
    if (*c_fine) return train_cmd(fine, true, out);
    if (*c_eval) return eval_cmd(ev, out);
    if (*c_sep) return separate_cmd(sep_ckpt, sep_mix, sep_speakers, sep_out, out);
    if (*c_ins) return inspect_cmd(ins_ckpt, ins_diff, out);
  } catch (const UsageError& e) {
    err << "agn: " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidConfig& e) {
    err << "agn: config: " << e.what() << "\n";
    return kUsage;
  } catch (const TrainingDivergence& e) {
    err << "agn: training diverged at step " << e.step() << ": " << e.what()
        << "\n";
    return kDivergence;
  } catch (const std::exception& e) {
    err << "agn: " << e.what() << "\n";
    return kData;
  }
  return kUsage;
}

}  // namespace agn::cli
