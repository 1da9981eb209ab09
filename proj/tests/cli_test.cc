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

#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "agn/checkpoint.h"
#include "agn/corpus_io.h"
#include "agn/io_util.h"
#include "agn/synth.h"
#include "agn/wav.h"

using namespace agn;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code = 0;
  std::string out;
  std::string err;
};

Result agn_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  Result r;
  r.code = cli::run(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

// One scratch directory with two small corpora and a tiny config, shared by
// the whole file.
struct Fixture {
  fs::path root;
  std::string wk, nw, cfg, wk_manifest, nw_manifest;

  Fixture() {
    root = fs::temp_directory_path() / ("agn_cli_" + std::to_string(::getpid()));
    fs::remove_all(root);
    fs::create_directories(root);
    wk = (root / "wk").string();
    nw = (root / "nw").string();
    wk_manifest = wk + "/manifest.tsv";
    nw_manifest = nw + "/manifest.tsv";
    cfg = path("tiny.cfg");
    std::ofstream(cfg) << "embedding_dim = 4\n"
                          "blstm_layers = 1\n"
                          "hidden_units = 6\n"
                          "fc_layers = 1\n"
                          "tau = 2000\n"
                          "g_max = 1\n"
                          "h_max = 1\n"
                          "split_seconds = 10\n"
                          "batch_size = 2\n"
                          "max_steps = 3\n"
                          "base_lr = 0.01\n"
                          "seed = 5\n";
    REQUIRE(agn_cli({"synth-corpus", "--out", wk, "--speakers", "3", "--seconds",
                     "20", "--utterance-seconds", "5", "--seed", "1"}).code == 0);
    REQUIRE(agn_cli({"synth-corpus", "--out", nw, "--speakers", "2", "--seconds",
                     "20", "--utterance-seconds", "5", "--seed", "2", "--prefix",
                     "new"}).code == 0);
  }
  ~Fixture() { fs::remove_all(root); }
  std::string path(const std::string& name) const { return (root / name).string(); }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

std::string pretrained() {
  Fixture& f = fixture();
  const std::string p = f.path("pre.ckpt");
  if (!fs::exists(p)) {
    REQUIRE(agn_cli({"pretrain", "--corpus", f.wk_manifest, "--config", f.cfg,
                     "--out", p, "--log", f.path("pre.log")}).code == 0);
  }
  return p;
}

}  // namespace

TEST_CASE("synth-corpus layout and determinism") {
  Fixture& f = fixture();
  const auto rows = read_manifest(f.wk_manifest);
  CHECK(rows.size() == 12);  // 3 speakers x 4 utterances
  std::size_t files = 0;
  for (const auto& e : fs::recursive_directory_iterator(f.wk)) {
    files += e.path().extension() == ".wav";
  }
  CHECK(files == rows.size());

  const std::string again = f.path("wk_again");
  REQUIRE(agn_cli({"synth-corpus", "--out", again, "--speakers", "3", "--seconds",
                   "20", "--utterance-seconds", "5", "--seed", "1"}).code == 0);
  for (const auto& r : rows) {
    CHECK(read_file_bytes(f.wk + "/" + r.path) == read_file_bytes(again + "/" + r.path));
  }
  CHECK(read_file_bytes(f.wk_manifest) == read_file_bytes(again + "/manifest.tsv"));
}

TEST_CASE("synth-corpus speakers differ in spectral centroid") {
  Fixture& f = fixture();
  const Corpus c = load_corpus(f.wk_manifest, CorpusRole::kWellKnown);
  std::vector<double> centroids;
  for (const auto& p : c.profiles) centroids.push_back(spectral_centroid_hz(p.utterances[0]));
  for (std::size_t i = 0; i < centroids.size(); ++i) {
    for (std::size_t j = i + 1; j < centroids.size(); ++j) {
      CHECK(std::abs(centroids[i] - centroids[j]) > 1.0);
    }
  }
}

TEST_CASE("synth-corpus refuses to overwrite and rejects short speakers") {
  Fixture& f = fixture();
  const Result r = agn_cli({"synth-corpus", "--out", f.wk, "--speakers", "1"});
  CHECK(r.code == cli::kUsage);
  CHECK(r.err.find("--force") != std::string::npos);
  CHECK(agn_cli({"synth-corpus", "--out", f.path("short"), "--seconds", "2",
                 "--utterance-seconds", "5"}).code != 0);
  CHECK(agn_cli({"synth-corpus", "--out", f.path("forced"), "--speakers", "1",
                 "--seconds", "5", "--utterance-seconds", "5"}).code == 0);
  CHECK(agn_cli({"synth-corpus", "--out", f.path("forced"), "--speakers", "1",
                 "--seconds", "5", "--utterance-seconds", "5", "--force"}).code == 0);
}

TEST_CASE("make-manifest indexes a corpus tree") {
  Fixture& f = fixture();
  const std::string m = f.path("scan.tsv");
  REQUIRE(agn_cli({"make-manifest", "--root", f.wk, "--out", m}).code == 0);
  const auto scanned = read_manifest(m);
  const auto written = read_manifest(f.wk_manifest);
  REQUIRE(scanned.size() == written.size());
  for (std::size_t i = 0; i < scanned.size(); ++i) {
    CHECK(scanned[i].path == written[i].path);
    CHECK(scanned[i].num_samples == written[i].num_samples);
  }
}

TEST_CASE("pretrain is deterministic and logs each step") {
  Fixture& f = fixture();
  const std::string a = pretrained();
  const std::string b = f.path("pre_again.ckpt");
  REQUIRE(agn_cli({"pretrain", "--corpus", f.wk_manifest, "--config", f.cfg, "--out",
                   b, "--log", f.path("again.log")}).code == 0);
  CHECK(read_file_bytes(a) == read_file_bytes(b));
  std::ifstream log(f.path("pre.log"));
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    CHECK(line.rfind(std::to_string(lines) + "\t", 0) == 0);
    ++lines;
  }
  CHECK(lines == 3);
}

TEST_CASE("pretrain with zero steps writes the initialization") {
  Fixture& f = fixture();
  const std::string cfg0 = f.path("zero.cfg");
  {
    std::ifstream in(f.cfg);
    std::ofstream out(cfg0);
    std::string line;
    while (std::getline(in, line)) {
      out << (line.rfind("max_steps", 0) == 0 ? "max_steps = 0" : line) << "\n";
    }
  }
  const std::string p = f.path("zero.ckpt");
  REQUIRE(agn_cli({"pretrain", "--corpus", f.wk_manifest, "--config", cfg0, "--out", p})
              .code == 0);
  const Checkpoint ck = load_checkpoint(p);
  ModelDims d;
  d.embedding_dim = 4;
  d.blstm_layers = 1;
  d.hidden_units = 6;
  d.fc_layers = 1;
  const AgnModel fresh = AgnModel::create(
      d, {"spk000", "spk001", "spk002"}, StftConfig{}, 0.3, 5);
  const auto a = ck.model.params.tensors();
  const auto b = fresh.params.tensors();
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(std::equal(a[i].begin(), a[i].end(), b[i].begin()));
  }
  CHECK(ck.model.embeddings.weights == fresh.embeddings.weights);
  CHECK(ck.optimizer.step == 0);
}

TEST_CASE("finetune regimes change only their partition") {
  Fixture& f = fixture();
  const std::string init = pretrained();
  const std::string robust = f.path("robust.ckpt");
  const std::string conv = f.path("conv.ckpt");
  REQUIRE(agn_cli({"finetune", "--corpus", f.nw_manifest, "--config", f.cfg, "--init",
                   init, "--mode", "robust", "--out", robust}).code == 0);
  REQUIRE(agn_cli({"finetune", "--corpus", f.nw_manifest, "--config", f.cfg, "--init",
                   init, "--mode", "conventional", "--out", conv}).code == 0);

  const Result rd = agn_cli({"inspect-ckpt", "--ckpt", init, "--diff", robust});
  REQUIRE(rd.code == 0);
  CHECK(rd.out ==
        "differs = embedding/new000 added\n"
        "differs = embedding/new001 added\n"
        "differing = 2\n");

  const Result cd = agn_cli({"inspect-ckpt", "--ckpt", init, "--diff", conv});
  CHECK(cd.out.find("differs = blstm0") != std::string::npos);
  CHECK(cd.out.find("embedding/spk") == std::string::npos);

  const Result info = agn_cli({"inspect-ckpt", "--ckpt", robust});
  CHECK(info.out.find("speaker = new001 trainable=1") != std::string::npos);
  CHECK(info.out.find("speaker = spk000 trainable=0") != std::string::npos);
}

TEST_CASE("finetune usage errors") {
  Fixture& f = fixture();
  const std::string init = pretrained();
  CHECK(agn_cli({"finetune", "--corpus", f.nw_manifest, "--config", f.cfg, "--init",
                 init, "--out", f.path("x.ckpt")}).code == cli::kUsage);
  CHECK(agn_cli({"finetune", "--corpus", f.nw_manifest, "--config", f.cfg, "--mode",
                 "robust", "--out", f.path("x.ckpt")}).code == cli::kUsage);
  CHECK(agn_cli({"finetune", "--corpus", f.nw_manifest, "--config", f.cfg, "--init",
                 init, "--mode", "sideways", "--out", f.path("x.ckpt")}).code ==
        cli::kUsage);
  CHECK_FALSE(fs::exists(f.path("x.ckpt")));
}

TEST_CASE("training divergence exits with its own code") {
  Fixture& f = fixture();
  const std::string cfg = f.path("wild.cfg");
  std::ofstream(cfg) << "embedding_dim = 4\nblstm_layers = 1\nhidden_units = 6\n"
                        "fc_layers = 1\ntau = 2000\ng_max = 1\nh_max = 1\n"
                        "split_seconds = 10\nbatch_size = 2\nmax_steps = 5\n"
                        "base_lr = 1e308\n";
  const Result r = agn_cli({"pretrain", "--corpus", f.wk_manifest, "--config", cfg,
                            "--out", f.path("wild.ckpt"), "--log", f.path("wild.log")});
  CHECK(r.code == cli::kDivergence);
  CHECK(r.err.find("diverged") != std::string::npos);
}

TEST_CASE("eval writes reports and handles empty runs") {
  Fixture& f = fixture();
  const std::string ckpt = pretrained();
  const std::string prefix = f.path("rep");
  const Result r = agn_cli({"eval", "--ckpt", ckpt, "--corpus", f.wk_manifest,
                            "--config", f.cfg, "--g-range", "1", "1", "--h-range",
                            "1", "1", "--n", "3", "--seed", "4", "--out", prefix});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("mean_sisnr_db = ") != std::string::npos);
  std::ifstream csv(prefix + ".csv");
  std::string line;
  int rows = 0;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 4);
  const Result again = agn_cli({"eval", "--ckpt", ckpt, "--corpus", f.wk_manifest,
                                "--config", f.cfg, "--g-range", "1", "1", "--h-range",
                                "1", "1", "--n", "3", "--seed", "4", "--out",
                                f.path("rep2")});
  CHECK(read_file_bytes(prefix + ".csv") == read_file_bytes(f.path("rep2") + ".csv"));

  const Result empty = agn_cli({"eval", "--ckpt", ckpt, "--corpus", f.wk_manifest,
                                "--config", f.cfg, "--n", "0", "--out", f.path("e")});
  CHECK(empty.code == 0);
  CHECK(empty.out.find("mean_sisnr_db = undefined") != std::string::npos);
}

TEST_CASE("eval dimension mismatches are explicit") {
  Fixture& f = fixture();
  const std::string ckpt = pretrained();
  const std::string cfg = f.path("wide.cfg");
  std::ofstream(cfg) << "embedding_dim = 4\nblstm_layers = 1\nhidden_units = 9\n"
                        "fc_layers = 1\ng_max = 1\nh_max = 1\nsplit_seconds = 10\n";
  const Result r = agn_cli({"eval", "--ckpt", ckpt, "--corpus", f.wk_manifest,
                            "--config", cfg, "--n", "1", "--out", f.path("w")});
  CHECK(r.code == cli::kData);
  CHECK(r.err.find("hidden_units") != std::string::npos);
  const Result s = agn_cli({"eval", "--ckpt", ckpt, "--corpus", f.nw_manifest,
                            "--config", f.cfg, "--role", "new", "--n", "1", "--out",
                            f.path("w")});
  CHECK(s.code == cli::kData);
  CHECK(s.err.find("new000") != std::string::npos);
}

TEST_CASE("separate: speaker sets, ordering and bad ids") {
  Fixture& f = fixture();
  const std::string ckpt = pretrained();
  const std::string mix = f.wk + "/spk001/spk001_000.wav";
  const std::string a = f.path("a.wav"), b = f.path("b.wav"), c = f.path("c.wav");
  REQUIRE(agn_cli({"separate", "--ckpt", ckpt, "--mix", mix, "--speakers",
                   "spk000,spk002", "--out", a}).code == 0);
  REQUIRE(agn_cli({"separate", "--ckpt", ckpt, "--mix", mix, "--speakers",
                   "spk002,spk000", "--out", b}).code == 0);
  CHECK(read_file_bytes(a) == read_file_bytes(b));
  REQUIRE(agn_cli({"separate", "--ckpt", ckpt, "--mix", mix, "--speakers", "spk001",
                   "--out", c}).code == 0);
  CHECK(read_wav(c).size() == read_wav(mix).size());

  CHECK(agn_cli({"separate", "--ckpt", ckpt, "--mix", mix, "--speakers",
                 "spk001,spk001", "--out", f.path("d.wav")}).code == cli::kUsage);
  const Result u = agn_cli({"separate", "--ckpt", ckpt, "--mix", mix, "--speakers",
                            "nobody", "--out", f.path("d.wav")});
  CHECK(u.code == cli::kUsage);
  CHECK(u.err.find("spk000, spk001, spk002") != std::string::npos);
  CHECK_FALSE(fs::exists(f.path("d.wav")));
}

TEST_CASE("usage errors") {
  CHECK(agn_cli({}).code == cli::kUsage);
  CHECK(agn_cli({"frobnicate"}).code == cli::kUsage);
  CHECK(agn_cli({"eval", "--ckpt", "x"}).code == cli::kUsage);
  CHECK(agn_cli({"--help"}).code == 0);
  CHECK(agn_cli({"inspect-ckpt", "--ckpt", "/nonexistent/x.ckpt"}).code == cli::kData);
}
