/*
 * cardioshape
 *
 * Copyright 2026 The cardioshape Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "cardioshape/io.hpp"
#include "commands.hpp"
#include "doctest.h"
#include "json.hpp"

#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <unistd.h>

namespace fs = std::filesystem;
using cardioshape::cli::run_cli;
namespace io = cardioshape::io;

namespace {

struct Run {
  int code = 0;
  std::string out;
  std::string err;
};

Run cli(const std::string& line) {
  std::istringstream words(line);
  std::vector<std::string> args{std::istream_iterator<std::string>(words), std::istream_iterator<std::string>()};
  std::ostringstream out, err;
  Run r;
  r.code = run_cli(args, out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

struct Workspace {
  fs::path root;
  Workspace() {
    static int counter = 0;
    root = fs::temp_directory_path() / ("cardioshape_cli_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(root);
  }
  ~Workspace() { fs::remove_all(root); }
  std::string operator/(const std::string& rel) const { return (root / rel).string(); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> tree(const fs::path& root) {
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), root).generic_string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

/// Small population shared by the model-based tests.
const Workspace& population() {
  static const Workspace ws = [] {
    Workspace w;
    REQUIRE(cli("synth --subjects 8 --frames 3 --seed 5 --out " + (w / "synth")).code == 0);
    REQUIRE(cli("ssm train --data " + (w / "synth/subjects") + " --components 6 --batch 4 --out " + (w / "ssm")).code == 0);
    return w;
  }();
  return ws;
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit with status 2") {
    const Run unknown = cli("synth --bogus 3 --out /tmp/x");
    CHECK(unknown.code == 2);
    CHECK(unknown.err.find("bogus") != std::string::npos);
    CHECK(unknown.err.find("Usage") != std::string::npos);
    CHECK(cli("").code == 2);
    CHECK(cli("frobnicate").code == 2);
    CHECK(cli("synth --subjects 3").code == 2);
    CHECK(cli("eval --suite nonsense --out /tmp/x").code == 2);
  }

  TEST_CASE("help exits cleanly") {
    const Run help = cli("--help");
    CHECK(help.code == 0);
    CHECK(help.out.find("synth") != std::string::npos);
    CHECK(cli("ssm train --help").code == 0);
  }

  TEST_CASE("validation and runtime failures map to exit codes") {
    Workspace ws;
    CHECK(cli("synth --subjects 0 --out " + (ws / "a")).code == 2);
    CHECK(cli("pheno --data " + (ws / "missing") + " --out " + (ws / "b")).code == 2);
    CHECK(cli("ssm encode --model " + (ws / "none.hssm") + " --sequence " + (ws / "none") + " --out " + (ws / "c"))
              .code == 2);
    std::ofstream(ws.root / "occupied") << "not a directory";
    const Run broken = cli("synth --subjects 1 --frames 2 --out " + (ws / "occupied"));
    CHECK(broken.code == 1);
    CHECK(!broken.err.empty());
  }

  TEST_CASE("synth is byte-identical across runs") {
    Workspace ws;
    REQUIRE(cli("synth --subjects 50 --seed 7 --out " + (ws / "a")).code == 0);
    REQUIRE(cli("synth --subjects 50 --seed 7 --out " + (ws / "b")).code == 0);
    const auto files = tree(ws.root / "a");
    REQUIRE(files == tree(ws.root / "b"));
    CHECK(files.size() > 50 * 10 * 5);
    for (const auto& f : files) CHECK_MESSAGE(slurp(ws.root / "a" / f) == slurp(ws.root / "b" / f), f);
    REQUIRE(cli("synth --subjects 2 --seed 8 --out " + (ws / "c")).code == 0);
    CHECK(slurp(ws.root / "a/subjects/sub_0000/sequence/frame_000_LV-endo.obj") !=
          slurp(ws.root / "c/subjects/sub_0000/sequence/frame_000_LV-endo.obj"));
  }

  TEST_CASE("options can come from a config file") {
    Workspace ws;
    std::ofstream(ws.root / "synth.toml") << "subjects = 3\nframes = 2\nseed = 4\n";
    REQUIRE(cli("synth --config " + (ws / "synth.toml") + " --out " + (ws / "out")).code == 0);
    const auto attrs = io::read_csv(ws.root / "out/attributes.csv");
    CHECK(attrs.rows.size() == 3);
    CHECK(io::read_sequence(ws.root / "out/subjects/sub_0002/sequence").num_frames() == 2);
    CHECK(cli("synth --config " + (ws / "absent.toml") + " --out " + (ws / "x")).code == 2);

    // Command-line values win; sections select the command.
    std::ofstream(ws.root / "both.toml") << "[synth]\nsubjects = 5\nframes = 2\n[pheno]\ndata = \"nowhere\"\n";
    REQUIRE(cli("synth --subjects 2 --config " + (ws / "both.toml") + " --out " + (ws / "out2")).code == 0);
    CHECK(io::read_csv(ws.root / "out2/attributes.csv").rows.size() == 2);
    std::ofstream(ws.root / "train.toml") << "[ssm.train]\ncomponents = 2\nbatch = 3\n";
    REQUIRE(cli("ssm train --data " + (ws / "out/subjects") + " --config " + (ws / "train.toml") + " --out " +
                (ws / "ssm"))
                .code == 0);
    CHECK(io::read_model(ws.root / "ssm/model.hssm").num_components() == 2);
  }

  TEST_CASE("the mean sequence encodes to a zero descriptor") {
    const Workspace& pop = population();
    Workspace ws;
    REQUIRE(cli("ssm encode --model " + (pop / "ssm/model.hssm") + " --sequence " + (pop / "ssm/mean") + " --out " +
                (ws / "enc"))
                .code == 0);
    const auto d = io::read_matrix_csv(ws.root / "enc/descriptors.csv");
    REQUIRE(d.values.rows() == 1);
    CHECK(d.values.cwiseAbs().maxCoeff() < 1e-10);
    CHECK(io::read_csv(pop.root / "ssm/compactness.csv").rows.size() == static_cast<std::size_t>(d.values.cols()));
  }

  TEST_CASE("decode reproduces the training reconstruction") {
    const Workspace& pop = population();
    Workspace ws;
    REQUIRE(cli("ssm decode --model " + (pop / "ssm/model.hssm") + " --template " + (pop / "synth/template") +
                " --descriptors " + (pop / "ssm/descriptors.csv") + " --subject sub_0003 --out " + (ws / "dec"))
                .code == 0);
    CHECK(fs::exists(ws.root / "dec/sub_0003/manifest.json"));
    CHECK(!fs::exists(ws.root / "dec/sub_0000"));
    const auto model = io::read_model(pop.root / "ssm/model.hssm");
    const auto truth = cardioshape::vectorize(io::read_sequence(pop.root / "synth/subjects/sub_0003/sequence"));
    const auto decoded = cardioshape::vectorize(io::read_sequence(ws.root / "dec/sub_0003"));
    CHECK((decoded - model.project(truth, model.num_components())).cwiseAbs().maxCoeff() < 1e-9);
  }

  TEST_CASE("completion, contour fitting and mode sampling") {
    const Workspace& pop = population();
    Workspace ws;
    const std::string model = " --model " + (pop / "ssm/model.hssm") + " --template " + (pop / "synth/template");
    const std::string seq = pop / "synth/subjects/sub_0001/sequence";
    REQUIRE(cli("ssm complete" + model + " --sequence " + seq + " --observed 0,2 --iterations 20 --out " + (ws / "c"))
                .code == 0);
    CHECK(io::read_sequence(ws.root / "c/sequence").num_frames() == 3);
    CHECK(io::read_csv(ws.root / "c/trace.csv").rows.size() == 21);
    CHECK(cli("ssm complete" + model + " --sequence " + seq + " --observed 5 --out " + (ws / "bad")).code == 2);

    std::ofstream(ws.root / "planes.json") << R"([{"origin": [0, 0, 100], "normal": [0, 0, 1]},
                                                {"origin": [100, 0, 0], "normal": [1, 0, 0]}])";
    REQUIRE(cli("ssm fit-contours" + model + " --sequence " + seq + " --planes " + (ws / "planes.json") +
                " --iterations 10 --out " + (ws / "f"))
                .code == 0);
    CHECK(fs::exists(ws.root / "f/descriptor.csv"));
    REQUIRE(cli("ssm fit-contours" + model + " --contours " + (ws / "f/contours.json") + " --iterations 10 --out " +
                (ws / "g"))
                .code == 0);
    CHECK(slurp(ws.root / "f/descriptor.csv") == slurp(ws.root / "g/descriptor.csv"));
    CHECK(cli("ssm fit-contours" + model + " --out " + (ws / "h")).code == 2);

    REQUIRE(cli("ssm modes" + model + " --modes 2 --sd -2,0,2 --out " + (ws / "m")).code == 0);
    CHECK(tree(ws.root / "m").size() == 2 * 3 * (3 * 5 + 1));
    CHECK(cli("ssm modes" + model + " --modes 99 --out " + (ws / "m2")).code == 2);
  }

  TEST_CASE("phenotypes, correlation and retrieval tables") {
    const Workspace& pop = population();
    Workspace ws;
    REQUIRE(cli("pheno --data " + (pop / "synth/subjects") + " --out " + (ws / "p")).code == 0);
    const auto ph = io::read_matrix_csv(ws.root / "p/phenotypes.csv");
    CHECK(ph.ids.size() == 8);
    CHECK(ph.columns.size() == 19);
    CHECK(io::read_csv(ws.root / "p/volume_curves.csv").rows.size() == 8 * 5 * 3);

    REQUIRE(cli("corr --data " + (pop / "synth/subjects") + " --attributes " + (pop / "synth/attributes.csv") +
                " --column age --out " + (ws / "c"))
                .code == 0);
    const auto corr = io::read_csv(ws.root / "c/correlation.csv");
    CHECK(corr.header == std::vector<std::string>{"vertex_id", "structure", "r", "p", "significant"});
    CHECK(corr.rows.front()[1] == "LV-endo");
    CHECK(cli("corr --data " + (pop / "synth/subjects") + " --attributes " + (pop / "synth/attributes.csv") +
              " --column height --out " + (ws / "c2"))
              .code == 2);

    REQUIRE(cli("retrieve --features " + (pop / "ssm/descriptors.csv") + " --groups " + (pop / "synth/attributes.csv") +
                " --k 1,3 --queries 20 --pcs 4 --out " + (ws / "r"))
                .code == 0);
    CHECK(io::read_csv(ws.root / "r/precision.csv").rows.size() == 2);

    REQUIRE(cli("reid --visit1 " + (pop / "ssm/descriptors.csv") + " --visit2 " + (pop / "ssm/descriptors.csv") +
                " --k 1 --out " + (ws / "i"))
                .code == 0);
    CHECK(io::read_csv(ws.root / "i/recall.csv").rows.front()[1] == "100");
  }

  TEST_CASE("motion correction and fitting smoke runs") {
    Workspace ws;
    REQUIRE(cli("synth --subjects 1 --frames 2 --views --volumes --seed 3 --out " + (ws / "s")).code == 0);
    const std::string sub = ws / "s/subjects/sub_0000";
    REQUIRE(cli("mc --views " + sub + "/views --truth " + sub + "/views_truth.json --epochs 5 --out " + (ws / "mc"))
                .code == 0);
    const auto q = nlohmann::json::parse(slurp(ws.root / "mc/quality.json"));
    CHECK(q.contains("median_error_mm"));
    CHECK(io::read_displacements(ws.root / "mc/displacements.json").size() == 10);

    REQUIRE(cli("fit --template " + (ws / "s/template") + " --labels " + sub + "/labels.json --iterations 2 --out " +
                (ws / "f"))
                .code == 0);
    CHECK(io::read_sequence(ws.root / "f/sequence").num_frames() == 2);
    CHECK(io::read_grids(ws.root / "f/grids.hffd").size() == 4);
    CHECK(io::read_csv(ws.root / "f/trace.csv").rows.size() == 6);
    CHECK(cli("fit --template " + (ws / "s/template") + " --out " + (ws / "g")).code == 2);
  }

  TEST_CASE("metric and acceptance suites write reports") {
    const Workspace& pop = population();
    Workspace ws;
    const std::string seq = pop / "synth/subjects/sub_0000/sequence";
    REQUIRE(cli("eval --suite metrics --pred " + seq + " --ref " + seq + " --out " + (ws / "m")).code == 0);
    const auto s = nlohmann::json::parse(slurp(ws.root / "m/summary.json"));
    CHECK(s["mean_assd"].get<double>() == 0.0);

    REQUIRE(cli("eval --suite acceptance --only 5 --out " + (ws / "a")).code == 0);
    const std::string report = slurp(ws.root / "a/acceptance.txt");
    CHECK(report.rfind("PASS  C5", 0) == 0);
    CHECK(!fs::exists(ws.root / "a/work"));
  }
}
