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

#include "cardioshape/error.hpp"
#include "cardioshape/io.hpp"
#include "doctest.h"
#include "helpers.hpp"

#include <fstream>
#include <iterator>

using namespace cardioshape;
using namespace cardioshape::testing;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    static int counter = 0;
    path = fs::temp_directory_path() / ("cardioshape_io_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const fs::path& p, const std::string& s) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << s;
}

ShapeModel small_model(Rng& rng, const Topology& topo) {
  ShapeModel m(topo, 4);
  Eigen::MatrixXd data(topo.shape_dimension(), 6);
  for (Eigen::Index i = 0; i < data.size(); ++i) data.data()[i] = rng.normal();
  m.fit(data, 3);
  return m;
}

}  // namespace

TEST_SUITE("io") {
  TEST_CASE("OBJ round trip is bit exact") {
    TempDir dir;
    Rng rng(1);
    TriMesh m = icosphere(2, 13.7);
    m.vertices += random_points(rng, m.num_vertices(), 1e-3);
    m.structure = Structure::La;
    io::write_obj(dir.path / "m.obj", m);
    const TriMesh back = io::read_obj(dir.path / "m.obj", Structure::La);
    CHECK(back.vertices == m.vertices);
    CHECK(back.faces == m.faces);
    spit(dir.path / "bad.obj", "v 1 2 3\nf 1 2 9\n");
    CHECK_THROWS_AS(io::read_obj(dir.path / "bad.obj", Structure::La), ValidationError);
    CHECK_THROWS_AS(io::read_obj(dir.path / "missing.obj", Structure::La), Error);
  }

  TEST_CASE("sequence round trip with manifest") {
    TempDir dir;
    Rng rng(2);
    const MeshSequence seq = jittered_sequence(small_chambers(1), 3, 1.0, rng);
    io::write_sequence(dir.path / "seq", seq);
    CHECK(fs::exists(dir.path / "seq" / "manifest.json"));
    const MeshSequence back = io::read_sequence(dir.path / "seq");
    CHECK(vectorize(back) == vectorize(seq));
    CHECK(Topology::of(back).digest() == Topology::of(seq).digest());
  }

  TEST_CASE("volume round trips") {
    TempDir dir;
    std::vector<LabelVolume> labels(2, LabelVolume::zeros({5, 4, 3}, Vec3(2, 2, 2.5), Vec3(1, 1, 1)));
    labels[1].at(1, 2, 0) = 4;
    std::vector<IntensityVolume> intensity(1, IntensityVolume::zeros({3, 3, 3}, Vec3(1, 1, 1)));
    intensity[0].at(2, 1, 0) = 0.125f;
    io::write_volumes(dir.path / "labels.json", labels);
    io::write_volumes(dir.path / "intensity.json", intensity);
    const auto lb = io::read_label_volumes(dir.path / "labels.json");
    const auto ib = io::read_intensity_volumes(dir.path / "intensity.json");
    REQUIRE(lb.size() == 2);
    CHECK(lb[1].data == labels[1].data);
    CHECK(lb[1].spacing == labels[1].spacing);
    CHECK(lb[1].origin == labels[1].origin);
    REQUIRE(ib.size() == 1);
    CHECK(ib[0].data == intensity[0].data);
    CHECK_THROWS_AS(io::read_intensity_volumes(dir.path / "labels.json"), ValidationError);

    fs::resize_file(dir.path / "labels.raw", 10);
    CHECK_THROWS_AS(io::read_label_volumes(dir.path / "labels.json"), ValidationError);
  }

  TEST_CASE("HSSM model round trip") {
    TempDir dir;
    Rng rng(3);
    const ChamberSet cs = small_chambers(0);
    const Topology topo = Topology::of(cs, 2);
    const ShapeModel m = small_model(rng, topo);
    io::write_model(dir.path / "m.hssm", m);
    const ShapeModel back = io::read_model(dir.path / "m.hssm");
    CHECK(back.mean() == m.mean());
    CHECK(back.components() == m.components());
    CHECK(back.explained_variance() == m.explained_variance());
    CHECK(back.digest() == m.digest());
    CHECK(back.frames() == 2);
    CHECK(back.n_seen() == m.n_seen());
    CHECK(back.total_variance() == m.total_variance());
    CHECK(back.max_components() == m.max_components());

    io::write_model(dir.path / "again.hssm", back);
    CHECK(slurp(dir.path / "again.hssm") == slurp(dir.path / "m.hssm"));

    const std::string bytes = slurp(dir.path / "m.hssm");
    CHECK(bytes.substr(0, 4) == "HSSM");
    std::string bad_magic = bytes;
    bad_magic[0] = 'X';
    spit(dir.path / "magic.hssm", bad_magic);
    CHECK_THROWS_AS(io::read_model(dir.path / "magic.hssm"), ValidationError);
    spit(dir.path / "short.hssm", bytes.substr(0, bytes.size() - 8));
    CHECK_THROWS_AS(io::read_model(dir.path / "short.hssm"), ValidationError);

    ShapeModel other = back;
    Topology changed = Topology::of(small_chambers(1), 2);
    CHECK_THROWS_AS(other.attach(changed), ValidationError);
    ChamberSet flipped = cs;
    std::swap(flipped[0].faces[0][1], flipped[0].faces[0][2]);
    CHECK_THROWS_AS(other.attach(Topology::of(flipped, 2)), ValidationError);
    CHECK_NOTHROW(other.attach(topo));

    CHECK_THROWS_AS(io::write_model(dir.path / "generic.hssm", ShapeModel(12, 2)), ValidationError);
  }

  TEST_CASE("FFD lattice round trip") {
    TempDir dir;
    Rng rng(4);
    std::vector<ControlGrid> grids{ControlGrid::covering(Vec3(0, 0, 0), Vec3(10, 20, 30), {4, 5, 6}),
                                   ControlGrid::covering(Vec3(-1, -2, -3), Vec3(10, 20, 30), {6, 6, 6})};
    for (auto& g : grids) g.displacements = random_points(rng, g.size(), 2.0);
    io::write_grids(dir.path / "g.hffd", grids);
    const auto back = io::read_grids(dir.path / "g.hffd");
    REQUIRE(back.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
      CHECK(back[i].dims == grids[i].dims);
      CHECK(back[i].origin == grids[i].origin);
      CHECK(back[i].spacing == grids[i].spacing);
      CHECK(back[i].displacements == grids[i].displacements);
    }
    spit(dir.path / "bad.hffd", "HSSM0000");
    CHECK_THROWS_AS(io::read_grids(dir.path / "bad.hffd"), ValidationError);
  }

  TEST_CASE("doubles format for exact round trips") {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
      const double v = rng.normal() * std::pow(10.0, rng.uniform(-20, 20));
      CHECK(std::stod(io::format_double(v)) == v);
    }
  }

  TEST_CASE("CSV round trip and quoting") {
    TempDir dir;
    io::CsvTable t;
    t.header = {"id", "note", "value"};
    t.rows = {{"a", "plain", "1.5"}, {"b", "has, comma", "-2"}, {"c", "has \"quotes\"", "3e-7"}};
    io::write_csv(dir.path / "t.csv", t);
    const io::CsvTable back = io::read_csv(dir.path / "t.csv");
    CHECK(back.header == t.header);
    CHECK(back.rows == t.rows);

    io::LabelledMatrix m;
    m.ids = {"s0", "s1"};
    m.columns = {"x", "y", "z"};
    m.values = Eigen::MatrixXd::Random(2, 3);
    io::write_matrix_csv(dir.path / "m.csv", "subject", m);
    const io::LabelledMatrix mb = io::read_matrix_csv(dir.path / "m.csv");
    CHECK(mb.ids == m.ids);
    CHECK(mb.columns == m.columns);
    CHECK(mb.values == m.values);

    spit(dir.path / "ragged.csv", "id,x\ns0,1,2\n");
    CHECK_THROWS_AS(io::read_csv(dir.path / "ragged.csv"), ValidationError);
  }

  TEST_CASE("view set and displacement round trip") {
    TempDir dir;
    ViewSet v;
    auto plane = [](const std::string& id, const Vec3& o, const Vec3& u, const Vec3& w) {
      SlicePlane p;
      p.id = id;
      p.origin = o;
      p.axis_u = u;
      p.axis_v = w;
      p.width = 4;
      p.height = 3;
      p.frames = 2;
      p.du = 1.5;
      p.dv = 2.0;
      p.image.resize(24);
      p.labels.resize(24);
      for (int i = 0; i < 24; ++i) {
        p.image[static_cast<std::size_t>(i)] = 0.25f * static_cast<float>(i);
        p.labels[static_cast<std::size_t>(i)] = static_cast<std::uint8_t>(i % 3);
      }
      return p;
    };
    for (int k = 0; k < 3; ++k) v.sax.push_back(plane("sax" + std::to_string(k), Vec3(0, 0, 10.0 * k), Vec3::UnitX(), Vec3::UnitY()));
    v.la_2ch = plane("la_2ch", Vec3(0, 1, 0), Vec3::UnitX(), Vec3::UnitZ());
    v.la_4ch = plane("la_4ch", Vec3(1, 0, 0), Vec3::UnitY(), Vec3::UnitZ());
    io::write_viewset(dir.path / "views", v);
    const ViewSet back = io::read_viewset(dir.path / "views");
    REQUIRE(back.plane_count() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(back.plane(i).id == v.plane(i).id);
      CHECK(back.plane(i).image == v.plane(i).image);
      CHECK(back.plane(i).labels == v.plane(i).labels);
      CHECK((back.plane(i).origin - v.plane(i).origin).norm() < 1e-12);
      CHECK(back.plane(i).du == v.plane(i).du);
    }
    std::vector<Eigen::Vector2d> d(5);
    for (std::size_t i = 0; i < 5; ++i) d[i] = Eigen::Vector2d(0.1 * i, -0.3 * i);
    io::write_displacements(dir.path / "d.json", v, d);
    const auto db = io::read_displacements(dir.path / "d.json");
    REQUIRE(db.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(db[i].first == v.plane(i).id);
      CHECK(db[i].second == d[i]);
    }
  }
}
