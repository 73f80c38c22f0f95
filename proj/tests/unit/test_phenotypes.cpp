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
#include "cardioshape/phenotypes.hpp"
#include "doctest.h"
#include "helpers.hpp"

#include <numbers>

using namespace cardioshape;
using namespace cardioshape::testing;

namespace {

TriMesh scaled_about(const TriMesh& m, const Vec3& c, double s) {
  TriMesh out = m;
  out.vertices = ((m.vertices.colwise() - c) * s).colwise() + c;
  return out;
}

/// LV-epi is LV-endo scaled by 1.4 about its centre; every structure is
/// scaled per frame by the given factors.
MeshSequence beating(const std::vector<double>& lv, const std::vector<double>& others) {
  const ChamberSet rest = small_chambers(3, 20.0);
  MeshSequence seq;
  for (std::size_t t = 0; t < lv.size(); ++t) {
    ChamberSet f = rest;
    for (std::size_t s = 0; s < kNumStructures; ++s) {
      const Vec3 c = rest[s].vertices.rowwise().mean();
      const double k = s <= 1 ? lv[t] : others[t];
      f[s] = scaled_about(rest[s], c, k);
    }
    const Vec3 c = rest[0].vertices.rowwise().mean();
    f[Structure::LvEpi] = scaled_about(rest[0], c, 1.4 * lv[t]);
    f[Structure::LvEpi].structure = Structure::LvEpi;
    seq.frames.push_back(f);
  }
  return seq;
}

}  // namespace

TEST_SUITE("phenotypes") {
  TEST_CASE("closed-form volumes") {
    CHECK(mesh_volume(cube_mesh(10.0)) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(mesh_volume(cube_mesh(20.0)) == doctest::Approx(8.0).epsilon(1e-12));
    const double r = 25.0;
    const double exact = 4.0 / 3.0 * std::numbers::pi * r * r * r / 1000.0;
    const double approx = mesh_volume(icosphere(5, r));
    CHECK(approx < exact);
    CHECK(std::abs(approx - exact) / exact < 5e-3);
  }

  TEST_CASE("volume of a thick shell is the difference of two spheres") {
    const TriMesh inner = icosphere(4, 20.0);
    const TriMesh outer = icosphere(4, 28.0);
    const double shell = mesh_volume(outer) - mesh_volume(inner);
    const double exact = 4.0 / 3.0 * std::numbers::pi * (28.0 * 28.0 * 28.0 - 20.0 * 20.0 * 20.0) / 1000.0;
    CHECK(std::abs(shell - exact) / exact < 1e-2);
  }

  TEST_CASE("volume is rigid invariant and rejects open meshes") {
    Rng rng(1);
    const TriMesh s = icosphere(3, 15.0);
    for (int i = 0; i < 10; ++i) {
      RigidTransform xf;
      xf.rotation = random_rotation(rng);
      xf.translation = 100.0 * Vec3(rng.normal(), rng.normal(), rng.normal());
      TriMesh m = s;
      m.vertices = (xf.rotation * s.vertices).colwise() + xf.translation;
      CHECK(mesh_volume(m) == doctest::Approx(mesh_volume(s)).epsilon(1e-9));
    }
    TriMesh open = s;
    open.faces.pop_back();
    CHECK_THROWS_AS(mesh_volume(open), ValidationError);
  }

  TEST_CASE("ejection fractions follow the cubic volume ratio") {
    const std::vector<double> lv{1.0, 0.95, 0.85, 0.8, 0.9};
    const std::vector<double> other{0.9, 1.0, 0.95, 0.85, 0.9};
    const MeshSequence seq = beating(lv, other);
    const PhenotypeTable p = phenotype_table(seq);
    CHECK(p.ed_frame == 0);
    CHECK(p.es_frame == 3);
    const double v0 = mesh_volume(seq[0][Structure::LvEndo]);
    CHECK(p.lvedv == doctest::Approx(v0).epsilon(1e-12));
    CHECK(p.lvesv == doctest::Approx(v0 * 0.8 * 0.8 * 0.8).epsilon(1e-9));
    CHECK(p.lvef == doctest::Approx(100.0 * (1.0 - 0.512)).epsilon(1e-9));
    CHECK(p.lvsv == doctest::Approx(p.lvedv - p.lvesv).epsilon(1e-12));
    CHECK(p.rvef == doctest::Approx(100.0 * (1.0 - 0.85 * 0.85 * 0.85)).epsilon(1e-9));
    CHECK(p.laef == doctest::Approx(p.rvef).epsilon(1e-12));
    CHECK(p.raef == doctest::Approx(p.rvef).epsilon(1e-12));
    CHECK(p.lamaxv >= p.laminv);
    const auto curve = volume_curve(seq, Structure::Rv);
    REQUIRE(curve.size() == 5);
    CHECK(*std::max_element(curve.begin(), curve.end()) == doctest::Approx(p.rvedv));
  }

  TEST_CASE("myocardial mass and wall thickness at end-diastole") {
    const MeshSequence seq = beating({0.9, 1.0, 0.8}, {1.0, 1.0, 1.0});
    const PhenotypeTable p = phenotype_table(seq);
    REQUIRE(p.ed_frame == 1);
    const double endo = mesh_volume(seq[1][Structure::LvEndo]);
    CHECK(p.lvm == doctest::Approx(endo * (1.4 * 1.4 * 1.4 - 1.0) * kMyocardialDensity).epsilon(1e-9));
    // Radius 20 on the unit icosphere: every vertex sits at distance 20.
    CHECK(p.lvwt_mean == doctest::Approx(0.4 * 20.0).epsilon(1e-9));
    CHECK(p.lvwt_max == doctest::Approx(0.4 * 20.0).epsilon(1e-9));
  }

  TEST_CASE("wall thickness needs matching vertex counts") {
    const TriMesh a = icosphere(2, 10.0);
    const TriMesh b = icosphere(3, 12.0);
    CHECK_THROWS_AS(wall_thickness(a, b), ValidationError);
    const WallThickness wt = wall_thickness(a, scaled_about(a, Vec3::Zero(), 1.5));
    CHECK(wt.per_vertex.size() == a.num_vertices());
    CHECK(wt.mean == doctest::Approx(5.0));
  }

  TEST_CASE("displacement curve of a translated structure") {
    const ChamberSet cs = small_chambers(1);
    MeshSequence seq;
    for (int t = 0; t < 4; ++t) {
      RigidTransform xf;
      xf.translation = Vec3(0, 3.0 * t, 4.0 * t);
      seq.frames.push_back(transformed(cs, xf));
    }
    const auto d = displacement_curve(seq, Structure::Ra);
    REQUIRE(d.size() == 4);
    for (int t = 0; t < 4; ++t) CHECK(d[static_cast<std::size_t>(t)] == doctest::Approx(5.0 * t).epsilon(1e-12));
  }

  TEST_CASE("phenotype columns and values line up") {
    const PhenotypeTable p = phenotype_table(beating({1.0, 0.8}, {1.0, 0.9}));
    const auto cols = PhenotypeTable::columns();
    const auto vals = p.values();
    CHECK(cols.size() == vals.size());
    CHECK(cols.size() == 19);
  }

  TEST_CASE("phenotypes are rigid invariant") {
    Rng rng(2);
    const MeshSequence seq = beating({1.0, 0.9, 0.8, 0.95}, {0.9, 1.0, 0.9, 0.85});
    RigidTransform xf;
    xf.rotation = random_rotation(rng);
    xf.translation = Vec3(10, -20, 30);
    const auto a = phenotype_table(seq).values();
    const auto b = phenotype_table(transformed(seq, xf)).values();
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(a[i]).epsilon(1e-9));
  }
}
