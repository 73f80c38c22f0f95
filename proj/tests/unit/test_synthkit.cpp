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
#include "cardioshape/objectives.hpp"
#include "cardioshape/phenotypes.hpp"
#include "cardioshape/synthkit.hpp"
#include "doctest.h"
#include "helpers.hpp"

#include <numbers>

using namespace cardioshape;
using namespace cardioshape::testing;

namespace {

SynthConfig small_config() {
  SynthConfig cfg;
  cfg.vertex_budget = {162, 162, 162, 162, 162};
  cfg.frames = 6;
  return cfg;
}

}  // namespace

TEST_SUITE("synthkit") {
  TEST_CASE("vertex budgets") {
    const auto full = SynthConfig::full_vertex_budget();
    int total = 0;
    for (int v : full) total += v;
    CHECK(total == 27034);
    const SynthConfig cfg;
    const Template tmpl = make_template(cfg);
    for (std::size_t s = 0; s < kNumStructures; ++s) {
      CHECK(tmpl.chambers[s].num_vertices() == cfg.vertex_budget[s]);
      CHECK_NOTHROW(tmpl.chambers[s].validate());
      CHECK(tmpl.curvatures[s].size() == cfg.vertex_budget[s]);
    }
    SynthConfig bad = cfg;
    bad.vertex_budget[1] = 600;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
  }

  TEST_CASE("template chambers are closed and nested") {
    const Template tmpl = make_template(small_config());
    const double endo = mesh_volume(tmpl.chambers[Structure::LvEndo]);
    const double epi = mesh_volume(tmpl.chambers[Structure::LvEpi]);
    CHECK(endo > 0.0);
    CHECK(epi > endo);
    const WallThickness wt = wall_thickness(tmpl.chambers[Structure::LvEndo], tmpl.chambers[Structure::LvEpi]);
    CHECK(wt.mean == doctest::Approx(small_config().wall_thickness).epsilon(1e-9));
  }

  TEST_CASE("contraction is periodic") {
    for (double a : {0.0, 0.1, 0.3}) {
      for (double phase : {0.0, 0.2}) {
        CHECK(contraction_scale(a, phase, 0, 10) == doctest::Approx(1.0 - a * std::sin(phase) * std::sin(phase)));
        CHECK(contraction_scale(a, phase, 9, 10) == doctest::Approx(contraction_scale(a, phase, 0, 10)).epsilon(1e-12));
        for (int t = 0; t < 10; ++t) {
          const double s = contraction_scale(a, phase, t, 10);
          CHECK(s <= 1.0);
          CHECK(s >= 1.0 - a - 1e-12);
        }
      }
    }
  }

  TEST_CASE("subjects are deterministic and cyclic") {
    const SynthConfig cfg = small_config();
    const Template tmpl = make_template(cfg);
    const auto modes = make_modes(cfg, tmpl);
    REQUIRE(modes.size() == static_cast<std::size_t>(cfg.n_modes));
    for (const auto& m : modes) {
      CHECK(m.cols() == tmpl.chambers.total_vertices());
      CHECK(std::sqrt(m.colwise().squaredNorm().sum() / static_cast<double>(m.cols())) <= 1.0 + 1e-9);
    }
    const SynthSubject a = synth_subject(cfg, tmpl, modes, 3);
    const SynthSubject b = synth_subject(cfg, tmpl, modes, 3);
    const SynthSubject c = synth_subject(cfg, tmpl, modes, 4);
    CHECK(vectorize(a.sequence) == vectorize(b.sequence));
    CHECK(vectorize(a.sequence) != vectorize(c.sequence));
    CHECK(a.sequence.num_frames() == 6);
    CHECK(cycle_loss(a.sequence).value < 1e-9);
    CHECK(a.truth.mode_weights.size() == cfg.n_modes);
  }

  TEST_CASE("population attributes track their driving modes") {
    SynthConfig cfg = small_config();
    cfg.frames = 2;
    const Population pop = synth_population(cfg, 120);
    REQUIRE(pop.subjects.size() == 120);
    std::vector<double> age, w0, bmi, w3;
    int groups[3] = {0, 0, 0};
    for (const auto& s : pop.subjects) {
      age.push_back(s.attributes.age);
      bmi.push_back(s.attributes.bmi);
      w0.push_back(s.truth.mode_weights[0]);
      w3.push_back(s.truth.mode_weights[3]);
      CHECK((s.attributes.sex == 0 || s.attributes.sex == 1));
      REQUIRE((s.attributes.group >= 0 && s.attributes.group <= 2));
      ++groups[s.attributes.group];
    }
    CHECK(pearson_r(age, w0) > 0.5);
    CHECK(pearson_r(bmi, w3) > 0.5);
    for (int g : groups) CHECK(g > 20);
  }

  TEST_CASE("voxelized spheres match their analytic volume") {
    ChamberSet cs;
    for (std::size_t s = 0; s < kNumStructures; ++s) {
      cs[s] = icosphere(4, 12.0, Vec3(30.0 + 50.0 * static_cast<double>(s), 40.0, 40.0));
      cs[s].structure = kStructures[s];
    }
    // LV-epi encloses LV-endo so the myocardium is a shell.
    cs[Structure::LvEpi] = icosphere(4, 16.0, Vec3(30.0, 40.0, 40.0));
    cs[Structure::LvEpi].structure = Structure::LvEpi;
    const LabelVolume v = voxelize(cs, 1.0, {280, 80, 80});
    std::array<std::size_t, 6> counts{};
    for (auto l : v.data) ++counts[l];
    const double sphere = 4.0 / 3.0 * std::numbers::pi * 12.0 * 12.0 * 12.0;
    const double shell = 4.0 / 3.0 * std::numbers::pi * (16.0 * 16.0 * 16.0 - 12.0 * 12.0 * 12.0);
    for (std::size_t label = 1; label <= 5; ++label) {
      if (label == 2) {
        CHECK(std::abs(counts[label] - shell) / shell < 0.03);
      } else {
        CHECK(std::abs(counts[label] - sphere) / sphere < 0.03);
      }
    }
    CHECK_THROWS_AS(voxelize(cs, 1.0, {100, 80, 80}), ValidationError);
  }

  TEST_CASE("injected plane shifts have the requested spread") {
    const SynthConfig cfg;
    std::vector<LabelVolume> labels{LabelVolume::zeros(cfg.volume_dims, Vec3::Constant(cfg.voxel_size))};
    std::vector<IntensityVolume> intensity{synth_intensity(labels.front())};
    double sum_sq = 0.0;
    int n = 0;
    for (std::uint64_t seed = 0; seed < 15; ++seed) {
      const SlicedViews sv = slice_views(intensity, labels, ViewSpecs::standard(), 2.0, seed);
      REQUIRE(sv.truth.size() == sv.views.plane_count());
      for (std::size_t i = 0; i < sv.views.plane_count(); ++i) CHECK(sv.views.plane(i).displacement.norm() == 0.0);
      for (const auto& d : sv.truth) {
        sum_sq += d.squaredNorm();
        n += 2;
      }
    }
    CHECK(std::sqrt(sum_sq / n) == doctest::Approx(2.0).epsilon(0.15));
    const SlicedViews again = slice_views(intensity, labels, ViewSpecs::standard(), 2.0, 3);
    const SlicedViews same = slice_views(intensity, labels, ViewSpecs::standard(), 2.0, 3);
    CHECK(again.truth == same.truth);
    CHECK(again.views.la_2ch.image == same.views.la_2ch.image);
  }

  TEST_CASE("standard views") {
    const ViewSpecs specs = ViewSpecs::standard();
    CHECK(specs.sax.size() == 8);
    CHECK(specs.all().size() == 10);
    for (std::size_t i = 1; i < specs.sax.size(); ++i) {
      CHECK((specs.sax[i].origin - specs.sax[i - 1].origin).norm() == doctest::Approx(10.0));
    }
  }
}
