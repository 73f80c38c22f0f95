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
#include "cardioshape/mesh_fit.hpp"
#include "doctest.h"
#include "helpers.hpp"

#include <set>

using namespace cardioshape;
using namespace cardioshape::testing;

namespace {

LabelVolume empty_volume(int n = 8) { return LabelVolume::zeros({n, n, n}, Vec3(2.0, 2.0, 2.0), Vec3(1.0, 1.0, 1.0)); }

std::set<std::array<long, 3>> keyed(const Points& p) {
  std::set<std::array<long, 3>> out;
  for (Eigen::Index i = 0; i < p.cols(); ++i) {
    out.insert({std::lround(p(0, i) * 1000), std::lround(p(1, i) * 1000), std::lround(p(2, i) * 1000)});
  }
  return out;
}

FitConfig small_config(int iterations) {
  FitConfig cfg;
  cfg.coarse = {4, 4, 4};
  cfg.mid = {6, 5, 5};
  cfg.fine = {10, 6, 6};
  cfg.lattice_lo = Vec3(-40, -40, -40);
  cfg.lattice_hi = Vec3(220, 80, 40);
  cfg.iterations = iterations;
  return cfg;
}

TemplateCurvatures curvatures_of(const ChamberSet& cs) {
  TemplateCurvatures h;
  for (std::size_t s = 0; s < kNumStructures; ++s) h[s] = mean_curvature(cs[s]);
  return h;
}

TargetClouds shifted_targets(const ChamberSet& cs, std::size_t frames) {
  TargetClouds targets(frames);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t s = 0; s < kNumStructures; ++s) {
      targets[t][s] = cs[s].vertices.colwise() + Vec3(1.5 + 0.5 * static_cast<double>(t), -1.0, 0.5);
    }
  }
  return targets;
}

}  // namespace

TEST_SUITE("mesh_fit") {
  TEST_CASE("surface points of a single voxel are its six face centres") {
    LabelVolume v = empty_volume();
    v.at(3, 4, 5) = 1;
    const Points p = extract_surface_points(v, std::uint8_t{1});
    REQUIRE(p.cols() == 6);
    const Vec3 c = v.voxel_center(3, 4, 5);
    std::set<std::array<long, 3>> expected;
    for (int a = 0; a < 3; ++a) {
      for (double s : {-1.0, 1.0}) {
        Vec3 q = c;
        q[a] += s * 1.0;
        expected.insert({std::lround(q.x() * 1000), std::lround(q.y() * 1000), std::lround(q.z() * 1000)});
      }
    }
    CHECK(keyed(p) == expected);
  }

  TEST_CASE("a 2x2x2 block exposes 24 faces, also at the volume border") {
    LabelVolume inner = empty_volume();
    LabelVolume corner = empty_volume();
    for (int k = 0; k < 2; ++k) {
      for (int j = 0; j < 2; ++j) {
        for (int i = 0; i < 2; ++i) {
          inner.at(3 + i, 3 + j, 3 + k) = 2;
          corner.at(i, j, k) = 2;
        }
      }
    }
    CHECK(extract_surface_points(inner, std::uint8_t{2}).cols() == 24);
    CHECK(extract_surface_points(corner, std::uint8_t{2}).cols() == 24);
    CHECK_THROWS_AS(extract_surface_points(inner, std::uint8_t{1}), ValidationError);
  }

  TEST_CASE("face count of a voxel ball matches a neighbour scan") {
    const int n = 20;
    LabelVolume v = empty_volume(n);
    auto inside = [&](int i, int j, int k) {
      if (i < 0 || j < 0 || k < 0 || i >= n || j >= n || k >= n) return false;
      return (Vec3(i, j, k) - Vec3(9.5, 9.5, 9.5)).norm() < 6.0;
    };
    for (int k = 0; k < n; ++k) {
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) v.at(i, j, k) = inside(i, j, k) ? 1 : 0;
      }
    }
    long faces = 0;
    for (int k = 0; k < n; ++k) {
      for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
          if (!inside(i, j, k)) continue;
          faces += !inside(i - 1, j, k) + !inside(i + 1, j, k) + !inside(i, j - 1, k) + !inside(i, j + 1, k) +
                   !inside(i, j, k - 1) + !inside(i, j, k + 1);
        }
      }
    }
    CHECK(extract_surface_points(v, std::uint8_t{1}).cols() == faces);
  }

  TEST_CASE("label groups merge before extracting the boundary") {
    LabelVolume v = empty_volume();
    v.at(3, 3, 3) = 1;
    v.at(4, 3, 3) = 2;
    const std::vector<std::uint8_t> both{1, 2};
    CHECK(extract_surface_points(v, both).cols() == 10);
  }

  TEST_CASE("pooling round trip") {
    Rng rng(1);
    const ChamberSet cs = jittered_sequence(small_chambers(1), 1, 1.0, rng)[0];
    const Points pooled = pooled_vertices(cs);
    CHECK(pooled.cols() == Topology::of(cs).total_vertices());
    const ChamberSet back = unpooled(pooled, cs);
    for (std::size_t s = 0; s < kNumStructures; ++s) CHECK(back[s].vertices == cs[s].vertices);
  }

  TEST_CASE("zero lattices reproduce the template") {
    const ChamberSet cs = small_chambers(1);
    const FitConfig cfg = small_config(0);
    const std::array<ControlGrid, 2> global{ControlGrid::covering(cfg.lattice_lo, cfg.lattice_hi, cfg.coarse),
                                            ControlGrid::covering(cfg.lattice_lo, cfg.lattice_hi, cfg.mid)};
    const std::vector<ControlGrid> frames(3, ControlGrid::covering(cfg.lattice_lo, cfg.lattice_hi, cfg.fine));
    const MeshSequence seq = apply_fit(cs, global, frames);
    REQUIRE(seq.num_frames() == 3);
    for (const auto& f : seq.frames) {
      for (std::size_t s = 0; s < kNumStructures; ++s) CHECK(f[s].vertices == cs[s].vertices);
    }
  }

  TEST_CASE("fitting a translated target") {
    const ChamberSet cs = small_chambers(1);
    const TemplateCurvatures h = curvatures_of(cs);
    const TargetClouds targets = shifted_targets(cs, 2);
    const FitConfig cfg = small_config(40);
    const FitResult a = fit_sequence(cs, h, targets, cfg);

    REQUIRE(a.sequence.num_frames() == 2);
    REQUIRE(a.trace.size() == 2 * 41);
    for (const auto& f : a.sequence.frames) {
      for (std::size_t s = 0; s < kNumStructures; ++s) CHECK(f[s].faces == cs[s].faces);
    }

    double initial = 0.0, best = std::numeric_limits<double>::infinity();
    for (const auto& e : a.trace) {
      if (e.stage != 2) continue;
      if (e.iteration == 0) initial = e.total;
      best = std::min(best, e.total);
    }
    const double final_total = total_loss(a.sequence, targets, cfg.weights, h).value;
    CHECK(final_total == doctest::Approx(best).epsilon(1e-9));
    CHECK(final_total <= initial);

    const FitResult b = fit_sequence(cs, h, targets, cfg);
    for (std::size_t t = 0; t < 2; ++t) {
      for (std::size_t s = 0; s < kNumStructures; ++s) CHECK(a.sequence[t][s].vertices == b.sequence[t][s].vertices);
    }
  }

  TEST_CASE("fit validation") {
    FitConfig cfg = small_config(10);
    cfg.coarse = {3, 4, 4};
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    cfg = small_config(10);
    cfg.lr = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ValidationError);
    const ChamberSet cs = small_chambers(0);
    CHECK_THROWS_AS(fit_sequence(cs, curvatures_of(cs), TargetClouds{}, small_config(1)), ValidationError);
  }
}
