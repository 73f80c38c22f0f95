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
#include "cardioshape/primitives.hpp"
#include "doctest.h"
#include "helpers.hpp"

#include <set>

using namespace cardioshape;
using namespace cardioshape::testing;

namespace {

double nearest_brute(const Points& set, const Vec3& q) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < set.cols(); ++i) best = std::min(best, (set.col(i) - q).norm());
  return best;
}

double directed_mean(const Points& a, const Points& b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.cols(); ++i) s += nearest_brute(b, a.col(i));
  return s / static_cast<double>(a.cols());
}

double recon_oracle(const MeshSequence& seq, const TargetClouds& targets) {
  double total = 0.0;
  for (std::size_t t = 0; t < seq.num_frames(); ++t) {
    for (std::size_t s = 0; s < kNumStructures; ++s) {
      total += directed_mean(seq[t][s].vertices, targets[t][s]) + directed_mean(targets[t][s], seq[t][s].vertices);
    }
  }
  return total / static_cast<double>(seq.num_frames());
}

double edge_oracle(const MeshSequence& seq) {
  double total = 0.0;
  for (const auto& f : seq.frames) {
    for (const auto& m : f.meshes) {
      std::set<std::pair<int, int>> edges;
      for (const auto& face : m.faces) {
        for (int k = 0; k < 3; ++k) {
          const int a = face[k], b = face[(k + 1) % 3];
          edges.insert({std::min(a, b), std::max(a, b)});
        }
      }
      std::vector<double> len;
      for (auto [a, b] : edges) len.push_back((m.vertices.col(a) - m.vertices.col(b)).norm());
      double mean = 0.0;
      for (double l : len) mean += l;
      mean /= static_cast<double>(len.size());
      double var = 0.0;
      for (double l : len) var += (l - mean) * (l - mean);
      total += std::sqrt(var / static_cast<double>(len.size()));
    }
  }
  return total / static_cast<double>(seq.num_frames());
}

double cycle_oracle(const MeshSequence& seq) {
  double total = 0.0;
  for (std::size_t s = 0; s < kNumStructures; ++s) {
    const Points& a = seq.frames.back()[s].vertices;
    const Points& b = seq.frames.front()[s].vertices;
    double sum = 0.0;
    for (Eigen::Index i = 0; i < a.cols(); ++i) sum += (a.col(i) - b.col(i)).norm();
    total += sum / static_cast<double>(a.cols());
  }
  return total;
}

TemplateCurvatures curvatures_of(const ChamberSet& cs) {
  TemplateCurvatures h;
  for (std::size_t s = 0; s < kNumStructures; ++s) h[s] = mean_curvature(cs[s]);
  return h;
}

Eigen::VectorXd flatten(const SequenceGradient& g) {
  std::vector<double> out;
  for (const auto& f : g) {
    for (const auto& p : f) out.insert(out.end(), p.data(), p.data() + p.size());
  }
  return Eigen::Map<Eigen::VectorXd>(out.data(), static_cast<Eigen::Index>(out.size()));
}

void check_gradient(const MeshSequence& seq, const std::function<LossResult(const MeshSequence&)>& loss) {
  const Eigen::VectorXd x = vectorize(seq);
  auto f = [&](const Eigen::VectorXd& v) {
    MeshSequence s = seq;
    set_coordinates(s, v);
    return loss(s).value;
  };
  const Eigen::VectorXd fd = central_difference(f, x, 1e-4);
  const Eigen::VectorXd an = flatten(loss(seq).gradient);
  CHECK(relative_error(an, fd) < 1e-5);
}

}  // namespace

TEST_SUITE("objectives") {
  TEST_CASE("reconstruction loss matches the exhaustive oracle") {
    Rng rng(1);
    const MeshSequence seq = jittered_sequence(small_chambers(1), 2, 1.0, rng);
    TargetClouds targets(2);
    for (std::size_t t = 0; t < 2; ++t) {
      for (std::size_t s = 0; s < kNumStructures; ++s) {
        targets[t][s] = seq[t][s].vertices.leftCols(30) + random_points(rng, 30, 2.0);
      }
    }
    CHECK(std::abs(recon_loss(seq, targets).value - recon_oracle(seq, targets)) < 1e-12);
  }

  TEST_CASE("reconstruction loss of exact and translated targets") {
    Rng rng(2);
    const MeshSequence seq = jittered_sequence(small_chambers(1), 1, 0.0, rng);
    TargetClouds exact(1);
    for (std::size_t s = 0; s < kNumStructures; ++s) exact[0][s] = seq[0][s].vertices;
    CHECK(recon_loss(seq, exact).value == 0.0);

    TargetClouds far(1);
    const Vec3 d(0, 0, 1000.0);
    for (std::size_t s = 0; s < kNumStructures; ++s) far[0][s] = seq[0][s].vertices.colwise() + d;
    const double oracle = recon_oracle(seq, far);
    CHECK(std::abs(recon_loss(seq, far).value - oracle) < 1e-9);

    TargetClouds empty(1);
    CHECK_THROWS_AS(recon_loss(seq, empty), ValidationError);
  }

  TEST_CASE("edge loss: toy path and oracle") {
    // Two triangles sharing one edge give five edges; lengths are checked against the oracle.
    TriMesh m;
    m.vertices.resize(3, 4);
    m.vertices << 0, 1, 0, 3, 0, 0, 2, 1, 0, 0, 0, 0;
    m.faces = {{0, 1, 2}, {1, 3, 2}};
    ChamberSet cs;
    for (std::size_t s = 0; s < kNumStructures; ++s) cs[s] = m;
    MeshSequence seq;
    seq.frames.push_back(cs);
    CHECK(std::abs(edge_loss(seq).value - edge_oracle(seq)) < 1e-12);

    const TriMesh eq = icosphere(0);
    ChamberSet uniform;
    for (std::size_t s = 0; s < kNumStructures; ++s) uniform[s] = eq;
    MeshSequence useq;
    useq.frames.push_back(uniform);
    CHECK(edge_loss(useq).value < 1e-12);

    Rng rng(3);
    const MeshSequence rs = jittered_sequence(small_chambers(1), 3, 1.0, rng);
    CHECK(std::abs(edge_loss(rs).value - edge_oracle(rs)) < 1e-12);
  }

  TEST_CASE("edge length std of a 4-edge path") {
    Points p(3, 5);
    p << 0, 1, 2, 5, 8, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0;
    const std::vector<Edge> path{{0, 1}, {1, 2}, {2, 3}, {3, 4}};
    CHECK(edge_length_std(p, path).value == doctest::Approx(1.0).epsilon(1e-14));
  }

  TEST_CASE("curvature loss") {
    const ChamberSet cs = small_chambers(2);
    const TemplateCurvatures h = curvatures_of(cs);
    MeshSequence same;
    same.frames = {cs, cs, cs};
    CHECK(std::abs(curvature_loss(same, h).value) < 1e-12);

    Rng rng(4);
    RigidTransform xf;
    xf.rotation = random_rotation(rng);
    xf.translation = Vec3(5, -7, 20);
    CHECK(std::abs(curvature_loss(transformed(same, xf), h).value) < 1e-9);

    TemplateCurvatures flipped = h;
    for (auto& v : flipped) v = -v;
    MeshSequence one;
    one.frames = {cs};
    CHECK(curvature_loss(one, flipped).value == doctest::Approx(2.0 * kNumStructures).epsilon(1e-12));

    TemplateCurvatures flat = h;
    flat[0].setConstant(1.0);
    CHECK_THROWS_AS(curvature_loss(one, flat), Error);
  }

  TEST_CASE("curvature loss is rigid invariant on a deformed sequence") {
    const ChamberSet cs = small_chambers(2);
    Rng rng(5);
    const MeshSequence seq = jittered_sequence(cs, 2, 0.3, rng);
    RigidTransform xf;
    xf.rotation = random_rotation(rng);
    xf.translation = Vec3(1, 2, 3);
    const double a = curvature_loss(seq, curvatures_of(cs)).value;
    const double b = curvature_loss(transformed(seq, xf), curvatures_of(cs)).value;
    CHECK(std::abs(a - b) < 1e-9);
  }

  TEST_CASE("temporal loss") {
    const ChamberSet cs = small_chambers(1);
    MeshSequence still;
    still.frames = {cs, cs, cs};
    CHECK(temporal_loss(still).value == 0.0);
    MeshSequence moving;
    for (int t = 0; t < 4; ++t) {
      RigidTransform xf;
      xf.translation = Vec3(t, 0, 0);
      moving.frames.push_back(transformed(cs, xf));
    }
    CHECK(temporal_loss(moving).value == doctest::Approx(5.0).epsilon(1e-12));
    MeshSequence single;
    single.frames = {cs};
    CHECK_THROWS_AS(temporal_loss(single), ValidationError);
  }

  TEST_CASE("cycle loss") {
    const ChamberSet cs = small_chambers(1);
    MeshSequence periodic;
    periodic.frames = {cs, small_chambers(1, 12.0), cs};
    CHECK(cycle_loss(periodic).value == 0.0);
    RigidTransform xf;
    xf.translation = Vec3(0, 2, 0);
    MeshSequence shifted;
    shifted.frames = {cs, cs, transformed(cs, xf)};
    CHECK(cycle_loss(shifted).value == doctest::Approx(10.0).epsilon(1e-12));
    Rng rng(6);
    const MeshSequence rs = jittered_sequence(cs, 4, 1.0, rng);
    CHECK(std::abs(cycle_loss(rs).value - cycle_oracle(rs)) < 1e-12);
  }

  TEST_CASE("loss gradients match central differences") {
    Rng rng(7);
    const ChamberSet cs = small_chambers(0, 8.0);
    const MeshSequence seq = jittered_sequence(cs, 3, 0.5, rng);
    TargetClouds targets(3);
    for (std::size_t t = 0; t < 3; ++t) {
      for (std::size_t s = 0; s < kNumStructures; ++s) targets[t][s] = cs[s].vertices + random_points(rng, 12, 1.0);
    }
    const TemplateCurvatures h = curvatures_of(jittered_sequence(cs, 1, 0.5, rng)[0]);
    SUBCASE("recon") { check_gradient(seq, [&](const MeshSequence& s) { return recon_loss(s, targets); }); }
    SUBCASE("edge") { check_gradient(seq, [](const MeshSequence& s) { return edge_loss(s); }); }
    SUBCASE("curvature") { check_gradient(seq, [&](const MeshSequence& s) { return curvature_loss(s, h); }); }
    SUBCASE("temporal") { check_gradient(seq, [](const MeshSequence& s) { return temporal_loss(s); }); }
    SUBCASE("cycle") { check_gradient(seq, [](const MeshSequence& s) { return cycle_loss(s); }); }
    SUBCASE("total") {
      check_gradient(seq, [&](const MeshSequence& s) {
        const auto r = total_loss(s, targets, LossWeights{}, h);
        return LossResult{r.value, r.gradient};
      });
    }
  }

  TEST_CASE("total loss composition") {
    Rng rng(8);
    const ChamberSet cs = small_chambers(1);
    const MeshSequence seq = jittered_sequence(cs, 3, 0.5, rng);
    TargetClouds targets(3);
    for (std::size_t t = 0; t < 3; ++t) {
      for (std::size_t s = 0; s < kNumStructures; ++s) targets[t][s] = cs[s].vertices;
    }
    const TemplateCurvatures h = curvatures_of(cs);
    const LossWeights defaults;
    CHECK(defaults.edge == 0.5);
    CHECK(defaults.curv == 1.0);
    CHECK(defaults.temp == 0.1);
    CHECK(defaults.cycle == 0.2);
    const LossWeights zero{0, 0, 0, 0};
    CHECK(total_loss(seq, targets, zero, h).value == recon_loss(seq, targets).value);
    LossWeights doubled = defaults;
    doubled.edge *= 2.0;
    const auto base = total_loss(seq, targets, defaults, h);
    const auto more = total_loss(seq, targets, doubled, h);
    CHECK(more.value - base.value == doctest::Approx(0.5 * edge_loss(seq).value).epsilon(1e-12));
    CHECK(base.terms.recon >= 0.0);
    CHECK(base.terms.edge >= 0.0);
    CHECK(base.terms.temp >= 0.0);
    CHECK(base.terms.cycle >= 0.0);
    LossWeights bad = defaults;
    bad.temp = -1.0;
    CHECK_THROWS_AS(bad.validate(), ValidationError);
  }

  TEST_CASE("surface distances") {
    Rng rng(9);
    const Points a = random_points(rng, 10, 5.0);
    const Points b = random_points(rng, 10, 5.0);
    const SurfaceDistances d = surface_distances(a, b);
    const double ab = directed_mean(a, b), ba = directed_mean(b, a);
    CHECK(std::abs(d.uni_a_to_b - ab) < 1e-12);
    CHECK(std::abs(d.uni_b_to_a - ba) < 1e-12);
    CHECK(std::abs(d.assd - 0.5 * (ab + ba)) < 1e-12);
    std::vector<double> pooled;
    for (Eigen::Index i = 0; i < a.cols(); ++i) pooled.push_back(nearest_brute(b, a.col(i)));
    for (Eigen::Index i = 0; i < b.cols(); ++i) pooled.push_back(nearest_brute(a, b.col(i)));
    std::sort(pooled.begin(), pooled.end());
    const double pos = 0.9 * (pooled.size() - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const double hd = pooled[lo] + (pos - lo) * (pooled[lo + 1] - pooled[lo]);
    CHECK(std::abs(d.hd90 - hd) < 1e-12);

    const SurfaceDistances self = surface_distances(a, a);
    CHECK(self.assd == 0.0);
    CHECK(self.hd90 == 0.0);

    Points grid(3, 25);
    for (int i = 0; i < 25; ++i) grid.col(i) = Vec3(10.0 * (i % 5), 10.0 * (i / 5), 0.0);
    const Points lifted = grid.colwise() + Vec3(0, 0, 3.0);
    CHECK(surface_distances(grid, lifted).uni_a_to_b == doctest::Approx(3.0).epsilon(1e-12));
    CHECK_THROWS_AS(surface_distances(a, Points(3, 0)), ValidationError);
  }

  TEST_CASE("hd90 grows under dilation away from the other set") {
    Rng rng(10);
    const Points a = random_points(rng, 80, 5.0);
    const Points b = random_points(rng, 80, 5.0);
    double prev = surface_distances(a, b).hd90;
    for (double s = 1.1; s < 3.0; s += 0.3) {
      const double cur = surface_distances(a, b * s + Points::Constant(3, 80, 100.0 * (s - 1.0))).hd90;
      CHECK(cur >= prev);
      prev = cur;
    }
  }

  TEST_CASE("dice") {
    std::vector<std::uint8_t> a(100, 0), b(100, 0);
    CHECK(dice(a, b, 1) == 1.0);
    for (int i = 0; i < 40; ++i) a[i] = 1;
    CHECK(dice(a, a, 1) == 1.0);
    for (int i = 50; i < 90; ++i) b[i] = 1;
    CHECK(dice(a, b, 1) == 0.0);
    std::fill(b.begin(), b.end(), 0);
    for (int i = 20; i < 60; ++i) b[i] = 1;
    CHECK(dice(a, b, 1) == doctest::Approx(0.5));
    const auto va = LabelVolume::zeros({2, 2, 2}, Vec3::Ones());
    const auto vb = LabelVolume::zeros({2, 2, 3}, Vec3::Ones());
    CHECK_THROWS_AS(dice(va, vb, 1), ValidationError);
  }

  TEST_CASE("temporal laplacian error") {
    const ChamberSet cs = small_chambers(0);
    MeshSequence linear;
    for (int t = 0; t < 5; ++t) {
      RigidTransform xf;
      xf.translation = Vec3(0.7 * t, -0.2 * t, 0.1 * t);
      linear.frames.push_back(transformed(cs, xf));
    }
    CHECK(temporal_laplacian_error(linear) < 1e-12);
    MeshSequence still;
    still.frames = {cs, cs, cs};
    CHECK(temporal_laplacian_error(still) == 0.0);
    MeshSequence sine;
    const double w = 0.4;
    for (int t = 0; t < 6; ++t) {
      RigidTransform xf;
      xf.translation = Vec3(std::sin(w * t), 0, 0);
      sine.frames.push_back(transformed(cs, xf));
    }
    double expected = 0.0;
    for (int t = 1; t < 5; ++t) expected += std::abs(std::sin(w * (t - 1)) + std::sin(w * (t + 1)) - 2 * std::sin(w * t));
    expected /= 4.0;
    CHECK(temporal_laplacian_error(sine) == doctest::Approx(expected).epsilon(1e-9));
    MeshSequence two;
    two.frames = {cs, cs};
    CHECK_THROWS_AS(temporal_laplacian_error(two), ValidationError);
  }

  TEST_CASE("pearson r") {
    std::vector<double> x{1, 2, 3, 4, 5}, y{2, 4, 6, 8, 10}, z{-1, -2, -3, -4, -5};
    CHECK(pearson_r(x, x) == doctest::Approx(1.0));
    CHECK(pearson_r(x, y) == doctest::Approx(1.0));
    CHECK(pearson_r(x, z) == doctest::Approx(-1.0));
    Rng rng(11);
    std::vector<double> a(50), b(50);
    for (int i = 0; i < 50; ++i) {
      a[i] = rng.normal();
      b[i] = a[i] + rng.normal();
    }
    double ma = 0, mb = 0;
    for (int i = 0; i < 50; ++i) ma += a[i] / 50, mb += b[i] / 50;
    double sab = 0, saa = 0, sbb = 0;
    for (int i = 0; i < 50; ++i) {
      sab += (a[i] - ma) * (b[i] - mb);
      saa += (a[i] - ma) * (a[i] - ma);
      sbb += (b[i] - mb) * (b[i] - mb);
    }
    CHECK(std::abs(pearson_r(a, b) - sab / std::sqrt(saa * sbb)) < 1e-12);
    std::vector<double> c(5, 1.0);
    CHECK_THROWS_AS(pearson_r(x, c), Error);
    CHECK_THROWS_AS(pearson_r(x, std::vector<double>{1, 2}), ValidationError);
  }
}
