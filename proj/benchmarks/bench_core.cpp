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

#include "cardioshape/ffd.hpp"
#include "cardioshape/mesh_fit.hpp"
#include "cardioshape/motion_correct.hpp"
#include "cardioshape/nearest.hpp"
#include "cardioshape/objectives.hpp"
#include "cardioshape/population.hpp"
#include "cardioshape/rng.hpp"
#include "cardioshape/ssm.hpp"
#include "cardioshape/synthkit.hpp"

#include <benchmark/benchmark.h>

using namespace cardioshape;

namespace {

const Template& shared_template() {
  static const Template t = make_template(SynthConfig{});
  return t;
}

Points noise(Rng& rng, Eigen::Index n, double sd) {
  Points p(3, n);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = sd * rng.normal();
  return p;
}

MeshSequence static_sequence(int frames) {
  MeshSequence seq;
  seq.frames.assign(static_cast<std::size_t>(frames), shared_template().chambers);
  return seq;
}

}  // namespace

static void BM_WarpPoints(benchmark::State& state) {
  Rng rng(1);
  ControlGrid g = ControlGrid::covering(Vec3::Zero(), Vec3(192, 192, 256), {24, 24, 32});
  g.displacements = noise(rng, g.size(), 2.0);
  const Points pts = pooled_vertices(shared_template().chambers);
  for (auto _ : state) benchmark::DoNotOptimize(warp_points(g, pts));
  state.SetItemsProcessed(state.iterations() * pts.cols());
}
BENCHMARK(BM_WarpPoints)->Unit(benchmark::kMicrosecond);

static void BM_WarpGradient(benchmark::State& state) {
  Rng rng(2);
  ControlGrid g = ControlGrid::covering(Vec3::Zero(), Vec3(192, 192, 256), {24, 24, 32});
  const Points pts = pooled_vertices(shared_template().chambers);
  const Points up = noise(rng, pts.cols(), 1.0);
  for (auto _ : state) benchmark::DoNotOptimize(warp_gradient(g, pts, up));
  state.SetItemsProcessed(state.iterations() * pts.cols());
}
BENCHMARK(BM_WarpGradient)->Unit(benchmark::kMicrosecond);

static void BM_NearestQuery(benchmark::State& state) {
  Rng rng(3);
  const Points cloud = noise(rng, state.range(0), 30.0);
  const PointGrid grid(cloud);
  const Points queries = noise(rng, 1000, 30.0);
  for (auto _ : state) {
    for (Eigen::Index i = 0; i < queries.cols(); ++i) benchmark::DoNotOptimize(grid.nearest(queries.col(i)));
  }
  state.SetItemsProcessed(state.iterations() * queries.cols());
}
BENCHMARK(BM_NearestQuery)->Arg(1000)->Arg(10000)->Arg(100000);

static void BM_TotalLoss(benchmark::State& state) {
  const int frames = static_cast<int>(state.range(0));
  const Template& t = shared_template();
  const MeshSequence seq = static_sequence(frames);
  TargetClouds targets(static_cast<std::size_t>(frames));
  Rng rng(4);
  for (auto& f : targets) {
    for (std::size_t s = 0; s < kNumStructures; ++s) f[s] = t.chambers[s].vertices + noise(rng, t.chambers[s].num_vertices(), 1.0);
  }
  for (auto _ : state) benchmark::DoNotOptimize(total_loss(seq, targets, LossWeights{}, t.curvatures));
}
BENCHMARK(BM_TotalLoss)->Arg(1)->Arg(10)->Unit(benchmark::kMillisecond);

static void BM_McObjective(benchmark::State& state) {
  SynthConfig cfg;
  cfg.frames = 10;
  const Population pop = synth_population(cfg, 1);
  const FrameVolumes vols = render_sequence(pop.subjects.front().sequence, cfg);
  const SlicedViews sv = slice_views(vols.intensity, vols.labels, ViewSpecs::standard(), 2.0, 1);
  for (auto _ : state) benchmark::DoNotOptimize(mc_objective(sv.views));
}
BENCHMARK(BM_McObjective)->Unit(benchmark::kMillisecond);

static void BM_IncrementalPcaBatch(benchmark::State& state) {
  Rng rng(5);
  const Eigen::Index dim = state.range(0);
  Eigen::MatrixXd batch(dim, 128);
  for (Eigen::Index i = 0; i < batch.size(); ++i) batch.data()[i] = rng.normal();
  for (auto _ : state) {
    ShapeModel model(dim, 64);
    model.partial_fit(batch);
    model.partial_fit(batch);
    benchmark::DoNotOptimize(model.components().data());
  }
}
BENCHMARK(BM_IncrementalPcaBatch)->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);

static void BM_KnnRetrieve(benchmark::State& state) {
  Rng rng(6);
  Eigen::MatrixXd raw(state.range(0), 32);
  for (Eigen::Index i = 0; i < raw.size(); ++i) raw.data()[i] = rng.normal();
  const FeatureMatrix f = FeatureMatrix::from(raw);
  Eigen::Index q = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(knn_retrieve(f, q, 10, true));
    q = (q + 1) % f.subjects();
  }
}
BENCHMARK(BM_KnnRetrieve)->Arg(1000)->Arg(10000);

BENCHMARK_MAIN();
