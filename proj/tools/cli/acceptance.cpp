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

#include "acceptance.hpp"

#include "cardioshape/error.hpp"
#include "cardioshape/ffd.hpp"
#include "cardioshape/mesh_fit.hpp"
#include "cardioshape/motion_correct.hpp"
#include "cardioshape/objectives.hpp"
#include "cardioshape/phenotypes.hpp"
#include "cardioshape/population.hpp"
#include "cardioshape/primitives.hpp"
#include "cardioshape/rng.hpp"
#include "cardioshape/ssm.hpp"
#include "cardioshape/synthkit.hpp"
#include "commands.hpp"

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <numbers>
#include <set>
#include <sstream>

namespace cardioshape::acceptance {
namespace {

namespace fs = std::filesystem;

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << "FAILED " << what << "; ";
    }
  }
};

std::string fmt(double v, const char* spec = "%.3g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

Points random_points(Rng& rng, Eigen::Index n, const Vec3& lo, const Vec3& hi) {
  Points p(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int d = 0; d < 3; ++d) p(d, i) = rng.uniform(lo[d], hi[d]);
  }
  return p;
}

Points gaussian_points(Rng& rng, Eigen::Index n, double sd) {
  Points p(3, n);
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = sd * rng.normal();
  return p;
}

Eigen::Matrix3d random_rotation(Rng& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  return q.normalized().toRotationMatrix();
}

double rel_error(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const double scale = std::max(b.norm(), 1e-300);
  return (a - b).norm() / scale;
}

// --- C1 --------------------------------------------------------------------

ControlGrid random_grid(Rng& rng, double amplitude) {
  const Vec3 lo(rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-50, 50));
  const Vec3 size(rng.uniform(40, 120), rng.uniform(40, 120), rng.uniform(40, 120));
  const std::array<int, 3> dims{4 + static_cast<int>(rng.below(4)), 4 + static_cast<int>(rng.below(4)),
                                4 + static_cast<int>(rng.below(4))};
  ControlGrid g = ControlGrid::covering(lo, lo + size, dims);
  g.displacements = gaussian_points(rng, g.size(), amplitude);
  return g;
}

Vec3 grid_lo(const ControlGrid& g) { return g.origin + g.spacing; }
Vec3 grid_hi(const ControlGrid& g) {
  return g.origin + g.spacing.cwiseProduct(Vec3(g.dims[0] - 2, g.dims[1] - 2, g.dims[2] - 2));
}

double weighted_sum(const Points& p, const Points& w) { return p.cwiseProduct(w).sum(); }

Outcome criterion_ffd() {
  Outcome o;
  Rng rng(101);
  double identity_err = 0.0, translate_err = 0.0, grad_err = 0.0, point_err = 0.0, compose_err = 0.0;
  for (int inst = 0; inst < 20; ++inst) {
    ControlGrid g = random_grid(rng, 0.0);
    const Points pts = random_points(rng, 40, grid_lo(g), grid_hi(g));
    identity_err = std::max(identity_err, (warp_points(g, pts) - pts).cwiseAbs().maxCoeff());

    const Vec3 d(rng.normal(), rng.normal(), rng.normal());
    g.displacements = d.replicate(1, g.size());
    translate_err = std::max(translate_err, (warp_points(g, pts).colwise() - d - pts).cwiseAbs().maxCoeff());

    g.displacements = gaussian_points(rng, g.size(), 3.0);
    const Points up = gaussian_points(rng, pts.cols(), 1.0);

    // Central differences over every control displacement.
    const Points analytic = warp_gradient(g, pts, up);
    Points fd(3, g.size());
    const double h = 1e-4;
    for (Eigen::Index i = 0; i < g.displacements.size(); ++i) {
      ControlGrid gp = g, gm = g;
      gp.displacements.data()[i] += h;
      gm.displacements.data()[i] -= h;
      fd.data()[i] = (weighted_sum(warp_points(gp, pts), up) - weighted_sum(warp_points(gm, pts), up)) / (2 * h);
    }
    grad_err = std::max(grad_err, rel_error(analytic, fd));

    const Points analytic_p = warp_backprop_points(g, pts, up);
    Points fdp(3, pts.cols());
    for (Eigen::Index i = 0; i < pts.size(); ++i) {
      Points pp = pts, pm = pts;
      pp.data()[i] += h;
      pm.data()[i] -= h;
      fdp.data()[i] = (weighted_sum(warp_points(g, pp), up) - weighted_sum(warp_points(g, pm), up)) / (2 * h);
    }
    point_err = std::max(point_err, rel_error(analytic_p, fdp));

    ControlGrid g2 = ControlGrid::covering(grid_lo(g), grid_hi(g), {5, 5, 5});
    g2.displacements = gaussian_points(rng, g2.size(), 2.0);
    std::vector<ControlGrid> chain{g, g2};
    const auto grads = compose_warp_gradient(chain, pts, up);
    for (std::size_t level = 0; level < chain.size(); ++level) {
      Points fdc(3, chain[level].size());
      for (Eigen::Index i = 0; i < fdc.size(); ++i) {
        auto cp = chain, cm = chain;
        cp[level].displacements.data()[i] += h;
        cm[level].displacements.data()[i] -= h;
        fdc.data()[i] = (weighted_sum(compose_warp(cp, pts), up) - weighted_sum(compose_warp(cm, pts), up)) / (2 * h);
      }
      compose_err = std::max(compose_err, rel_error(grads[level], fdc));
    }
  }
  o.require(identity_err == 0.0, "identity warp not exact");
  o.require(translate_err < 1e-12, "constant displacement differs from translation");
  o.require(grad_err < 1e-5, "control-point gradient");
  o.require(point_err < 1e-5, "point gradient");
  o.require(compose_err < 1e-5, "composed-warp gradient");
  o.detail << "identity " << fmt(identity_err) << ", translation " << fmt(translate_err) << ", grad rel "
           << fmt(grad_err) << ", point rel " << fmt(point_err) << ", composed rel " << fmt(compose_err);
  return o;
}

// --- C2 --------------------------------------------------------------------

double min_dist(const Vec3& p, const Points& cloud) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index j = 0; j < cloud.cols(); ++j) best = std::min(best, (cloud.col(j) - p).norm());
  return best;
}

double directed_mean(const Points& a, const Points& b) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < a.cols(); ++i) s += min_dist(a.col(i), b);
  return s / static_cast<double>(a.cols());
}

double oracle_percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double rank = q / 100.0 * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (rank - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

double oracle_edge_std(const TriMesh& m) {
  std::set<std::pair<int, int>> edges;
  for (const Face& f : m.faces) {
    for (int k = 0; k < 3; ++k) {
      const int a = f[static_cast<std::size_t>(k)], b = f[static_cast<std::size_t>((k + 1) % 3)];
      edges.insert({std::min(a, b), std::max(a, b)});
    }
  }
  std::vector<double> len;
  for (const auto& [a, b] : edges) len.push_back((m.vertices.col(a) - m.vertices.col(b)).norm());
  double mean = 0.0;
  for (double l : len) mean += l;
  mean /= static_cast<double>(len.size());
  double var = 0.0;
  for (double l : len) var += (l - mean) * (l - mean);
  return std::sqrt(var / static_cast<double>(len.size()));
}

ChamberSet small_set(Rng& rng) {
  ChamberSet cs;
  for (std::size_t s = 0; s < kNumStructures; ++s) {
    cs[s] = icosphere(1, 10.0 + 2.0 * static_cast<double>(s), Vec3(25.0 * static_cast<double>(s), 0.0, 0.0));
    cs[s].vertices += gaussian_points(rng, cs[s].num_vertices(), 0.8);
    cs[s].structure = kStructures[s];
  }
  return cs;
}

Outcome criterion_losses() {
  Outcome o;
  Rng rng(202);
  double recon_d = 0.0, sd_d = 0.0, edge_d = 0.0, cycle_d = 0.0;
  for (int inst = 0; inst < 10; ++inst) {
    MeshSequence seq;
    TargetClouds targets;
    for (int t = 0; t < 2; ++t) {
      seq.frames.push_back(small_set(rng));
      std::array<Points, kNumStructures> tc;
      for (std::size_t s = 0; s < kNumStructures; ++s) {
        const Vec3 c = seq[static_cast<std::size_t>(t)][s].vertices.rowwise().mean();
        tc[s] = gaussian_points(rng, 40 + static_cast<Eigen::Index>(rng.below(50)), 8.0).colwise() + c;
      }
      targets.push_back(tc);
    }
    for (std::size_t s = 0; s < kNumStructures; ++s) seq[1][s].faces = seq[0][s].faces;

    double recon = 0.0, edge = 0.0, cycle = 0.0;
    for (std::size_t t = 0; t < 2; ++t) {
      for (std::size_t s = 0; s < kNumStructures; ++s) {
        recon += directed_mean(seq[t][s].vertices, targets[t][s]) + directed_mean(targets[t][s], seq[t][s].vertices);
        edge += oracle_edge_std(seq[t][s]);
      }
    }
    for (std::size_t s = 0; s < kNumStructures; ++s) {
      cycle += (seq[1][s].vertices - seq[0][s].vertices).colwise().norm().mean();
    }
    recon_d = std::max(recon_d, std::abs(recon_loss(seq, targets).value - recon / 2.0));
    edge_d = std::max(edge_d, std::abs(edge_loss(seq).value - edge / 2.0));
    cycle_d = std::max(cycle_d, std::abs(cycle_loss(seq).value - cycle));

    const Points a = random_points(rng, 150 + static_cast<Eigen::Index>(rng.below(100)), Vec3::Zero(), Vec3::Constant(30));
    const Points b = random_points(rng, 150 + static_cast<Eigen::Index>(rng.below(100)), Vec3::Constant(5), Vec3::Constant(40));
    std::vector<double> pooled;
    for (Eigen::Index i = 0; i < a.cols(); ++i) pooled.push_back(min_dist(a.col(i), b));
    for (Eigen::Index i = 0; i < b.cols(); ++i) pooled.push_back(min_dist(b.col(i), a));
    const double ab = directed_mean(a, b), ba = directed_mean(b, a);
    const SurfaceDistances d = surface_distances(a, b);
    sd_d = std::max({sd_d, std::abs(d.uni_a_to_b - ab), std::abs(d.uni_b_to_a - ba),
                     std::abs(d.assd - 0.5 * (ab + ba)), std::abs(d.hd90 - oracle_percentile(pooled, 90.0))});
  }

  const Template tmpl = make_template(SynthConfig{});
  MeshSequence same;
  same.frames = {tmpl.chambers, tmpl.chambers};
  const double curv_self = std::abs(curvature_loss(same, tmpl.curvatures).value);
  RigidTransform xf;
  xf.rotation = random_rotation(rng);
  xf.translation = Vec3(40.0, -25.0, 60.0);
  const double curv_rigid = std::abs(curvature_loss(transformed(same, xf), tmpl.curvatures).value);

  o.require(recon_d < 1e-12, "recon_loss oracle");
  o.require(sd_d < 1e-12, "surface_distances oracle");
  o.require(edge_d < 1e-12, "edge_loss oracle");
  o.require(cycle_d < 1e-12, "cycle_loss oracle");
  o.require(curv_self < 1e-9, "curvature self");
  o.require(curv_rigid < 1e-9, "curvature rigid");
  o.detail << "|d| recon " << fmt(recon_d) << ", distances " << fmt(sd_d) << ", edge " << fmt(edge_d) << ", cycle "
           << fmt(cycle_d) << "; curvature self " << fmt(curv_self) << ", rigid " << fmt(curv_rigid);
  return o;
}

// --- C3 --------------------------------------------------------------------

Outcome criterion_motion_correction() {
  Outcome o;
  SynthConfig cfg;
  cfg.seed = 303;
  cfg.frames = 10;
  const int trials = 50;
  const Population pop = synth_population(cfg, trials);
  std::vector<double> errors;
  int improved = 0;
  for (int i = 0; i < trials; ++i) {
    const FrameVolumes vols = render_sequence(pop.subjects[static_cast<std::size_t>(i)].sequence, cfg);
    const SlicedViews sv = slice_views(vols.intensity, vols.labels, ViewSpecs::standard(), 2.0,
                                       derive_seed(cfg.seed, 1000 + static_cast<std::uint64_t>(i)));
    const IntersectionQuality before = eval_intersections(sv.views);
    const McResult res = mc_optimize(sv.views, {0.1, 1000});
    ViewSet corrected = sv.views;
    corrected.set_displacements(res.displacements);
    const IntersectionQuality after = eval_intersections(corrected);
    for (std::size_t p = 0; p < res.displacements.size(); ++p) errors.push_back((res.displacements[p] - sv.truth[p]).norm());
    if (before.dice && after.dice && *after.dice > *before.dice) ++improved;
  }
  const double median = oracle_percentile(errors, 50.0);
  const double frac = static_cast<double>(improved) / trials;
  o.require(median < 0.5, "median displacement error");
  o.require(frac >= 0.95, "Dice improvement rate");
  o.detail << "median error " << fmt(median) << " mm over " << errors.size() << " planes, Dice improved in "
           << improved << "/" << trials;
  return o;
}

// --- C4 --------------------------------------------------------------------

Outcome criterion_self_reconstruction() {
  Outcome o;
  SynthConfig cfg;
  const int frames = 10;
  const Template tmpl = make_template(cfg);
  FitConfig fc;
  Rng rng(404);
  ControlGrid coarse = ControlGrid::covering(fc.lattice_lo, fc.lattice_hi, fc.coarse);
  coarse.displacements = gaussian_points(rng, coarse.size(), 3.0);
  ControlGrid mid = ControlGrid::covering(fc.lattice_lo, fc.lattice_hi, fc.mid);
  mid.displacements = gaussian_points(rng, mid.size(), 3.0);

  // Periodic targets: the mid-scale warp breathes in and out over the cycle.
  TargetClouds targets(frames);
  for (int t = 0; t < frames; ++t) {
    const double s = std::pow(std::sin(std::numbers::pi * t / (frames - 1)), 2);
    ControlGrid m = mid;
    m.displacements *= s;
    const std::vector<ControlGrid> chain{coarse, m};
    for (std::size_t k = 0; k < kNumStructures; ++k) {
      targets[static_cast<std::size_t>(t)][k] = compose_warp(chain, tmpl.chambers[k].vertices);
    }
  }

  const FitResult res = fit_sequence(tmpl.chambers, tmpl.curvatures, targets, fc);
  MeshSequence initial;
  initial.frames.assign(frames, tmpl.chambers);
  const double r0 = recon_loss(initial, targets).value;
  const double r1 = recon_loss(res.sequence, targets).value;
  double assd = 0.0;
  bool topology = res.sequence.num_frames() == static_cast<std::size_t>(frames);
  for (std::size_t t = 0; t < res.sequence.num_frames(); ++t) {
    for (std::size_t k = 0; k < kNumStructures; ++k) {
      assd += surface_distances(res.sequence[t][k].vertices, targets[t][k]).assd;
      topology = topology && res.sequence[t][k].faces == tmpl.chambers[k].faces &&
                 res.sequence[t][k].num_vertices() == tmpl.chambers[k].num_vertices();
    }
  }
  assd /= static_cast<double>(frames * kNumStructures);
  const double cycle = cycle_loss(res.sequence).value;
  const double voxel = cfg.voxel_size;
  o.require(r1 < 0.1 * r0, "recon reduction");
  o.require(assd < 0.5 * voxel, "ASSD");
  o.require(topology, "connectivity");
  o.require(cycle < 0.1, "cycle loss");
  o.detail << tmpl.chambers.total_vertices() << " vertices, recon " << fmt(r0) << " -> " << fmt(r1) << " ("
           << fmt(100.0 * r1 / r0) << "%), ASSD " << fmt(assd) << " mm (" << fmt(assd / voxel) << " voxel), cycle "
           << fmt(cycle);
  return o;
}

// --- C5 --------------------------------------------------------------------

Outcome criterion_incremental_pca() {
  Outcome o;
  Rng rng(505);
  const Eigen::Index dim = 40, n = 500;
  const int rank = 10;
  Eigen::MatrixXd basis(dim, rank);
  for (Eigen::Index i = 0; i < basis.size(); ++i) basis.data()[i] = rng.normal();
  basis = Eigen::HouseholderQR<Eigen::MatrixXd>(basis).householderQ() * Eigen::MatrixXd::Identity(dim, rank);
  Eigen::VectorXd offset(dim);
  for (Eigen::Index i = 0; i < dim; ++i) offset[i] = rng.normal(0.0, 5.0);
  Eigen::MatrixXd data(dim, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    Eigen::VectorXd c(rank);
    for (int k = 0; k < rank; ++k) c[k] = rng.normal(0.0, 10.0 - k);
    data.col(j) = offset + basis * c;
  }

  ShapeModel model(dim, rank);
  model.fit(data, 128);

  const Eigen::VectorXd mean = data.rowwise().mean();
  const Eigen::MatrixXd centered = data.colwise() - mean;
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU);
  const Eigen::MatrixXd batch = svd.matrixU().leftCols(rank);
  const Eigen::MatrixXd& inc = model.components();

  double max_angle = 0.0;
  if (inc.cols() == rank) {
    const Eigen::MatrixXd residual = batch - inc * (inc.transpose() * batch);
    const Eigen::VectorXd sines = Eigen::JacobiSVD<Eigen::MatrixXd>(residual).singularValues();
    for (Eigen::Index i = 0; i < sines.size(); ++i) max_angle = std::max(max_angle, std::asin(std::min(1.0, sines[i])));
  } else {
    o.require(false, "component count");
  }

  double recon_d = 0.0;
  for (int k : {5, rank}) {
    const Eigen::MatrixXd pb = batch.leftCols(k);
    const Eigen::MatrixXd pi = inc.leftCols(std::min<Eigen::Index>(k, inc.cols()));
    for (Eigen::Index j = 0; j < n; ++j) {
      const Eigen::VectorXd xb = centered.col(j);
      const Eigen::VectorXd xi = data.col(j) - model.mean();
      const double eb = (xb - pb * (pb.transpose() * xb)).norm();
      const double ei = (xi - pi * (pi.transpose() * xi)).norm();
      recon_d = std::max(recon_d, std::abs(eb - ei));
    }
  }
  o.require(max_angle < 1e-6, "principal angles");
  o.require(recon_d < 1e-8, "reconstruction errors");
  o.detail << "max principal angle " << fmt(max_angle) << " rad, max reconstruction |d| " << fmt(recon_d);
  return o;
}

// --- C6 --------------------------------------------------------------------

Outcome criterion_ssm_curves() {
  Outcome o;
  SynthConfig cfg;
  cfg.seed = 606;
  cfg.frames = 20;
  const int n_train = 200, n_test = 50, max_components = 32;
  const Population pop = synth_population(cfg, n_train + n_test);
  std::vector<MeshSequence> train, test;
  for (int i = 0; i < n_train + n_test; ++i) {
    (i < n_train ? train : test).push_back(pop.subjects[static_cast<std::size_t>(i)].sequence);
  }
  ShapeModel model(pop.tmpl.topology(static_cast<std::size_t>(cfg.frames)), max_components);
  model.fit(stack_shapes(train), 128);

  bool monotone = true;
  for (int k = 2; k <= model.num_components(); ++k) monotone = monotone && model.compactness(k) >= model.compactness(k - 1);

  // A model with room for every direction of a small training set spans it.
  ShapeModel full(pop.tmpl.topology(static_cast<std::size_t>(cfg.frames)), 40);
  full.fit(stack_shapes(std::span<const MeshSequence>(train.data(), 30)), 128);
  const double full_c = full.compactness(full.num_components());
  for (int k = 2; k <= full.num_components(); ++k) monotone = monotone && full.compactness(k) >= full.compactness(k - 1);

  // Generalization per test vector, one component at a time. The squared
  // error is checked for monotonicity; rises of the mean distance are only
  // reported.
  const Eigen::MatrixXd test_m = stack_shapes(test);
  const Eigen::MatrixXd centered = test_m.colwise() - model.mean();
  const Eigen::MatrixXd coeffs = model.components().transpose() * centered;
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(centered.rows());
  int violations = 0, distance_rises = 0;
  double worst_rise = 0.0;
  for (Eigen::Index j = 0; j < test_m.cols(); ++j) {
    Eigen::VectorXd residual = centered.col(j);
    const double tol = 1e-12 * mean_squared_vertex_distance(residual, zero);
    double prev_mse = std::numeric_limits<double>::infinity();
    double prev_dist = std::numeric_limits<double>::infinity();
    for (int k = 0; k < model.num_components(); ++k) {
      residual -= model.components().col(k) * coeffs(k, j);
      const double mse = mean_squared_vertex_distance(residual, zero);
      const double dist = mean_vertex_distance(residual, zero);
      if (mse > prev_mse + tol) {
        ++violations;
        worst_rise = std::max(worst_rise, mse - prev_mse);
      }
      if (dist > prev_dist) ++distance_rises;
      prev_mse = mse;
      prev_dist = dist;
    }
  }
  const GeneralizationStats at_full = generalization_error(model, test_m, model.num_components());

  int wins = 0;
  const int frames = cfg.frames;
  for (const MeshSequence& s : test) {
    std::vector<bool> one(static_cast<std::size_t>(frames), false), ten(static_cast<std::size_t>(frames), false);
    one[0] = true;
    for (int t = 0; t < frames; t += frames / 10) ten[static_cast<std::size_t>(t)] = true;
    const ShapeVector truth = vectorize(s);
    const double e1 = mean_vertex_distance(vectorize(complete_sequence(model, s, one).sequence), truth);
    const double e10 = mean_vertex_distance(vectorize(complete_sequence(model, s, ten).sequence), truth);
    if (e10 < e1) ++wins;
  }
  o.require(monotone, "compactness monotone");
  o.require(std::abs(full_c - 1.0) < 1e-8, "compactness at full rank");
  o.require(violations == 0, "generalization monotone");
  o.require(std::abs(at_full.per_vector_mse.front() - mean_squared_vertex_distance(
                                                          centered.col(0) - model.components() * coeffs.col(0), zero)) <=
                1e-9 * std::max(1.0, at_full.per_vector_mse.front()),
            "incremental residual agrees with generalization_error");
  o.require(wins >= 45, "completion improves with more frames");
  o.detail << "compactness(" << model.num_components() << ") " << fmt(model.compactness(model.num_components()), "%.4f")
           << ", full rank " << fmt(std::abs(full_c - 1.0)) << " from 1; squared-error rises " << violations << " (max "
           << fmt(worst_rise) << "), mean-distance rises " << distance_rises << "; MSE at k="
           << model.num_components() << " " << fmt(at_full.mse_mean) << " mm2; completion 10 < 1 frame on " << wins
           << "/" << n_test;
  return o;
}

// --- C7 --------------------------------------------------------------------

Outcome criterion_contour_fit() {
  Outcome o;
  SynthConfig cfg;
  cfg.seed = 707;
  cfg.frames = 10;
  const int n_train = 200, n_test = 30;
  const Population pop = synth_population(cfg, n_train + n_test);
  std::vector<MeshSequence> train;
  for (int i = 0; i < n_train; ++i) train.push_back(pop.subjects[static_cast<std::size_t>(i)].sequence);
  ShapeModel model(pop.tmpl.topology(static_cast<std::size_t>(cfg.frames)), 32);
  model.fit(stack_shapes(train), 128);

  // Eight short-axis cuts plus two orthogonal long-axis cuts through the LV.
  std::vector<ContourPlane> planes;
  for (int d = 0; d < 8; ++d) planes.push_back({Vec3(0, 0, 70.0 + 10.0 * d), Vec3::UnitZ()});
  planes.push_back({Vec3(100, 0, 0), Vec3::UnitX()});
  planes.push_back({Vec3(0, 86, 0), Vec3::UnitY()});

  int ok = 0;
  double worst = 0.0;
  for (int i = n_train; i < n_train + n_test; ++i) {
    const Eigen::VectorXd truth = model.encode(vectorize(pop.subjects[static_cast<std::size_t>(i)].sequence));
    const MeshSequence seq = devectorize(model.decode(truth), model.topology());
    const auto contours = slice_contours(seq, planes, true);
    const DescriptorFit fit = fit_to_contours(model, contours, {0.05, 250});
    const double rel = (fit.w.head(5) - truth.head(5)).norm() / truth.head(5).norm();
    worst = std::max(worst, rel);
    if (rel < 0.1) ++ok;
  }
  o.require(ok >= 27, "recovered subjects");
  o.detail << ok << "/" << n_test << " subjects within 10% on the top-5 modes (worst " << fmt(worst) << ")";
  return o;
}

// --- C8 --------------------------------------------------------------------

Outcome criterion_phenotypes() {
  Outcome o;
  const double pi = std::numbers::pi;
  const double sphere_err = std::abs(mesh_volume(icosphere(5, 25.0)) / (4.0 / 3.0 * pi * 25.0 * 25.0 * 25.0 / 1000.0) - 1.0);
  const double cube_err = std::abs(mesh_volume(cube_mesh(30.0)) / 27.0 - 1.0);
  const double shell_exact = 4.0 / 3.0 * pi * (28.0 * 28.0 * 28.0 - 20.0 * 20.0 * 20.0) / 1000.0;
  const double shell_err =
      std::abs((mesh_volume(icosphere(5, 28.0)) - mesh_volume(icosphere(5, 20.0))) / shell_exact - 1.0);

  // LV mass of a spherical shell inside a full chamber set.
  ChamberSet cs;
  for (std::size_t s = 0; s < kNumStructures; ++s) {
    cs[s] = icosphere(4, 15.0, Vec3(60.0 * static_cast<double>(s), 0.0, 0.0));
    cs[s].structure = kStructures[s];
  }
  cs[Structure::LvEndo] = icosphere(4, 20.0);
  cs[Structure::LvEpi] = icosphere(4, 28.0);
  cs[Structure::LvEpi].structure = Structure::LvEpi;
  MeshSequence shell_seq;
  shell_seq.frames = {cs, cs};
  const double lvm_err = std::abs(phenotype_table(shell_seq).lvm / (shell_exact * kMyocardialDensity) - 1.0);

  SynthConfig cfg;
  cfg.seed = 808;
  cfg.frames = 10;
  const Population pop = synth_population(cfg, 10);
  double ef_err = 0.0, rigid_err = 0.0;
  Rng rng(808);
  for (const auto& s : pop.subjects) {
    std::vector<double> scale;
    for (int t = 0; t < cfg.frames; ++t) scale.push_back(s.truth.scale(Structure::LvEndo, t, cfg.frames));
    const double hi = *std::max_element(scale.begin(), scale.end());
    const double lo = *std::min_element(scale.begin(), scale.end());
    const double ef_truth = 100.0 * (1.0 - std::pow(lo / hi, 3));
    const PhenotypeTable p = phenotype_table(s.sequence);
    ef_err = std::max(ef_err, std::abs(p.lvef - ef_truth));

    RigidTransform xf;
    xf.rotation = random_rotation(rng);
    xf.translation = Vec3(rng.normal(0, 50), rng.normal(0, 50), rng.normal(0, 50));
    const auto a = p.values();
    const auto b = phenotype_table(transformed(s.sequence, xf)).values();
    for (std::size_t i = 0; i < a.size(); ++i) {
      rigid_err = std::max(rigid_err, std::abs(a[i] - b[i]) / std::max(std::abs(a[i]), 1e-12));
    }
  }
  o.require(sphere_err < 0.01 && cube_err < 0.01 && shell_err < 0.01, "closed-form volumes");
  o.require(ef_err < 1.0, "EF recovery");
  o.require(lvm_err < 0.02, "LV mass");
  o.require(rigid_err < 1e-9, "rigid invariance");
  o.detail << "volume rel err sphere " << fmt(sphere_err) << ", cube " << fmt(cube_err) << ", shell " << fmt(shell_err)
           << "; EF err " << fmt(ef_err) << " points; LVM rel " << fmt(lvm_err) << "; rigid rel " << fmt(rigid_err);
  return o;
}

// --- C9 --------------------------------------------------------------------

Eigen::MatrixXd gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

Outcome criterion_population() {
  Outcome o;
  Rng rng(909);
  const Eigen::Index n = 3000;
  const FeatureMatrix features = FeatureMatrix::from(gaussian_matrix(rng, n, 6));
  const std::vector<int> single(static_cast<std::size_t>(n), 0);
  const double p_single = precision_at_k(features, single, 10, 5000, 1);

  std::vector<int> groups(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) groups[static_cast<std::size_t>(i)] = static_cast<int>(i % 3);
  for (std::size_t i = groups.size() - 1; i > 0; --i) std::swap(groups[i], groups[rng.below(i + 1)]);
  const double p_random = precision_at_k(features, groups, 10, 5000, 2);

  const Eigen::MatrixXd visit = gaussian_matrix(rng, 400, 16);
  const double recall_same = recall_at_k(visit, visit, 1);

  const Eigen::MatrixXd fields = gaussian_matrix(rng, 1000, 2000);
  Eigen::VectorXd attr(1000);
  for (Eigen::Index i = 0; i < attr.size(); ++i) attr[i] = rng.normal();
  const CorrelationMap null_map = vertex_correlation(fields, attr, 0.05);
  const double fp = static_cast<double>(std::count(null_map.significant.begin(), null_map.significant.end(), true)) /
                    static_cast<double>(fields.cols());

  // Leading descriptor columns carry stable subject identity; trailing ones
  // are visit-specific noise.
  const Eigen::Index subjects = 500, leading = 8, total = 64;
  Eigen::MatrixXd v1(subjects, total), v2(subjects, total);
  for (Eigen::Index i = 0; i < subjects; ++i) {
    for (Eigen::Index j = 0; j < total; ++j) {
      if (j < leading) {
        const double identity = rng.normal(0.0, 8.0 / static_cast<double>(j + 1));
        v1(i, j) = identity + rng.normal(0.0, 0.2);
        v2(i, j) = identity + rng.normal(0.0, 0.2);
      } else {
        v1(i, j) = rng.normal();
        v2(i, j) = rng.normal();
      }
    }
  }
  bool truncation_helps = true;
  std::ostringstream reid;
  for (int k : {1, 10, 50}) {
    const double full = recall_at_k(v1, v2, k);
    const double cut = recall_at_k(truncate_descriptor(v1, leading), truncate_descriptor(v2, leading), k);
    truncation_helps = truncation_helps && cut >= full;
    reid << " R@" << k << " " << fmt(cut, "%.1f") << " vs " << fmt(full, "%.1f");
  }
  o.require(p_single == 100.0, "single-group precision");
  o.require(std::abs(p_random - 100.0 / 3.0) <= 2.0, "random-group precision");
  o.require(recall_same == 100.0, "identical-visit recall");
  o.require(fp <= 0.001, "Bonferroni null false positives");
  o.require(truncation_helps, "truncated descriptor recall");
  o.detail << "P@10 single " << fmt(p_single, "%.1f") << ", 3 groups " << fmt(p_random, "%.2f") << "; R@1 same "
           << fmt(recall_same, "%.1f") << "; null FP " << fmt(fp) << ";" << reid.str();
  return o;
}

// --- C10 -------------------------------------------------------------------

std::vector<std::string> pipeline_commands(const fs::path& root, int subjects) {
  const std::string r = root.string();
  std::vector<std::string> cmds{
      "synth --subjects " + std::to_string(subjects) + " --frames 4 --seed 11 --views --volumes --out " + r + "/synth",
      "mc --views " + r + "/synth/subjects/sub_0000/views --truth " + r +
          "/synth/subjects/sub_0000/views_truth.json --epochs 300 --seed 11 --out " + r + "/mc"};
  for (int i = 0; i < subjects; ++i) {
    char sub[16];
    std::snprintf(sub, sizeof sub, "sub_%04d", i);
    cmds.push_back("fit --template " + r + "/synth/template --labels " + r + "/synth/subjects/" + sub +
                   "/labels.json --iterations 30 --seed 11 --out " + r + "/fit/" + sub);
  }
  cmds.push_back("ssm train --data " + r + "/fit --components 8 --batch 5 --seed 11 --out " + r + "/ssm");
  cmds.push_back("pheno --data " + r + "/fit --seed 11 --out " + r + "/pheno");
  cmds.push_back("retrieve --features " + r + "/pheno/phenotypes.csv --groups " + r +
                 "/synth/attributes.csv --k 1,3 --queries 40 --seed 11 --out " + r + "/retrieve");
  return cmds;
}

std::vector<std::string> split_words(const std::string& s) {
  std::istringstream in(s);
  return {std::istream_iterator<std::string>(in), std::istream_iterator<std::string>()};
}

std::vector<std::string> tree_files(const fs::path& root) {
  std::vector<std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) files.push_back(fs::relative(e.path(), root).generic_string());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome criterion_determinism(const fs::path& work) {
  Outcome o;
  const int subjects = 12;
  std::array<fs::path, 2> roots{work / "run_a", work / "run_b"};
  for (const auto& root : roots) {
    fs::remove_all(root);
    for (const auto& cmd : pipeline_commands(root, subjects)) {
      std::ostringstream out, err;
      const int code = cli::run_cli(split_words(cmd), out, err);
      if (code != 0) {
        o.require(false, "command exit " + std::to_string(code) + ": " + cmd + " (" + err.str() + ")");
        return o;
      }
    }
  }
  const auto a = tree_files(roots[0]);
  const auto b = tree_files(roots[1]);
  o.require(a == b, "identical file sets");
  std::size_t differing = 0, bytes = 0;
  if (a == b) {
    for (const auto& f : a) {
      const std::string x = slurp(roots[0] / f);
      bytes += x.size();
      if (x != slurp(roots[1] / f)) ++differing;
    }
  }
  o.require(differing == 0, "byte-identical artifacts");
  o.detail << a.size() << " files, " << bytes / 1024 << " KiB compared, " << differing << " differ";
  for (const auto& root : roots) fs::remove_all(root);
  return o;
}

struct Criterion {
  int id;
  const char* name;
  double limit;
  std::function<Outcome(const SuiteOptions&)> run;
};

std::vector<Criterion> criteria() {
  return {
      {1, "ffd-correctness", 10.0, [](const SuiteOptions&) { return criterion_ffd(); }},
      {2, "loss-oracles", 30.0, [](const SuiteOptions&) { return criterion_losses(); }},
      {3, "motion-correction", 300.0, [](const SuiteOptions&) { return criterion_motion_correction(); }},
      {4, "self-reconstruction-fit", 300.0, [](const SuiteOptions&) { return criterion_self_reconstruction(); }},
      {5, "incremental-pca", 10.0, [](const SuiteOptions&) { return criterion_incremental_pca(); }},
      {6, "ssm-curves", 180.0, [](const SuiteOptions&) { return criterion_ssm_curves(); }},
      {7, "contour-fitting", 180.0, [](const SuiteOptions&) { return criterion_contour_fit(); }},
      {8, "phenotype-oracles", 30.0, [](const SuiteOptions&) { return criterion_phenotypes(); }},
      {9, "population-analytics", 180.0, [](const SuiteOptions&) { return criterion_population(); }},
      {10, "end-to-end-determinism", 900.0,
       [](const SuiteOptions& opts) { return criterion_determinism(opts.work_dir); }},
  };
}

}  // namespace

std::vector<CriterionResult> run_acceptance(const SuiteOptions& options) {
  std::vector<CriterionResult> results;
  for (const Criterion& c : criteria()) {
    if (!options.only.empty() && std::find(options.only.begin(), options.only.end(), c.id) == options.only.end()) {
      continue;
    }
    CriterionResult r;
    r.id = c.id;
    r.name = c.name;
    r.limit_seconds = c.limit;
    const auto start = std::chrono::steady_clock::now();
    try {
      if (c.id == 10) fs::create_directories(options.work_dir);
      Outcome o = c.run(options);
      r.pass = o.pass;
      r.detail = o.detail.str();
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = std::string("exception: ") + e.what();
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (r.seconds >= r.limit_seconds) {
      r.pass = false;
      r.detail += "; over time limit";
    }
    if (options.on_result) options.on_result(r);
    results.push_back(std::move(r));
  }
  return results;
}

std::string format_result(const CriterionResult& r) {
  char head[128];
  std::snprintf(head, sizeof head, "%s  C%-2d %-24s %7.1f s / %4.0f s  ", r.pass ? "PASS" : "FAIL", r.id,
                r.name.c_str(), r.seconds, r.limit_seconds);
  return head + r.detail;
}

}  // namespace cardioshape::acceptance
