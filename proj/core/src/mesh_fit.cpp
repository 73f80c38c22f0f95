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

#include "cardioshape/mesh_fit.hpp"

#include "cardioshape/error.hpp"
#include "cardioshape/optim.hpp"
#include "cardioshape/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace cardioshape {

namespace {

Eigen::Map<Eigen::VectorXd> flat(Points& p) { return {p.data(), p.size()}; }
Eigen::Map<const Eigen::VectorXd> flat(const Points& p) { return {p.data(), p.size()}; }

Points pooled_gradient(const std::array<Points, kNumStructures>& g) {
  Eigen::Index n = 0;
  for (const auto& p : g) n += p.cols();
  Points out(3, n);
  Eigen::Index off = 0;
  for (const auto& p : g) {
    out.middleCols(off, p.cols()) = p;
    off += p.cols();
  }
  return out;
}

void check_finite(double value, int stage, int iteration) {
  if (!std::isfinite(value)) {
    throw Error("fit_sequence: non-finite loss in stage " + std::to_string(stage) + " at iteration " +
                std::to_string(iteration));
  }
}

}  // namespace

void FitConfig::validate() const {
  weights.validate();
  for (const auto& d : {coarse, mid, fine}) {
    for (int g : d) {
      if (g < 4) throw ValidationError("FitConfig: every lattice dimension needs at least 4 control points");
    }
  }
  if (iterations < 1) throw ValidationError("FitConfig: iterations must be >= 1");
  if (!(lr > 0.0)) throw ValidationError("FitConfig: learning rate must be positive");
  if (!((lattice_hi - lattice_lo).array() > 0.0).all()) throw ValidationError("FitConfig: empty lattice box");
}

Points pooled_vertices(const ChamberSet& chambers) {
  Points out(3, chambers.total_vertices());
  Eigen::Index off = 0;
  for (const auto& m : chambers.meshes) {
    out.middleCols(off, m.num_vertices()) = m.vertices;
    off += m.num_vertices();
  }
  return out;
}

ChamberSet unpooled(const Points& pooled, const ChamberSet& like) {
  if (pooled.cols() != like.total_vertices()) throw ValidationError("unpooled: vertex count mismatch");
  ChamberSet out = like;
  Eigen::Index off = 0;
  for (auto& m : out.meshes) {
    m.vertices = pooled.middleCols(off, m.num_vertices());
    off += m.num_vertices();
  }
  return out;
}

MeshSequence apply_fit(const ChamberSet& tmpl, const std::array<ControlGrid, 2>& global,
                       std::span<const ControlGrid> frame_grids) {
  const Points base = compose_warp(global, pooled_vertices(tmpl));
  MeshSequence seq;
  seq.frames.resize(frame_grids.size());
  for (std::size_t t = 0; t < frame_grids.size(); ++t) {
    seq.frames[t] = unpooled(warp_points(frame_grids[t], base), tmpl);
  }
  return seq;
}

FitResult fit_sequence(const ChamberSet& tmpl, const TemplateCurvatures& template_curvatures,
                       const TargetClouds& targets, const FitConfig& cfg) {
  cfg.validate();
  tmpl.validate();
  if (targets.empty()) throw ValidationError("fit_sequence: no target frames");
  for (std::size_t t = 0; t < targets.size(); ++t) {
    for (std::size_t c = 0; c < kNumStructures; ++c) {
      if (targets[t][c].cols() == 0) {
        throw ValidationError("fit_sequence: empty target cloud for " + std::string(structure_name(kStructures[c])) +
                              " in frame " + std::to_string(t));
      }
    }
  }
  const std::size_t frames = targets.size();
  const Points rest = pooled_vertices(tmpl);
  FitResult result;

  // Stage 1: global lattices on the first frame.
  std::array<ControlGrid, 2> global{ControlGrid::covering(cfg.lattice_lo, cfg.lattice_hi, cfg.coarse),
                                    ControlGrid::covering(cfg.lattice_lo, cfg.lattice_hi, cfg.mid)};
  {
    const Eigen::Index n0 = global[0].displacements.size();
    const Eigen::Index n1 = global[1].displacements.size();
    Eigen::VectorXd params = Eigen::VectorXd::Zero(n0 + n1);
    Eigen::VectorXd best = params;
    double best_value = std::numeric_limits<double>::infinity();
    AdamState adam(AdamOptions{cfg.lr});
    const TargetClouds first{targets.front()};
    for (int it = 0; it <= cfg.iterations; ++it) {
      flat(global[0].displacements) = params.head(n0);
      flat(global[1].displacements) = params.tail(n1);
      MeshSequence seq;
      seq.frames.push_back(unpooled(compose_warp(global, rest), tmpl));
      const auto loss = total_loss(seq, first, cfg.weights, template_curvatures);
      check_finite(loss.value, 1, it);
      result.trace.push_back({1, it, loss.value, loss.terms});
      if (loss.value < best_value) {
        best_value = loss.value;
        best = params;
      }
      if (it == cfg.iterations) break;
      const auto grads = compose_warp_gradient(global, rest, pooled_gradient(loss.gradient.front()));
      Eigen::VectorXd g(n0 + n1);
      g.head(n0) = flat(grads[0]);
      g.tail(n1) = flat(grads[1]);
      adam.step(params, g);
    }
    flat(global[0].displacements) = best.head(n0);
    flat(global[1].displacements) = best.tail(n1);
  }
  result.global = global;

  // Stage 2: one fine lattice per frame, all frames jointly.
  const Points base = compose_warp(global, rest);
  std::vector<ControlGrid> grids(frames, ControlGrid::covering(cfg.lattice_lo, cfg.lattice_hi, cfg.fine));
  const Eigen::Index per = grids.front().displacements.size();
  Eigen::VectorXd params = Eigen::VectorXd::Zero(per * static_cast<Eigen::Index>(frames));
  Eigen::VectorXd best = params;
  double best_value = std::numeric_limits<double>::infinity();
  AdamState adam(AdamOptions{cfg.lr});
  Eigen::VectorXd g(params.size());
  MeshSequence seq;
  seq.frames.resize(frames);
  for (int it = 0; it <= cfg.iterations; ++it) {
    parallel_for(frames, [&](std::size_t t) {
      flat(grids[t].displacements) = params.segment(static_cast<Eigen::Index>(t) * per, per);
      seq.frames[t] = unpooled(warp_points(grids[t], base), tmpl);
    });
    const auto loss = total_loss(seq, targets, cfg.weights, template_curvatures);
    check_finite(loss.value, 2, it);
    result.trace.push_back({2, it, loss.value, loss.terms});
    if (loss.value < best_value) {
      best_value = loss.value;
      best = params;
    }
    if (it == cfg.iterations) break;
    parallel_for(frames, [&](std::size_t t) {
      const Points gt = warp_gradient(grids[t], base, pooled_gradient(loss.gradient[t]));
      g.segment(static_cast<Eigen::Index>(t) * per, per) = flat(gt);
    });
    adam.step(params, g);
  }
  for (std::size_t t = 0; t < frames; ++t) {
    flat(grids[t].displacements) = best.segment(static_cast<Eigen::Index>(t) * per, per);
  }
  result.frame_grids = std::move(grids);
  result.sequence = apply_fit(tmpl, result.global, result.frame_grids);
  return result;
}

Points extract_surface_points(const LabelVolume& volume, std::span<const std::uint8_t> labels) {
  auto in = [&](int i, int j, int k) {
    if (i < 0 || j < 0 || k < 0 || i >= volume.dims[0] || j >= volume.dims[1] || k >= volume.dims[2]) return false;
    const std::uint8_t l = volume.at(i, j, k);
    return std::find(labels.begin(), labels.end(), l) != labels.end();
  };
  std::vector<Vec3> pts;
  bool any = false;
  static constexpr std::array<std::array<int, 3>, 6> kDirs{
      {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}}};
  for (int k = 0; k < volume.dims[2]; ++k) {
    for (int j = 0; j < volume.dims[1]; ++j) {
      for (int i = 0; i < volume.dims[0]; ++i) {
        if (!in(i, j, k)) continue;
        any = true;
        const Vec3 c = volume.voxel_center(i, j, k);
        for (const auto& d : kDirs) {
          if (in(i + d[0], j + d[1], k + d[2])) continue;
          const Vec3 half = 0.5 * Vec3(d[0] * volume.spacing[0], d[1] * volume.spacing[1], d[2] * volume.spacing[2]);
          pts.push_back(c + volume.axes * half);
        }
      }
    }
  }
  if (!any) throw ValidationError("extract_surface_points: label not present in volume");
  Points out(3, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = pts[i];
  return out;
}

Points extract_surface_points(const LabelVolume& volume, std::uint8_t label) {
  const std::array<std::uint8_t, 1> one{label};
  return extract_surface_points(volume, one);
}

std::array<Points, kNumStructures> structure_targets(const LabelVolume& volume) {
  const std::array<std::uint8_t, 2> lv{kLvBlood, kLvMyocardium};
  return {extract_surface_points(volume, kLvBlood), extract_surface_points(volume, lv),
          extract_surface_points(volume, kRvBlood), extract_surface_points(volume, kLaBlood),
          extract_surface_points(volume, kRaBlood)};
}

}  // namespace cardioshape
