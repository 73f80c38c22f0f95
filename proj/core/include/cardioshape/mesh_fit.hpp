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

#pragma once

#include "cardioshape/ffd.hpp"
#include "cardioshape/mesh.hpp"
#include "cardioshape/objectives.hpp"
#include "cardioshape/volume.hpp"

#include <array>
#include <span>
#include <vector>

namespace cardioshape {

struct FitConfig {
  LossWeights weights;
  std::array<int, 3> coarse{6, 6, 8};
  std::array<int, 3> mid{12, 12, 16};
  std::array<int, 3> fine{24, 24, 32};
  /// Box covered by every lattice (mm).
  Vec3 lattice_lo = Vec3::Zero();
  Vec3 lattice_hi = Vec3(192.0, 192.0, 256.0);
  /// Adam iterations per stage.
  int iterations = 200;
  double lr = 0.1;

  void validate() const;
};

struct FitTraceEntry {
  /// 1: global coarse+mid grids on frame 1; 2: per-frame fine grids.
  int stage = 0;
  int iteration = 0;
  double total = 0.0;
  LossTerms terms;
};

struct FitResult {
  MeshSequence sequence;
  /// Coarse then mid lattice, shared by all frames.
  std::array<ControlGrid, 2> global;
  /// One fine lattice per frame.
  std::vector<ControlGrid> frame_grids;
  std::vector<FitTraceEntry> trace;
};

/// Warps the template into every frame of the targets. Stage 1 fits the
/// coarse and mid lattices to frame 1; stage 2 fits one fine lattice per
/// frame jointly over all frames. Each stage keeps its best iterate.
FitResult fit_sequence(const ChamberSet& tmpl, const TemplateCurvatures& template_curvatures,
                       const TargetClouds& targets, const FitConfig& cfg);

/// Template warped by coarse → mid → frame grid for each frame.
MeshSequence apply_fit(const ChamberSet& tmpl, const std::array<ControlGrid, 2>& global,
                       std::span<const ControlGrid> frame_grids);

/// Centres of the voxel faces separating the given labels from everything
/// else (including the outside of the volume), in world millimetres.
Points extract_surface_points(const LabelVolume& volume, std::span<const std::uint8_t> labels);
Points extract_surface_points(const LabelVolume& volume, std::uint8_t label);

/// Surface clouds per structure: LV-endo from the LV blood pool, LV-epi from
/// blood pool plus myocardium, and one blood pool each for RV, LA, RA.
std::array<Points, kNumStructures> structure_targets(const LabelVolume& volume);

/// All vertices pooled in structure order, 3×|V|.
Points pooled_vertices(const ChamberSet& chambers);
/// Inverse of pooled_vertices for the connectivity of `like`.
ChamberSet unpooled(const Points& pooled, const ChamberSet& like);

}  // namespace cardioshape
