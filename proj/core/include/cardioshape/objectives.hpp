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

#include "cardioshape/mesh.hpp"
#include "cardioshape/volume.hpp"

#include <span>
#include <vector>

namespace cardioshape {

/// Weights of the regularisers in the composite fitting loss.
struct LossWeights {
  double edge = 0.5;
  double curv = 1.0;
  double temp = 0.1;
  double cycle = 0.2;

  void validate() const;
};

/// Per frame, per structure 3×n arrays.
using SequenceGradient = std::vector<std::array<Points, kNumStructures>>;
/// Pseudo ground-truth point clouds per frame and structure.
using TargetClouds = std::vector<std::array<Points, kNumStructures>>;
/// Mean curvature of each template structure.
using TemplateCurvatures = std::array<Eigen::VectorXd, kNumStructures>;

struct LossResult {
  double value = 0.0;
  SequenceGradient gradient;
};

SequenceGradient zero_gradient(const MeshSequence& seq);
/// into += weight · g
void accumulate(SequenceGradient& into, const SequenceGradient& g, double weight);

/// Symmetric vertex/point nearest-distance loss: per structure the mean
/// vertex→cloud distance plus the mean cloud→vertex distance, summed over
/// structures and averaged over frames. Ties go to the lowest index.
LossResult recon_loss(const MeshSequence& seq, const TargetClouds& targets);

/// Population standard deviation of edge lengths per structure, summed over
/// structures and averaged over frames.
LossResult edge_loss(const MeshSequence& seq);

/// Σ_frames Σ_structures (1 − r(H, H_template)) / T with r the Pearson
/// correlation of mean-curvature fields.
LossResult curvature_loss(const MeshSequence& seq, const TemplateCurvatures& template_curvatures);

/// Mean per-vertex displacement between consecutive frames. Needs T >= 2.
LossResult temporal_loss(const MeshSequence& seq);

/// Mean per-vertex distance between the last and first frame, summed over
/// structures. Zero for a single frame.
LossResult cycle_loss(const MeshSequence& seq);

struct LossTerms {
  double recon = 0.0;
  double edge = 0.0;
  double curv = 0.0;
  double temp = 0.0;
  double cycle = 0.0;
};

struct TotalLossResult {
  double value = 0.0;
  LossTerms terms;
  SequenceGradient gradient;
};

/// recon + λ_edge·edge + λ_curv·curv + λ_temp·temp + λ_cycle·cycle.
/// With a single frame the temporal and cycle terms are identically zero
/// and are skipped.
TotalLossResult total_loss(const MeshSequence& seq, const TargetClouds& targets, const LossWeights& weights,
                           const TemplateCurvatures& template_curvatures);

/// Edge-length standard deviation for an arbitrary edge list, with its
/// gradient with respect to the points.
LossResult edge_length_std(const Points& points, const std::vector<Edge>& edges);

// --- evaluation metrics ---------------------------------------------------

struct SurfaceDistances {
  double assd = 0.0;
  double uni_a_to_b = 0.0;
  double uni_b_to_a = 0.0;
  double hd90 = 0.0;
};

/// assd is the mean of the two directed mean distances; hd90 is the linear
/// 90th percentile of the pooled directed nearest distances.
SurfaceDistances surface_distances(const Points& a, const Points& b);

/// Linear-interpolation percentile (q in [0,100]) of unsorted values.
double percentile(std::vector<double> values, double q);

/// 2|A∩B| / (|A|+|B|) for one label; 1 when both masks are empty.
double dice(const LabelVolume& a, const LabelVolume& b, std::uint8_t label);
double dice(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b, std::uint8_t label);

/// Mean over interior frames and all vertices of |v_{t-1} + v_{t+1} − 2 v_t|.
double temporal_laplacian_error(const MeshSequence& seq);

/// Pearson correlation. Throws ValidationError on length mismatch or fewer
/// than two samples, Error on zero variance.
double pearson_r(std::span<const double> x, std::span<const double> y);

}  // namespace cardioshape
