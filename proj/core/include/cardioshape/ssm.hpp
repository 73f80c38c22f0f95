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

#include <Eigen/Core>

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace cardioshape {

/// Linear shape model v ≈ mean + components · w learned by incremental PCA.
///
/// Components are stored as orthonormal columns (dimension 3·T·|V| each),
/// ordered by decreasing explained variance. Each column is signed so that
/// its largest-magnitude coordinate is positive.
class ShapeModel {
 public:
  ShapeModel() = default;
  ShapeModel(const Topology& topology, int max_components = 128);
  /// Model over plain vectors of the given length, with no mesh topology.
  ShapeModel(Eigen::Index dimension, int max_components);

  /// Rebuilds a model from stored arrays (no connectivity attached).
  static ShapeModel from_parts(std::uint64_t digest, std::size_t frames, Eigen::Index vertices, int max_components,
                               Eigen::VectorXd mean, Eigen::VectorXd explained_variance, Eigen::MatrixXd components,
                               std::int64_t n_seen, double total_variance);

  /// One mini-batch update. Columns of `batch` are shape vectors.
  void partial_fit(const Eigen::MatrixXd& batch);

  /// Streams the columns of `data` through partial_fit in order.
  void fit(const Eigen::MatrixXd& data, int batch_size = 128);

  Eigen::Index dimension() const { return dimension_; }
  std::size_t frames() const { return frames_; }
  Eigen::Index vertices() const { return vertices_; }
  std::uint64_t digest() const { return digest_; }
  int max_components() const { return max_components_; }
  int num_components() const { return static_cast<int>(components_.cols()); }
  std::int64_t n_seen() const { return n_seen_; }
  /// Sum of per-coordinate sample variances of everything seen so far.
  double total_variance() const { return total_variance_; }

  const Eigen::VectorXd& mean() const { return mean_; }
  const Eigen::MatrixXd& components() const { return components_; }
  const Eigen::VectorXd& explained_variance() const { return explained_variance_; }
  /// √explained_variance.
  Eigen::VectorXd component_sd() const { return explained_variance_.cwiseSqrt(); }

  /// Attaches connectivity after checking it against the stored digest,
  /// vertex count and frame count.
  void attach(const Topology& topology);
  bool has_connectivity() const { return topology_.has_value(); }
  const Topology& topology() const;

  /// w = Pᵀ(v − mean).
  Eigen::VectorXd encode(const ShapeVector& v) const;
  /// mean + P·w; w may be shorter than the component count (trailing zeros).
  ShapeVector decode(const Eigen::VectorXd& w) const;
  /// Reconstruction of v from its top-k coefficients.
  ShapeVector project(const ShapeVector& v, int k) const;

  /// Fraction of total variance explained by the first k components.
  double compactness(int k) const;

 private:
  void check_dimension(Eigen::Index n, const char* what) const;

  std::optional<Topology> topology_;
  std::uint64_t digest_ = 0;
  std::size_t frames_ = 0;
  Eigen::Index vertices_ = 0;
  Eigen::Index dimension_ = 0;
  int max_components_ = 128;
  Eigen::VectorXd mean_;
  Eigen::MatrixXd components_;
  Eigen::VectorXd singular_values_;
  Eigen::VectorXd explained_variance_;
  std::int64_t n_seen_ = 0;
  double sum_squares_ = 0.0;
  double total_variance_ = 0.0;
};

/// Shape vectors of several sequences as columns.
Eigen::MatrixXd stack_shapes(std::span<const MeshSequence> sequences);

struct GeneralizationStats {
  /// Mean per-vertex Euclidean error of each test vector (mm).
  std::vector<double> per_vector;
  double mean = 0.0;
  double sd = 0.0;
  /// Mean squared per-vertex error of each test vector (mm²). Unlike the
  /// mean distance it never increases with k.
  std::vector<double> per_vector_mse;
  double mse_mean = 0.0;
};

/// Reconstruction error of each column of `test` using the top-k components.
GeneralizationStats generalization_error(const ShapeModel& model, const Eigen::MatrixXd& test, int k);

/// Mean per-vertex Euclidean distance between two shape vectors.
double mean_vertex_distance(const ShapeVector& a, const ShapeVector& b);
/// Mean squared per-vertex Euclidean distance.
double mean_squared_vertex_distance(const ShapeVector& a, const ShapeVector& b);

struct ContourPlane {
  Vec3 origin;
  Vec3 normal;
};

/// Observed 2D contour of one structure (or of all structures when
/// unlabelled) in one frame, as 3D points lying on a plane.
struct Contour {
  int frame = 0;
  std::optional<Structure> structure;
  ContourPlane plane;
  Points points;
};

/// Mesh/plane intersection points: one point per mesh edge whose endpoints
/// lie on opposite sides of the plane.
Points slice_mesh(const TriMesh& mesh, const ContourPlane& plane);

/// Contours of every structure of every frame cut by every plane. Empty cuts
/// are omitted.
std::vector<Contour> slice_contours(const MeshSequence& seq, std::span<const ContourPlane> planes,
                                   bool labelled = true);

struct DescriptorFitOptions {
  double lr = 0.05;
  int iterations = 500;
};

struct DescriptorFit {
  /// Best descriptor found.
  Eigen::VectorXd w;
  double best_loss = 0.0;
  std::vector<double> trace;
};

/// Adam over w (in units of each component's SD) minimising, per contour, the
/// symmetric mean nearest distance between the observed points and the
/// contour that the decoded mesh cuts on the same plane.
DescriptorFit fit_to_contours(const ShapeModel& model, std::span<const Contour> contours,
                              const DescriptorFitOptions& options = {});

struct CompletionResult {
  MeshSequence sequence;
  Eigen::VectorXd w;
  double best_loss = 0.0;
  std::vector<double> trace;
};

/// Adam over w (in SD units) minimising the mean vertex distance on observed
/// frames only; returns the full decoded sequence.
CompletionResult complete_sequence(const ShapeModel& model, const MeshSequence& partial,
                                   const std::vector<bool>& observed,
                                   const DescriptorFitOptions& options = {0.1, 200});

/// decode(s·√λ_k·e_k) as a mesh sequence.
MeshSequence sample_mode(const ShapeModel& model, int k, double multiplier);

}  // namespace cardioshape
