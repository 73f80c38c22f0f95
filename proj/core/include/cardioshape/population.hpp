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
#include <span>
#include <string>
#include <vector>

namespace cardioshape {

/// Subjects × features, with per-column z-scoring. Columns with zero
/// variance are dropped from the standardised matrix.
struct FeatureMatrix {
  Eigen::MatrixXd raw;
  std::vector<std::string> names;
  Eigen::RowVectorXd mean;
  Eigen::RowVectorXd sd;
  /// Indices into raw's columns that survive standardisation.
  std::vector<Eigen::Index> retained;
  Eigen::MatrixXd standardized;

  static FeatureMatrix from(Eigen::MatrixXd raw, std::vector<std::string> names = {});
  Eigen::Index subjects() const { return raw.rows(); }
  /// Applies this matrix's column statistics to a raw row.
  Eigen::RowVectorXd standardize(const Eigen::RowVectorXd& raw_row) const;
};

/// Per-vertex time-averaged signed distance ⟨v_t − v̄_t, n̄_t⟩ where n̄_t are
/// the vertex normals of the mean sequence at frame t. Pooled in structure
/// order.
Eigen::VectorXd signed_variation(const MeshSequence& seq, const MeshSequence& mean_seq);

struct CorrelationMap {
  Eigen::VectorXd r;
  Eigen::VectorXd p;
  std::vector<bool> significant;
  /// Bonferroni-corrected p threshold alpha / vertex count.
  double threshold = 0.0;
};

/// Pearson r between each column of `fields` (subjects × vertices) and the
/// attribute, two-sided t-test p-values with N−2 degrees of freedom.
/// Zero-variance columns get r = 0, p = 1.
CorrelationMap vertex_correlation(const Eigen::MatrixXd& fields, const Eigen::VectorXd& attribute,
                                  double alpha = 0.05);

/// K nearest rows by Euclidean distance in standardised space, ties broken by
/// the lower row index.
std::vector<Eigen::Index> knn_retrieve(const FeatureMatrix& features, Eigen::Index query, int k, bool exclude_self);
std::vector<Eigen::Index> knn_retrieve(const FeatureMatrix& features, const Eigen::RowVectorXd& raw_query, int k);

/// Mean percentage of same-group subjects among the K retrieved for
/// `n_queries` uniformly drawn query subjects (self excluded).
double precision_at_k(const FeatureMatrix& features, std::span<const int> groups, int k, int n_queries,
                      std::uint64_t seed);

/// Percentage of subjects whose first-visit row is among the K nearest to
/// their second-visit row. Both visits are standardised with the first
/// visit's statistics.
double recall_at_k(const Eigen::MatrixXd& visit1, const Eigen::MatrixXd& visit2, int k);

/// First n_pcs descriptor columns.
Eigen::MatrixXd truncate_descriptor(const Eigen::MatrixXd& features, int n_pcs);

}  // namespace cardioshape
