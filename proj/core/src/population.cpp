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

#include "cardioshape/population.hpp"

#include "cardioshape/error.hpp"
#include "cardioshape/parallel.hpp"
#include "cardioshape/rng.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cardioshape {

FeatureMatrix FeatureMatrix::from(Eigen::MatrixXd raw, std::vector<std::string> names) {
  if (raw.rows() < 2) throw ValidationError("FeatureMatrix: need at least two subjects");
  if (!raw.allFinite()) throw ValidationError("FeatureMatrix: non-finite feature value");
  if (!names.empty() && static_cast<Eigen::Index>(names.size()) != raw.cols()) {
    throw ValidationError("FeatureMatrix: name count does not match column count");
  }
  FeatureMatrix f;
  f.raw = std::move(raw);
  f.names = std::move(names);
  const double n = static_cast<double>(f.raw.rows());
  f.mean = f.raw.colwise().mean();
  f.sd = ((f.raw.rowwise() - f.mean).array().square().colwise().sum() / (n - 1.0)).sqrt();
  for (Eigen::Index c = 0; c < f.raw.cols(); ++c) {
    if (f.sd[c] > 0.0) f.retained.push_back(c);
  }
  f.standardized.resize(f.raw.rows(), static_cast<Eigen::Index>(f.retained.size()));
  for (std::size_t j = 0; j < f.retained.size(); ++j) {
    const Eigen::Index c = f.retained[j];
    f.standardized.col(static_cast<Eigen::Index>(j)) = (f.raw.col(c).array() - f.mean[c]) / f.sd[c];
  }
  return f;
}

Eigen::RowVectorXd FeatureMatrix::standardize(const Eigen::RowVectorXd& raw_row) const {
  if (raw_row.size() != raw.cols()) throw ValidationError("standardize: feature count mismatch");
  Eigen::RowVectorXd out(static_cast<Eigen::Index>(retained.size()));
  for (std::size_t j = 0; j < retained.size(); ++j) {
    const Eigen::Index c = retained[j];
    out[static_cast<Eigen::Index>(j)] = (raw_row[c] - mean[c]) / sd[c];
  }
  return out;
}

Eigen::VectorXd signed_variation(const MeshSequence& seq, const MeshSequence& mean_seq) {
  const Topology a = Topology::of(seq);
  const Topology b = Topology::of(mean_seq);
  if (!a.same_connectivity(b) || a.frames != b.frames) {
    throw ValidationError("signed_variation: sequence and mean do not share topology");
  }
  Eigen::VectorXd s = Eigen::VectorXd::Zero(a.total_vertices());
  for (std::size_t t = 0; t < seq.num_frames(); ++t) {
    Eigen::Index off = 0;
    for (std::size_t c = 0; c < kNumStructures; ++c) {
      const TriMesh& m = mean_seq[t][c];
      const Points n = vertex_normals(m);
      const Points d = seq[t][c].vertices - m.vertices;
      s.segment(off, m.num_vertices()) += d.cwiseProduct(n).colwise().sum().transpose();
      off += m.num_vertices();
    }
  }
  return s / static_cast<double>(seq.num_frames());
}

CorrelationMap vertex_correlation(const Eigen::MatrixXd& fields, const Eigen::VectorXd& attribute, double alpha) {
  const Eigen::Index n = fields.rows();
  if (n < 3) throw ValidationError("vertex_correlation: need at least three subjects");
  if (attribute.size() != n) throw ValidationError("vertex_correlation: attribute length does not match subjects");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("vertex_correlation: alpha must be in (0, 1)");
  const Eigen::VectorXd y = attribute.array() - attribute.mean();
  const double syy = y.squaredNorm();
  if (!(syy > 0.0)) throw ValidationError("vertex_correlation: attribute has zero variance");
  const Eigen::Index nv = fields.cols();
  CorrelationMap map;
  map.r = Eigen::VectorXd::Zero(nv);
  map.p = Eigen::VectorXd::Ones(nv);
  map.significant.assign(static_cast<std::size_t>(nv), false);
  map.threshold = alpha / static_cast<double>(nv);
  const boost::math::students_t dist(static_cast<double>(n - 2));
  for (Eigen::Index v = 0; v < nv; ++v) {
    const Eigen::VectorXd x = fields.col(v).array() - fields.col(v).mean();
    const double sxx = x.squaredNorm();
    if (!(sxx > 0.0)) continue;
    const double r = std::clamp(x.dot(y) / std::sqrt(sxx * syy), -1.0, 1.0);
    map.r[v] = r;
    double p = 0.0;
    if (std::abs(r) < 1.0) {
      const double t = std::abs(r) * std::sqrt(static_cast<double>(n - 2) / (1.0 - r * r));
      p = 2.0 * boost::math::cdf(boost::math::complement(dist, t));
    }
    map.p[v] = p;
    map.significant[static_cast<std::size_t>(v)] = p < map.threshold;
  }
  return map;
}

namespace {

std::vector<Eigen::Index> nearest_rows(const Eigen::MatrixXd& z, const Eigen::RowVectorXd& q, int k,
                                       Eigen::Index skip) {
  const Eigen::Index n = z.rows();
  const Eigen::Index available = n - (skip >= 0 ? 1 : 0);
  if (k < 1 || k > available) {
    throw ValidationError("knn_retrieve: K must be in [1, " + std::to_string(available) + "]");
  }
  std::vector<std::pair<double, Eigen::Index>> d;
  d.reserve(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i == skip) continue;
    d.emplace_back((z.row(i) - q).squaredNorm(), i);
  }
  std::partial_sort(d.begin(), d.begin() + k, d.end());
  std::vector<Eigen::Index> out(static_cast<std::size_t>(k));
  for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = d[static_cast<std::size_t>(i)].second;
  return out;
}

}  // namespace

std::vector<Eigen::Index> knn_retrieve(const FeatureMatrix& features, Eigen::Index query, int k, bool exclude_self) {
  if (query < 0 || query >= features.subjects()) throw ValidationError("knn_retrieve: query index out of range");
  return nearest_rows(features.standardized, features.standardized.row(query), k, exclude_self ? query : -1);
}

std::vector<Eigen::Index> knn_retrieve(const FeatureMatrix& features, const Eigen::RowVectorXd& raw_query, int k) {
  return nearest_rows(features.standardized, features.standardize(raw_query), k, -1);
}

double precision_at_k(const FeatureMatrix& features, std::span<const int> groups, int k, int n_queries,
                      std::uint64_t seed) {
  const Eigen::Index n = features.subjects();
  if (static_cast<Eigen::Index>(groups.size()) != n) throw ValidationError("precision_at_k: group count mismatch");
  if (n_queries < 1) throw ValidationError("precision_at_k: need at least one query");
  Rng rng(seed, 0x50524543);
  std::vector<Eigen::Index> queries(static_cast<std::size_t>(n_queries));
  for (auto& q : queries) q = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
  std::vector<double> hits(queries.size());
  parallel_for(queries.size(), [&](std::size_t i) {
    const auto nn = knn_retrieve(features, queries[i], k, true);
    const int g = groups[static_cast<std::size_t>(queries[i])];
    hits[i] = static_cast<double>(
        std::count_if(nn.begin(), nn.end(), [&](Eigen::Index j) { return groups[static_cast<std::size_t>(j)] == g; }));
  });
  const double total = std::accumulate(hits.begin(), hits.end(), 0.0);
  return 100.0 * total / (static_cast<double>(k) * static_cast<double>(n_queries));
}

double recall_at_k(const Eigen::MatrixXd& visit1, const Eigen::MatrixXd& visit2, int k) {
  if (visit1.rows() != visit2.rows() || visit1.cols() != visit2.cols()) {
    throw ValidationError("recall_at_k: visits differ in shape");
  }
  const FeatureMatrix gallery = FeatureMatrix::from(visit1);
  const Eigen::Index n = visit1.rows();
  std::vector<char> found(static_cast<std::size_t>(n), 0);
  parallel_for(static_cast<std::size_t>(n), [&](std::size_t i) {
    const auto nn = knn_retrieve(gallery, Eigen::RowVectorXd(visit2.row(static_cast<Eigen::Index>(i))), k);
    found[i] = std::find(nn.begin(), nn.end(), static_cast<Eigen::Index>(i)) != nn.end();
  });
  const auto count = std::count(found.begin(), found.end(), 1);
  return 100.0 * static_cast<double>(count) / static_cast<double>(n);
}

Eigen::MatrixXd truncate_descriptor(const Eigen::MatrixXd& features, int n_pcs) {
  if (n_pcs < 1 || n_pcs > features.cols()) throw ValidationError("truncate_descriptor: n_pcs out of range");
  return features.leftCols(n_pcs);
}

}  // namespace cardioshape
