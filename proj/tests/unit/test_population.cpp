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
#include "cardioshape/population.hpp"
#include "doctest.h"
#include "helpers.hpp"

#include <numbers>
#include <numeric>

using namespace cardioshape;
using namespace cardioshape::testing;

namespace {

Eigen::MatrixXd gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

std::vector<Eigen::Index> knn_oracle(const Eigen::MatrixXd& z, const Eigen::RowVectorXd& q, int k, Eigen::Index skip) {
  std::vector<Eigen::Index> idx;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    if (i != skip) idx.push_back(i);
  }
  std::stable_sort(idx.begin(), idx.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return (z.row(a) - q).norm() < (z.row(b) - q).norm(); });
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

}  // namespace

TEST_SUITE("population") {
  TEST_CASE("z-scoring drops constant columns") {
    Rng rng(1);
    Eigen::MatrixXd raw = gaussian(rng, 30, 4) * 5.0;
    raw.col(2).setConstant(7.0);
    const FeatureMatrix f = FeatureMatrix::from(raw, {"a", "b", "c", "d"});
    CHECK(f.retained == std::vector<Eigen::Index>{0, 1, 3});
    REQUIRE(f.standardized.cols() == 3);
    for (Eigen::Index c = 0; c < 3; ++c) {
      const Eigen::VectorXd col = f.standardized.col(c);
      CHECK(std::abs(col.mean()) < 1e-12);
      CHECK((col.array() - col.mean()).square().sum() / 29.0 == doctest::Approx(1.0).epsilon(1e-12));
    }
    CHECK((f.standardize(raw.row(4)) - f.standardized.row(4)).norm() < 1e-12);
    CHECK_THROWS_AS(FeatureMatrix::from(raw, {"a"}), ValidationError);
    CHECK_THROWS_AS(FeatureMatrix::from(raw.topRows(1)), ValidationError);
  }

  TEST_CASE("knn retrieval matches a stable-sorted scan") {
    Rng rng(2);
    const FeatureMatrix f = FeatureMatrix::from(gaussian(rng, 60, 5));
    for (Eigen::Index q = 0; q < 60; q += 7) {
      CHECK(knn_retrieve(f, q, 5, true) == knn_oracle(f.standardized, f.standardized.row(q), 5, q));
      const auto with_self = knn_retrieve(f, q, 5, false);
      CHECK(with_self.front() == q);
    }
    CHECK_THROWS_AS(knn_retrieve(f, 0, 60, true), ValidationError);
    CHECK_THROWS_AS(knn_retrieve(f, 0, 0, true), ValidationError);
  }

  TEST_CASE("knn ties go to the lower index") {
    Eigen::MatrixXd raw(5, 1);
    raw << 0.0, 1.0, -1.0, 1.0, -1.0;
    const FeatureMatrix f = FeatureMatrix::from(raw);
    CHECK(knn_retrieve(f, 0, 3, true) == std::vector<Eigen::Index>{1, 2, 3});
    Eigen::RowVectorXd q(1);
    q << 1.0;
    CHECK(knn_retrieve(f, q, 2) == std::vector<Eigen::Index>{1, 3});
  }

  TEST_CASE("precision at k") {
    Rng rng(3);
    Eigen::MatrixXd raw = gaussian(rng, 90, 3);
    std::vector<int> groups(90);
    for (int i = 0; i < 90; ++i) {
      groups[static_cast<std::size_t>(i)] = i % 3;
      raw.row(i).array() += 100.0 * (i % 3);
    }
    const FeatureMatrix separated = FeatureMatrix::from(raw);
    CHECK(precision_at_k(separated, groups, 10, 50, 7) == 100.0);
    CHECK(precision_at_k(separated, groups, 10, 50, 7) == precision_at_k(separated, groups, 10, 50, 7));

    const FeatureMatrix noise = FeatureMatrix::from(gaussian(rng, 300, 3));
    std::vector<int> random_groups(300);
    for (auto& g : random_groups) g = static_cast<int>(rng.below(3));
    const double p = precision_at_k(noise, random_groups, 10, 200, 1);
    CHECK(p > 20.0);
    CHECK(p < 47.0);
    CHECK_THROWS_AS(precision_at_k(noise, groups, 10, 5, 1), ValidationError);
  }

  TEST_CASE("recall at k") {
    Rng rng(4);
    const Eigen::MatrixXd v1 = gaussian(rng, 50, 6);
    const Eigen::MatrixXd v2 = v1 + 0.01 * gaussian(rng, 50, 6);
    CHECK(recall_at_k(v1, v2, 1) == 100.0);
    const Eigen::MatrixXd unrelated = gaussian(rng, 50, 6);
    const double r1 = recall_at_k(v1, unrelated, 1);
    const double r50 = recall_at_k(v1, unrelated, 50);
    CHECK(r1 < 20.0);
    CHECK(r50 == 100.0);
    double prev = 0.0;
    for (int k = 1; k <= 50; k += 7) {
      const double r = recall_at_k(v1, unrelated, k);
      CHECK(r >= prev);
      prev = r;
    }
    CHECK_THROWS_AS(recall_at_k(v1, v2.topRows(10), 1), ValidationError);
  }

  TEST_CASE("vertex correlation against closed-form p-values") {
    // Four subjects leave two degrees of freedom, where the two-sided
    // p-value is 1 − |t| / sqrt(2 + t²).
    Rng rng(5);
    const Eigen::MatrixXd fields = gaussian(rng, 4, 30);
    Eigen::VectorXd attr(4);
    attr << 1.0, 2.5, -0.5, 4.0;
    const CorrelationMap map = vertex_correlation(fields, attr, 0.05);
    CHECK(map.threshold == doctest::Approx(0.05 / 30.0));
    for (Eigen::Index v = 0; v < 30; ++v) {
      const Eigen::VectorXd col = fields.col(v);
      const double r = pearson_r(std::span<const double>(col.data(), 4), std::span<const double>(attr.data(), 4));
      CHECK(map.r[v] == doctest::Approx(r).epsilon(1e-12));
      const double t = std::abs(r) * std::sqrt(2.0 / (1.0 - r * r));
      CHECK(map.p[v] == doctest::Approx(1.0 - t / std::sqrt(2.0 + t * t)).epsilon(1e-9));
      CHECK(map.significant[static_cast<std::size_t>(v)] == (map.p[v] < map.threshold));
    }
  }

  TEST_CASE("vertex correlation with one degree of freedom") {
    Eigen::MatrixXd fields(3, 2);
    fields << 1.0, 2.0, 2.0, 2.0, 4.0, 2.0;
    Eigen::VectorXd attr(3);
    attr << 0.0, 1.0, 1.5;
    const CorrelationMap map = vertex_correlation(fields, attr);
    const double r = map.r[0];
    const double t = std::abs(r) * std::sqrt(1.0 / (1.0 - r * r));
    CHECK(map.p[0] == doctest::Approx(1.0 - 2.0 / std::numbers::pi * std::atan(t)).epsilon(1e-9));
    CHECK(map.r[1] == 0.0);
    CHECK(map.p[1] == 1.0);
  }

  TEST_CASE("a planted effect survives Bonferroni correction") {
    Rng rng(6);
    const int n = 200, nv = 500;
    Eigen::VectorXd attr(n);
    for (int i = 0; i < n; ++i) attr[i] = rng.normal();
    Eigen::MatrixXd fields = gaussian(rng, n, nv);
    for (int v = 0; v < 20; ++v) fields.col(v) += 2.0 * attr;
    const CorrelationMap map = vertex_correlation(fields, attr);
    for (int v = 0; v < 20; ++v) CHECK(map.significant[static_cast<std::size_t>(v)]);
    const auto false_hits = std::count(map.significant.begin() + 20, map.significant.end(), true);
    CHECK(false_hits <= 1);
  }

  TEST_CASE("vertex correlation validation") {
    Eigen::MatrixXd fields = Eigen::MatrixXd::Zero(5, 3);
    CHECK_THROWS_AS(vertex_correlation(fields, Eigen::VectorXd::Zero(4)), ValidationError);
    CHECK_THROWS_AS(vertex_correlation(fields, Eigen::VectorXd::Constant(5, 1.0)), ValidationError);
    CHECK_THROWS_AS(vertex_correlation(fields, Eigen::VectorXd::LinSpaced(5, 0, 1), 1.5), ValidationError);
  }

  TEST_CASE("signed variation measures displacement along the mean normals") {
    const ChamberSet cs = small_chambers(2);
    MeshSequence mean;
    mean.frames = {cs, cs};
    MeshSequence inflated;
    for (int t = 0; t < 2; ++t) {
      ChamberSet f = cs;
      for (std::size_t s = 0; s < kNumStructures; ++s) f[s] = inflate_along_normals(cs[s], 1.0 + t);
      inflated.frames.push_back(f);
    }
    const Eigen::VectorXd s = signed_variation(inflated, mean);
    CHECK(s.size() == Topology::of(cs).total_vertices());
    CHECK((s.array() - 1.5).abs().maxCoeff() < 1e-12);
    CHECK(signed_variation(mean, mean).isZero(0.0));
  }

  TEST_CASE("descriptor truncation") {
    Eigen::MatrixXd f = Eigen::MatrixXd::Random(4, 8);
    CHECK(truncate_descriptor(f, 3) == f.leftCols(3));
    CHECK(truncate_descriptor(f, 8) == f);
    CHECK_THROWS_AS(truncate_descriptor(f, 9), ValidationError);
    CHECK_THROWS_AS(truncate_descriptor(f, 0), ValidationError);
  }
}
