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

#include "cardioshape/nearest.hpp"

#include "cardioshape/error.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cardioshape {

PointGrid::PointGrid(const Points& points) : points_(points) {
  const auto n = points_.cols();
  if (n == 0) throw ValidationError("PointGrid: empty point set");
  if (!points_.allFinite()) throw ValidationError("PointGrid: non-finite point");
  lo_ = points_.rowwise().minCoeff();
  const Vec3 hi = points_.rowwise().maxCoeff();
  const Vec3 extent = (hi - lo_).cwiseMax(1e-9);
  // Aim for roughly two points per cell, measured over the axes the set
  // actually spans so planar and linear sets do not get a huge grid.
  const double span_floor = 1e-6 * extent.maxCoeff();
  double measure = 1.0;
  int active = 0;
  for (int a = 0; a < 3; ++a) {
    if (extent[a] > span_floor) {
      measure *= extent[a];
      ++active;
    }
  }
  cell_ = std::pow(measure / std::max<double>(1.0, static_cast<double>(n) / 2.0), 1.0 / std::max(active, 1));
  cell_ = std::max(cell_, extent.maxCoeff() / 256.0);
  for (int a = 0; a < 3; ++a) {
    dims_[a] = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::floor(extent[a] / cell_)) + 1);
  }
  const auto ncell = dims_[0] * dims_[1] * dims_[2];
  cell_start_.assign(static_cast<std::size_t>(ncell) + 1, 0);
  std::vector<std::int64_t> owner(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    std::array<std::int64_t, 3> c{};
    for (int a = 0; a < 3; ++a) {
      c[a] = std::clamp<std::int64_t>(static_cast<std::int64_t>((points_(a, i) - lo_[a]) / cell_), 0, dims_[a] - 1);
    }
    owner[i] = cell_index(c[0], c[1], c[2]);
    ++cell_start_[owner[i] + 1];
  }
  for (std::size_t i = 1; i < cell_start_.size(); ++i) cell_start_[i] += cell_start_[i - 1];
  cell_points_.resize(static_cast<std::size_t>(n));
  std::vector<std::int32_t> fill(cell_start_.begin(), cell_start_.end() - 1);
  for (Eigen::Index i = 0; i < n; ++i) cell_points_[fill[owner[i]]++] = static_cast<std::int32_t>(i);
}

NearestHit PointGrid::nearest(const Vec3& query) const {
  std::array<std::int64_t, 3> c{};
  for (int a = 0; a < 3; ++a) {
    const double f = std::floor((query[a] - lo_[a]) / cell_);
    c[a] = static_cast<std::int64_t>(std::clamp(f, 0.0, static_cast<double>(dims_[a] - 1)));
  }
  const std::int64_t max_ring = std::max({dims_[0], dims_[1], dims_[2]});
  double best_sq = std::numeric_limits<double>::infinity();
  Eigen::Index best = -1;
  auto visit = [&](std::int64_t x, std::int64_t y, std::int64_t z) {
    const auto cell = cell_index(x, y, z);
    for (auto k = cell_start_[cell]; k < cell_start_[cell + 1]; ++k) {
      const auto idx = cell_points_[k];
      const double d = (points_.col(idx) - query).squaredNorm();
      if (d < best_sq || (d == best_sq && idx < best)) {
        best_sq = d;
        best = idx;
      }
    }
  };
  for (std::int64_t r = 0; r <= max_ring; ++r) {
    const auto x0 = std::max<std::int64_t>(0, c[0] - r), x1 = std::min(dims_[0] - 1, c[0] + r);
    const auto y0 = std::max<std::int64_t>(0, c[1] - r), y1 = std::min(dims_[1] - 1, c[1] + r);
    const auto z0 = std::max<std::int64_t>(0, c[2] - r), z1 = std::min(dims_[2] - 1, c[2] + r);
    for (auto z = z0; z <= z1; ++z) {
      for (auto y = y0; y <= y1; ++y) {
        for (auto x = x0; x <= x1; ++x) {
          const bool on_shell = std::abs(x - c[0]) == r || std::abs(y - c[1]) == r || std::abs(z - c[2]) == r;
          if (on_shell) visit(x, y, z);
        }
      }
    }
    // Unvisited points lie beyond a face of the visited block that still has
    // cells behind it.
    double bound = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      if (c[a] - r > 0) bound = std::min(bound, query[a] - (lo_[a] + static_cast<double>(c[a] - r) * cell_));
      if (c[a] + r < dims_[a] - 1) {
        bound = std::min(bound, lo_[a] + static_cast<double>(c[a] + r + 1) * cell_ - query[a]);
      }
    }
    if (best >= 0 && (std::isinf(bound) || best_sq < bound * bound)) break;
  }
  return {best, std::sqrt(best_sq)};
}

NearestHit nearest_brute_force(const Points& points, const Vec3& query) {
  if (points.cols() == 0) throw ValidationError("nearest_brute_force: empty point set");
  NearestHit hit{-1, std::numeric_limits<double>::infinity()};
  double best_sq = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < points.cols(); ++i) {
    const double d = (points.col(i) - query).squaredNorm();
    if (d < best_sq) {
      best_sq = d;
      hit.index = i;
    }
  }
  hit.distance = std::sqrt(best_sq);
  return hit;
}

}  // namespace cardioshape
