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

#include <cstdint>
#include <vector>

namespace cardioshape {

struct NearestHit {
  Eigen::Index index = -1;
  double distance = 0.0;
};

/// Uniform-grid bucketing for exact nearest-neighbour queries. Among points
/// at exactly the same distance the lowest index wins, which makes results
/// identical to an exhaustive scan.
class PointGrid {
 public:
  explicit PointGrid(const Points& points);

  NearestHit nearest(const Vec3& query) const;
  Eigen::Index size() const { return points_.cols(); }

 private:
  std::int64_t cell_index(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return (z * dims_[1] + y) * dims_[0] + x;
  }

  Points points_;
  Vec3 lo_;
  double cell_ = 1.0;
  std::array<std::int64_t, 3> dims_{1, 1, 1};
  std::vector<std::int32_t> cell_start_;
  std::vector<std::int32_t> cell_points_;
};

/// Exhaustive O(N·M) nearest-neighbour scan; reference for PointGrid.
NearestHit nearest_brute_force(const Points& points, const Vec3& query);

}  // namespace cardioshape
