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

#include <array>
#include <cstdint>
#include <vector>

namespace cardioshape {

/// Label values shared by voxelisation, slicing and surface extraction.
enum Label : std::uint8_t {
  kBackground = 0,
  kLvBlood = 1,
  kLvMyocardium = 2,
  kRvBlood = 3,
  kLaBlood = 4,
  kRaBlood = 5,
};

/// Dense 3D grid, x fastest in memory. Voxel (i,j,k) is centred at
/// origin + axes · (spacing ∘ (i,j,k)).
template <class T>
struct Volume {
  std::array<int, 3> dims{0, 0, 0};
  Vec3 spacing = Vec3::Ones();
  Vec3 origin = Vec3::Zero();
  Eigen::Matrix3d axes = Eigen::Matrix3d::Identity();
  std::vector<T> data;

  static Volume zeros(std::array<int, 3> dims, const Vec3& spacing, const Vec3& origin = Vec3::Zero()) {
    Volume v;
    v.dims = dims;
    v.spacing = spacing;
    v.origin = origin;
    v.data.assign(static_cast<std::size_t>(dims[0]) * dims[1] * dims[2], T{});
    return v;
  }

  std::size_t voxel_count() const { return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2]; }
  std::size_t index(int i, int j, int k) const {
    return (static_cast<std::size_t>(k) * dims[1] + j) * dims[0] + i;
  }
  T& at(int i, int j, int k) { return data[index(i, j, k)]; }
  const T& at(int i, int j, int k) const { return data[index(i, j, k)]; }
  Vec3 voxel_center(int i, int j, int k) const {
    return origin + axes * Vec3(spacing[0] * i, spacing[1] * j, spacing[2] * k);
  }
  /// Continuous voxel coordinates of a world point.
  Vec3 to_voxel(const Vec3& world) const {
    return (axes.transpose() * (world - origin)).cwiseQuotient(spacing);
  }
};

using LabelVolume = Volume<std::uint8_t>;
using IntensityVolume = Volume<float>;

template <class A, class B>
bool same_geometry(const Volume<A>& a, const Volume<B>& b) {
  return a.dims == b.dims && a.spacing == b.spacing && a.origin == b.origin && a.axes == b.axes;
}

/// Trilinear interpolation; coordinates outside the grid are clamped.
double trilinear(const IntensityVolume& vol, const Vec3& world);

/// Nearest-voxel lookup; coordinates outside the grid are clamped.
std::uint8_t nearest_label(const LabelVolume& vol, const Vec3& world);

/// Separable box filter of the given half-width (voxels) along each axis,
/// repeated `passes` times. Three passes approximate a Gaussian.
IntensityVolume box_blur(const IntensityVolume& vol, int half_width, int passes = 3);

}  // namespace cardioshape
