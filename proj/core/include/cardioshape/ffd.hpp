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

#include <array>
#include <span>
#include <vector>

namespace cardioshape {

/// Cubic B-spline free-form deformation lattice.
///
/// Control point (i,j,k) sits at origin + (i,j,k)·spacing and carries a
/// displacement. Displacements are stored with x slowest and the vector
/// component fastest, i.e. row-major over (Gx, Gy, Gz, 3).
struct ControlGrid {
  std::array<int, 3> dims{4, 4, 4};
  Vec3 origin = Vec3::Zero();
  Vec3 spacing = Vec3::Ones();
  Points displacements;

  /// Zero-displacement lattice whose interior cells exactly cover [lo, hi].
  static ControlGrid covering(const Vec3& lo, const Vec3& hi, std::array<int, 3> dims);

  Eigen::Index size() const { return static_cast<Eigen::Index>(dims[0]) * dims[1] * dims[2]; }
  Eigen::Index index(int i, int j, int k) const {
    return (static_cast<Eigen::Index>(i) * dims[1] + j) * dims[2] + k;
  }
  void validate() const;
};

/// Uniform cubic B-spline weights B0..B3 at u in [0,1). Throws
/// ValidationError outside that range.
std::array<double, 4> bspline_basis(double u);

/// p' = p + Σ basis-weighted displacements of the 4×4×4 support. Points
/// outside the lattice are clamped to the nearest boundary cell.
Points warp_points(const ControlGrid& grid, const Points& points);

/// ∂Loss/∂displacements given ∂Loss/∂p' per point. Returns 3×grid.size().
Points warp_gradient(const ControlGrid& grid, const Points& points, const Points& upstream);

/// ∂Loss/∂p given ∂Loss/∂p' (transpose of the warp's spatial Jacobian).
Points warp_backprop_points(const ControlGrid& grid, const Points& points, const Points& upstream);

/// Sequential warping: the output of grids[i] feeds grids[i+1].
Points compose_warp(std::span<const ControlGrid> grids, const Points& points);

/// Gradient of a loss through compose_warp with respect to every grid's
/// displacements. Result[i] has shape 3×grids[i].size().
std::vector<Points> compose_warp_gradient(std::span<const ControlGrid> grids, const Points& points,
                                          const Points& upstream);

}  // namespace cardioshape
