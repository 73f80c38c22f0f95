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

#include "cardioshape/ffd.hpp"

#include "cardioshape/error.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace cardioshape {

namespace {

std::array<double, 4> basis(double u) {
  const double v = 1.0 - u;
  const double u2 = u * u;
  const double u3 = u2 * u;
  return {v * v * v / 6.0, (3.0 * u3 - 6.0 * u2 + 4.0) / 6.0, (-3.0 * u3 + 3.0 * u2 + 3.0 * u + 1.0) / 6.0, u3 / 6.0};
}

std::array<double, 4> basis_derivative(double u) {
  const double v = 1.0 - u;
  const double u2 = u * u;
  return {-0.5 * v * v, (3.0 * u2 - 4.0 * u) / 2.0, (-3.0 * u2 + 2.0 * u + 1.0) / 2.0, 0.5 * u2};
}

/// Cell, local coordinate, and whether the coordinate was clamped, per axis.
struct Locator {
  std::array<int, 3> cell{};
  std::array<double, 3> u{};
  std::array<bool, 3> clamped{};
};

Locator locate(const ControlGrid& grid, const Vec3& p) {
  Locator loc;
  for (int a = 0; a < 3; ++a) {
    double t = (p[a] - grid.origin[a]) / grid.spacing[a];
    const double lo = 1.0;
    const double hi = static_cast<double>(grid.dims[a] - 2);
    loc.clamped[a] = t < lo || t > hi;
    t = std::clamp(t, lo, hi);
    int i = static_cast<int>(std::floor(t));
    i = std::min(i, grid.dims[a] - 3);
    loc.cell[a] = i;
    loc.u[a] = t - i;
  }
  return loc;
}

template <class Fn>
void for_support(const ControlGrid& grid, const Locator& loc, const std::array<std::array<double, 4>, 3>& w, Fn&& fn) {
  for (int a = 0; a < 4; ++a) {
    const int i = loc.cell[0] - 1 + a;
    for (int b = 0; b < 4; ++b) {
      const int j = loc.cell[1] - 1 + b;
      const double wab = w[0][a] * w[1][b];
      for (int c = 0; c < 4; ++c) {
        const int k = loc.cell[2] - 1 + c;
        fn(grid.index(i, j, k), wab * w[2][c]);
      }
    }
  }
}

void check_points(const Points& points, const char* what) {
  if (!points.allFinite()) throw ValidationError(std::string(what) + ": non-finite point coordinate");
}

}  // namespace

ControlGrid ControlGrid::covering(const Vec3& lo, const Vec3& hi, std::array<int, 3> dims) {
  ControlGrid g;
  g.dims = dims;
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 4) throw ValidationError("ControlGrid: every dimension needs at least 4 control points");
    if (!(hi[a] > lo[a])) throw ValidationError("ControlGrid: empty bounding box");
    g.spacing[a] = (hi[a] - lo[a]) / (dims[a] - 3);
    g.origin[a] = lo[a] - g.spacing[a];
  }
  g.displacements = Points::Zero(3, g.size());
  return g;
}

void ControlGrid::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] < 4) throw ValidationError("ControlGrid: every dimension needs at least 4 control points");
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a])) throw ValidationError("ControlGrid: spacing must be positive");
  }
  if (!origin.allFinite()) throw ValidationError("ControlGrid: non-finite origin");
  if (displacements.cols() != size()) {
    throw ValidationError("ControlGrid: expected " + std::to_string(size()) + " displacements, got " +
                          std::to_string(displacements.cols()));
  }
  if (!displacements.allFinite()) throw ValidationError("ControlGrid: non-finite displacement");
}

std::array<double, 4> bspline_basis(double u) {
  if (!(u >= 0.0 && u < 1.0)) throw ValidationError("bspline_basis: u must lie in [0,1), got " + std::to_string(u));
  return basis(u);
}

Points warp_points(const ControlGrid& grid, const Points& points) {
  grid.validate();
  check_points(points, "warp_points");
  Points out = points;
  for (Eigen::Index p = 0; p < points.cols(); ++p) {
    const auto loc = locate(grid, points.col(p));
    const std::array<std::array<double, 4>, 3> w{basis(loc.u[0]), basis(loc.u[1]), basis(loc.u[2])};
    Vec3 d = Vec3::Zero();
    for_support(grid, loc, w, [&](Eigen::Index idx, double weight) { d += weight * grid.displacements.col(idx); });
    out.col(p) += d;
  }
  return out;
}

Points warp_gradient(const ControlGrid& grid, const Points& points, const Points& upstream) {
  grid.validate();
  check_points(points, "warp_gradient");
  if (upstream.cols() != points.cols()) {
    throw ValidationError("warp_gradient: " + std::to_string(upstream.cols()) + " upstream vectors for " +
                          std::to_string(points.cols()) + " points");
  }
  Points grad = Points::Zero(3, grid.size());
  // Sequential accumulation in point order keeps the reduction deterministic.
  for (Eigen::Index p = 0; p < points.cols(); ++p) {
    const Vec3 g = upstream.col(p);
    if (g.isZero(0.0)) continue;
    const auto loc = locate(grid, points.col(p));
    const std::array<std::array<double, 4>, 3> w{basis(loc.u[0]), basis(loc.u[1]), basis(loc.u[2])};
    for_support(grid, loc, w, [&](Eigen::Index idx, double weight) { grad.col(idx) += weight * g; });
  }
  return grad;
}

Points warp_backprop_points(const ControlGrid& grid, const Points& points, const Points& upstream) {
  grid.validate();
  check_points(points, "warp_backprop_points");
  if (upstream.cols() != points.cols()) throw ValidationError("warp_backprop_points: shape mismatch");
  Points out = upstream;
  for (Eigen::Index p = 0; p < points.cols(); ++p) {
    const auto loc = locate(grid, points.col(p));
    const std::array<std::array<double, 4>, 3> w{basis(loc.u[0]), basis(loc.u[1]), basis(loc.u[2])};
    const std::array<std::array<double, 4>, 3> dw{basis_derivative(loc.u[0]), basis_derivative(loc.u[1]),
                                                  basis_derivative(loc.u[2])};
    // jac(r, a) = ∂disp_r / ∂p_a
    Eigen::Matrix3d jac = Eigen::Matrix3d::Zero();
    for (int axis = 0; axis < 3; ++axis) {
      if (loc.clamped[axis]) continue;
      auto wa = w;
      wa[axis] = dw[axis];
      Vec3 col = Vec3::Zero();
      for_support(grid, loc, wa, [&](Eigen::Index idx, double weight) { col += weight * grid.displacements.col(idx); });
      jac.col(axis) = col / grid.spacing[axis];
    }
    out.col(p) += jac.transpose() * upstream.col(p);
  }
  return out;
}

Points compose_warp(std::span<const ControlGrid> grids, const Points& points) {
  if (grids.empty()) throw ValidationError("compose_warp: need at least one grid");
  Points cur = points;
  for (const auto& g : grids) cur = warp_points(g, cur);
  return cur;
}

std::vector<Points> compose_warp_gradient(std::span<const ControlGrid> grids, const Points& points,
                                          const Points& upstream) {
  if (grids.empty()) throw ValidationError("compose_warp_gradient: need at least one grid");
  std::vector<Points> stages;
  stages.reserve(grids.size());
  stages.push_back(points);
  for (std::size_t i = 0; i + 1 < grids.size(); ++i) stages.push_back(warp_points(grids[i], stages.back()));
  std::vector<Points> grads(grids.size());
  Points g = upstream;
  for (std::size_t i = grids.size(); i-- > 0;) {
    grads[i] = warp_gradient(grids[i], stages[i], g);
    if (i > 0) g = warp_backprop_points(grids[i], stages[i], g);
  }
  return grads;
}

}  // namespace cardioshape
