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
#include <string>
#include <vector>

namespace cardioshape {

/// One 2D+t image plane placed in 3D.
///
/// Pixel (row r, column c) is centred at origin + c·du·axis_u + r·dv·axis_v.
/// In-plane coordinates (x, y) are millimetres along axis_u / axis_v from the
/// origin. The motion-corrected image is Ĩ(x, y) = I(x + Δx, y + Δy).
struct SlicePlane {
  std::string id;
  Vec3 origin = Vec3::Zero();
  Vec3 axis_u = Vec3::UnitX();
  Vec3 axis_v = Vec3::UnitY();
  double du = 1.0;
  double dv = 1.0;
  int width = 0;
  int height = 0;
  int frames = 0;
  /// frames × height × width, row-major.
  std::vector<float> image;
  /// Same layout as image; empty when the plane carries no labels.
  std::vector<std::uint8_t> labels;
  Eigen::Vector2d displacement = Eigen::Vector2d::Zero();

  Vec3 normal() const { return axis_u.cross(axis_v); }
  bool has_labels() const { return !labels.empty(); }
  std::size_t pixel_index(int t, int r, int c) const {
    return (static_cast<std::size_t>(t) * height + r) * width + c;
  }
  /// In-plane millimetre coordinates of a 3D point (projected onto the plane).
  Eigen::Vector2d project(const Vec3& p) const {
    const Vec3 d = p - origin;
    return {d.dot(axis_u), d.dot(axis_v)};
  }
  Vec3 point_at(double x, double y) const { return origin + x * axis_u + y * axis_v; }
  double extent_u() const { return (width - 1) * du; }
  double extent_v() const { return (height - 1) * dv; }

  void validate() const;
};

/// Short-axis stack plus two long-axis planes.
struct ViewSet {
  std::vector<SlicePlane> sax;
  SlicePlane la_2ch;
  SlicePlane la_4ch;

  int frames() const { return la_2ch.frames; }
  std::size_t plane_count() const { return sax.size() + 2; }
  /// Planes in parameter order: sax..., 2ch, 4ch.
  const SlicePlane& plane(std::size_t i) const;
  SlicePlane& plane(std::size_t i);
  std::vector<Eigen::Vector2d> displacements() const;
  void set_displacements(const std::vector<Eigen::Vector2d>& d);

  void validate() const;
};

/// Points on the intersection line of two planes, clipped to both image
/// rectangles and sampled every min(du, dv) of the two planes. May be empty.
/// Throws ValidationError for parallel planes.
Points intersection_samples(const SlicePlane& a, const SlicePlane& b);

/// Bilinear intensity at a 3D point (projected into the plane) after applying
/// the plane's displacement. Out-of-bounds coordinates clamp to the border.
double bilinear_sample(const SlicePlane& plane, const Vec3& point, int frame);

/// Nearest-pixel label after applying the plane's displacement.
std::uint8_t nearest_label_sample(const SlicePlane& plane, const Vec3& point, int frame);

struct McObjective {
  double value = 0.0;
  /// ∂value/∂(Δx, Δy) per plane in ViewSet::plane order.
  std::vector<Eigen::Vector2d> gradient;
  std::vector<std::string> warnings;
};

/// Frame-averaged sum of absolute intensity differences on all 2ch/4ch,
/// sax/2ch and sax/4ch intersections plus half the through-stack second
/// difference of the short-axis slices over every pixel.
McObjective mc_objective(const ViewSet& views);

struct McOptions {
  double lr = 0.1;
  int epochs = 1000;
};

struct McResult {
  /// Displacements with the lowest objective seen, in ViewSet::plane order.
  std::vector<Eigen::Vector2d> displacements;
  /// Objective value before each update (epochs + 1 entries, last one after
  /// the final update).
  std::vector<double> trace;
  double best_objective = 0.0;
};

/// Joint Adam minimisation of mc_objective over all in-plane displacements,
/// starting from the displacements currently stored in the views.
McResult mc_optimize(const ViewSet& views, const McOptions& options = {});

struct IntersectionQuality {
  /// Mean over foreground labels present of the pooled intersection Dice.
  std::optional<double> dice;
  double pearson_r = 0.0;
};

/// Agreement of paired samples along every plane intersection, across frames.
IntersectionQuality eval_intersections(const ViewSet& views);

}  // namespace cardioshape
