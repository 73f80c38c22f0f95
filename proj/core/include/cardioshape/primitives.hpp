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

namespace cardioshape {

/// Subdivided icosahedron projected to a sphere of the given radius,
/// counter-clockwise faces seen from outside. 10·4^k + 2 vertices.
TriMesh icosphere(int subdivisions, double radius = 1.0, Vec3 center = Vec3::Zero());

/// Axis-aligned cube [0,side]^3 triangulated into 12 outward-facing triangles.
TriMesh cube_mesh(double side);

/// n quasi-uniform points on the unit sphere (golden-angle spiral).
Points fibonacci_sphere(int n);

/// Convex hull of points in convex position, faces oriented outward.
/// Every input point must lie on the hull; interior points throw Error.
std::vector<Face> convex_hull(const Points& points);

}  // namespace cardioshape
