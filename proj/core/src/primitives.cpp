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

#include "cardioshape/primitives.hpp"

#include "cardioshape/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <set>
#include <string>
#include <utility>

namespace cardioshape {

TriMesh icosphere(int subdivisions, double radius, Vec3 center) {
  if (subdivisions < 0) throw ValidationError("icosphere: subdivisions must be >= 0");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> verts{{-1, t, 0}, {1, t, 0},   {-1, -t, 0}, {1, -t, 0}, {0, -1, t},  {0, 1, t},
                          {0, -1, -t}, {0, 1, -t}, {t, 0, -1},  {t, 0, 1},  {-t, 0, -1}, {-t, 0, 1}};
  for (auto& v : verts) v.normalize();
  std::vector<Face> faces{{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
                          {11, 10, 2}, {10, 7, 6}, {7, 1, 8},   {3, 9, 4},  {3, 4, 2},   {3, 2, 6}, {3, 6, 8},
                          {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10}, {8, 6, 7},   {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> midpoint;
    auto mid = [&](int a, int b) {
      auto key = std::minmax(a, b);
      auto it = midpoint.find(key);
      if (it != midpoint.end()) return it->second;
      verts.push_back((verts[a] + verts[b]).normalized());
      const int idx = static_cast<int>(verts.size()) - 1;
      midpoint.emplace(key, idx);
      return idx;
    };
    std::vector<Face> next;
    next.reserve(faces.size() * 4);
    for (const auto& f : faces) {
      const int ab = mid(f[0], f[1]);
      const int bc = mid(f[1], f[2]);
      const int ca = mid(f[2], f[0]);
      next.push_back({f[0], ab, ca});
      next.push_back({f[1], bc, ab});
      next.push_back({f[2], ca, bc});
      next.push_back({ab, bc, ca});
    }
    faces = std::move(next);
  }
  TriMesh mesh;
  mesh.vertices.resize(3, static_cast<Eigen::Index>(verts.size()));
  for (std::size_t i = 0; i < verts.size(); ++i) mesh.vertices.col(static_cast<Eigen::Index>(i)) = radius * verts[i] + center;
  mesh.faces = std::move(faces);
  return mesh;
}

TriMesh cube_mesh(double side) {
  TriMesh mesh;
  mesh.vertices.resize(3, 8);
  for (int i = 0; i < 8; ++i) {
    mesh.vertices.col(i) = side * Vec3((i & 1) ? 1.0 : 0.0, (i & 2) ? 1.0 : 0.0, (i & 4) ? 1.0 : 0.0);
  }
  mesh.faces = {{0, 2, 3}, {0, 3, 1},   // z = 0
                {4, 5, 7}, {4, 7, 6},   // z = side
                {0, 1, 5}, {0, 5, 4},   // y = 0
                {2, 6, 7}, {2, 7, 3},   // y = side
                {0, 4, 6}, {0, 6, 2},   // x = 0
                {1, 3, 7}, {1, 7, 5}};  // x = side
  return mesh;
}

Points fibonacci_sphere(int n) {
  if (n < 4) throw ValidationError("fibonacci_sphere: need at least 4 points");
  Points p(3, n);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - (2.0 * i + 1.0) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    p.col(i) = Vec3(r * std::cos(phi), r * std::sin(phi), z);
  }
  return p;
}

std::vector<Face> convex_hull(const Points& points) {
  const auto n = points.cols();
  if (n < 4) throw ValidationError("convex_hull: need at least 4 points");
  const double scale = std::max(1e-300, (points.colwise() - points.rowwise().mean()).cwiseAbs().maxCoeff());
  const double eps = 1e-12 * scale;

  // Seed tetrahedron: extreme pair, farthest from their line, farthest from their plane.
  Eigen::Index i0 = 0;
  Eigen::Index i1 = 0;
  (points.colwise() - points.col(0)).colwise().squaredNorm().maxCoeff(&i1);
  Eigen::Index i2 = 0;
  {
    const Vec3 d = (points.col(i1) - points.col(i0)).normalized();
    double best = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Vec3 w = points.col(i) - points.col(i0);
      const double dist = (w - w.dot(d) * d).squaredNorm();
      if (dist > best) best = dist, i2 = i;
    }
  }
  Eigen::Index i3 = 0;
  {
    const Vec3 nrm = (points.col(i1) - points.col(i0)).cross(points.col(i2) - points.col(i0));
    double best = -1;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double dist = std::abs(nrm.dot(points.col(i) - points.col(i0)));
      if (dist > best) best = dist, i3 = i;
    }
    if (best <= eps * nrm.norm()) throw Error("convex_hull: points are coplanar");
  }

  struct HullFace {
    Face v;
    Vec3 normal;
    double offset;
    bool alive;
  };
  std::vector<HullFace> faces;
  auto add_face = [&](std::int32_t a, std::int32_t b, std::int32_t c) {
    const Vec3 nrm = (points.col(b) - points.col(a)).cross(points.col(c) - points.col(a)).normalized();
    faces.push_back({{a, b, c}, nrm, nrm.dot(points.col(a)), true});
  };
  {
    auto a = static_cast<std::int32_t>(i0), b = static_cast<std::int32_t>(i1);
    auto c = static_cast<std::int32_t>(i2), d = static_cast<std::int32_t>(i3);
    const Vec3 nrm = (points.col(b) - points.col(a)).cross(points.col(c) - points.col(a));
    if (nrm.dot(points.col(d) - points.col(a)) > 0) std::swap(b, c);
    add_face(a, b, c);
    add_face(a, d, b);
    add_face(b, d, c);
    add_face(c, d, a);
  }

  std::vector<char> on_hull(static_cast<std::size_t>(n), 0);
  for (auto idx : {i0, i1, i2, i3}) on_hull[static_cast<std::size_t>(idx)] = 1;
  std::vector<std::size_t> visible;
  std::set<std::pair<std::int32_t, std::int32_t>> directed;
  for (Eigen::Index p = 0; p < n; ++p) {
    if (on_hull[static_cast<std::size_t>(p)]) continue;
    const Vec3 q = points.col(p);
    visible.clear();
    for (std::size_t f = 0; f < faces.size(); ++f) {
      if (faces[f].alive && faces[f].normal.dot(q) - faces[f].offset > eps) visible.push_back(f);
    }
    if (visible.empty()) {
      throw Error("convex_hull: point " + std::to_string(p) + " is not in convex position");
    }
    directed.clear();
    for (auto f : visible) {
      const auto& v = faces[f].v;
      for (int k = 0; k < 3; ++k) directed.emplace(v[k], v[(k + 1) % 3]);
      faces[f].alive = false;
    }
    for (const auto& [a, b] : directed) {
      if (!directed.count({b, a})) add_face(a, b, static_cast<std::int32_t>(p));
    }
    on_hull[static_cast<std::size_t>(p)] = 1;
  }
  std::vector<Face> out;
  for (const auto& f : faces) {
    if (f.alive) out.push_back(f.v);
  }
  return out;
}

}  // namespace cardioshape
