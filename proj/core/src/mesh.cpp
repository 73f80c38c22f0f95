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

#include "cardioshape/mesh.hpp"

#include "cardioshape/error.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <map>
#include <string>

namespace cardioshape {

namespace {

constexpr std::array<std::string_view, kNumStructures> kNames{"LV-endo", "LV-epi", "RV", "LA", "RA"};

}  // namespace

std::string_view structure_name(Structure s) { return kNames[static_cast<std::size_t>(s)]; }

Structure structure_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return kStructures[i];
  }
  throw ValidationError("unknown structure name '" + std::string(name) + "'");
}

void TriMesh::validate() const {
  const auto n = num_vertices();
  if (!vertices.allFinite()) {
    throw ValidationError(std::string(structure_name(structure)) + ": non-finite vertex coordinate");
  }
  std::vector<char> used(static_cast<std::size_t>(std::max<Eigen::Index>(n, 0)), 0);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (auto idx : faces[f]) {
      if (idx < 0 || idx >= n) {
        throw ValidationError(std::string(structure_name(structure)) + ": face " + std::to_string(f) +
                              " references vertex " + std::to_string(idx) + " of " + std::to_string(n));
      }
      used[static_cast<std::size_t>(idx)] = 1;
    }
  }
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!used[static_cast<std::size_t>(i)]) {
      throw ValidationError(std::string(structure_name(structure)) + ": vertex " + std::to_string(i) +
                            " is not referenced by any face");
    }
  }
}

Eigen::Index ChamberSet::total_vertices() const {
  Eigen::Index n = 0;
  for (const auto& m : meshes) n += m.num_vertices();
  return n;
}

void ChamberSet::validate() const {
  for (std::size_t i = 0; i < kNumStructures; ++i) {
    if (meshes[i].structure != kStructures[i]) {
      throw ValidationError("chamber set slot " + std::to_string(i) + " holds " +
                            std::string(structure_name(meshes[i].structure)));
    }
    meshes[i].validate();
  }
  if (meshes[0].num_vertices() != meshes[1].num_vertices()) {
    throw ValidationError("LV-endo and LV-epi vertex counts differ");
  }
}

void MeshSequence::validate() const {
  if (frames.empty()) throw ValidationError("mesh sequence has no frames");
  frames.front().validate();
  const auto topo = Topology::of(frames.front());
  for (std::size_t t = 1; t < frames.size(); ++t) {
    frames[t].validate();
    if (!Topology::of(frames[t]).same_connectivity(topo)) {
      throw ValidationError("frame " + std::to_string(t) + " connectivity differs from frame 0");
    }
  }
}

Topology Topology::of(const ChamberSet& chambers, std::size_t frames) {
  Topology topo;
  for (std::size_t i = 0; i < kNumStructures; ++i) {
    topo.faces[i] = chambers[i].faces;
    topo.vertex_counts[i] = chambers[i].num_vertices();
  }
  topo.frames = frames;
  return topo;
}

Topology Topology::of(const MeshSequence& seq) {
  if (seq.frames.empty()) throw ValidationError("mesh sequence has no frames");
  return of(seq.frames.front(), seq.num_frames());
}

Eigen::Index Topology::total_vertices() const {
  Eigen::Index n = 0;
  for (auto c : vertex_counts) n += c;
  return n;
}

Eigen::Index Topology::vertex_offset(Structure s) const {
  Eigen::Index off = 0;
  for (std::size_t i = 0; i < static_cast<std::size_t>(s); ++i) off += vertex_counts[i];
  return off;
}

std::uint64_t Topology::digest() const {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t value) {
    for (int b = 0; b < 8; ++b) {
      h ^= (value >> (8 * b)) & 0xffU;
      h *= 1099511628211ULL;
    }
  };
  for (std::size_t i = 0; i < kNumStructures; ++i) {
    mix(static_cast<std::uint64_t>(vertex_counts[i]));
    mix(faces[i].size());
    for (const auto& f : faces[i]) {
      for (auto idx : f) mix(static_cast<std::uint64_t>(idx));
    }
  }
  return h;
}

ChamberSet Topology::empty_chambers() const {
  ChamberSet out;
  for (std::size_t i = 0; i < kNumStructures; ++i) {
    out[i].structure = kStructures[i];
    out[i].faces = faces[i];
    out[i].vertices = Points::Zero(3, vertex_counts[i]);
  }
  return out;
}

bool Topology::same_connectivity(const Topology& other) const {
  return vertex_counts == other.vertex_counts && faces == other.faces;
}

ShapeVector vectorize(const MeshSequence& seq) {
  const auto topo = Topology::of(seq);
  ShapeVector v(topo.shape_dimension());
  Eigen::Index pos = 0;
  for (const auto& frame : seq.frames) {
    for (std::size_t i = 0; i < kNumStructures; ++i) {
      const auto& pts = frame[i].vertices;
      if (pts.cols() != topo.vertex_counts[i]) {
        throw ValidationError("frame vertex count differs from frame 0 in " +
                              std::string(structure_name(kStructures[i])));
      }
      v.segment(pos, 3 * pts.cols()) = Eigen::Map<const Eigen::VectorXd>(pts.data(), 3 * pts.cols());
      pos += 3 * pts.cols();
    }
  }
  return v;
}

MeshSequence devectorize(const ShapeVector& v, const Topology& topo) {
  if (v.size() != topo.shape_dimension()) {
    throw ValidationError("shape vector length " + std::to_string(v.size()) + " does not match expected " +
                          std::to_string(topo.shape_dimension()));
  }
  MeshSequence seq;
  seq.frames.reserve(topo.frames);
  Eigen::Index pos = 0;
  for (std::size_t t = 0; t < topo.frames; ++t) {
    ChamberSet frame = topo.empty_chambers();
    for (std::size_t i = 0; i < kNumStructures; ++i) {
      const auto n = topo.vertex_counts[i];
      frame[i].vertices = Eigen::Map<const Points>(v.data() + pos, 3, n);
      pos += 3 * n;
    }
    seq.frames.push_back(std::move(frame));
  }
  return seq;
}

std::vector<Edge> unique_edges(const std::vector<Face>& faces) {
  std::vector<Edge> edges;
  edges.reserve(faces.size() * 3);
  for (const auto& f : faces) {
    for (int k = 0; k < 3; ++k) {
      auto a = f[k];
      auto b = f[(k + 1) % 3];
      edges.push_back(a < b ? Edge{a, b} : Edge{b, a});
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

std::size_t boundary_edge_count(const std::vector<Face>& faces) {
  std::map<Edge, int> uses;
  for (const auto& f : faces) {
    for (int k = 0; k < 3; ++k) {
      auto a = f[k];
      auto b = f[(k + 1) % 3];
      ++uses[a < b ? Edge{a, b} : Edge{b, a}];
    }
  }
  return static_cast<std::size_t>(std::count_if(uses.begin(), uses.end(), [](const auto& kv) { return kv.second == 1; }));
}

Adjacency Adjacency::build(Eigen::Index num_vertices, const std::vector<Face>& faces) {
  const auto edges = unique_edges(faces);
  Adjacency adj;
  adj.offsets.assign(static_cast<std::size_t>(num_vertices) + 1, 0);
  for (const auto& e : edges) {
    ++adj.offsets[e[0] + 1];
    ++adj.offsets[e[1] + 1];
  }
  for (std::size_t i = 1; i < adj.offsets.size(); ++i) adj.offsets[i] += adj.offsets[i - 1];
  adj.indices.resize(edges.size() * 2);
  std::vector<std::int32_t> fill(adj.offsets.begin(), adj.offsets.end() - 1);
  // Edges are sorted, so each neighbour list ends up sorted as well.
  for (const auto& e : edges) adj.indices[fill[e[0]]++] = e[1];
  for (const auto& e : edges) adj.indices[fill[e[1]]++] = e[0];
  for (Eigen::Index i = 0; i < num_vertices; ++i) {
    std::sort(adj.indices.begin() + adj.offsets[i], adj.indices.begin() + adj.offsets[i + 1]);
  }
  return adj;
}

Points vertex_normals(const Points& vertices, const std::vector<Face>& faces) {
  Points acc = Points::Zero(3, vertices.cols());
  for (const auto& f : faces) {
    const Vec3 a = vertices.col(f[0]);
    const Vec3 b = vertices.col(f[1]);
    const Vec3 c = vertices.col(f[2]);
    // Twice the face area times the unit face normal.
    const Vec3 n = (b - a).cross(c - a);
    acc.col(f[0]) += n;
    acc.col(f[1]) += n;
    acc.col(f[2]) += n;
  }
  for (Eigen::Index i = 0; i < acc.cols(); ++i) {
    const double len = acc.col(i).norm();
    if (!(len > 0.0)) {
      throw Error("vertex " + std::to_string(i) + " has a zero-area one-ring; normal undefined");
    }
    acc.col(i) /= len;
  }
  return acc;
}

Points vertex_normals(const TriMesh& mesh) { return vertex_normals(mesh.vertices, mesh.faces); }

Eigen::SparseMatrix<double> graph_laplacian(const TriMesh& mesh) {
  const auto n = mesh.num_vertices();
  const auto adj = Adjacency::build(n, mesh.faces);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(n) + adj.indices.size());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto deg = adj.degree(i);
    if (deg == 0) throw Error("vertex " + std::to_string(i) + " is isolated; Laplacian row undefined");
    triplets.emplace_back(i, i, 1.0);
    for (auto k = adj.offsets[i]; k < adj.offsets[i + 1]; ++k) {
      triplets.emplace_back(i, adj.indices[k], -1.0 / deg);
    }
  }
  Eigen::SparseMatrix<double> L(n, n);
  L.setFromTriplets(triplets.begin(), triplets.end());
  return L;
}

Points apply_laplacian(const Points& vertices, const Adjacency& adjacency) {
  Points out(3, vertices.cols());
  for (Eigen::Index i = 0; i < vertices.cols(); ++i) {
    const auto deg = adjacency.degree(i);
    if (deg == 0) throw Error("vertex " + std::to_string(i) + " is isolated; Laplacian row undefined");
    Vec3 sum = Vec3::Zero();
    for (auto k = adjacency.offsets[i]; k < adjacency.offsets[i + 1]; ++k) sum += vertices.col(adjacency.indices[k]);
    out.col(i) = vertices.col(i) - sum / deg;
  }
  return out;
}

Eigen::VectorXd mean_curvature(const Points& vertices, const std::vector<Face>& faces, const Adjacency& adjacency) {
  const Points normals = vertex_normals(vertices, faces);
  const Points lap = apply_laplacian(vertices, adjacency);
  return -0.5 * (lap.array() * normals.array()).colwise().sum().transpose();
}

Eigen::VectorXd mean_curvature(const TriMesh& mesh) {
  return mean_curvature(mesh.vertices, mesh.faces, Adjacency::build(mesh.num_vertices(), mesh.faces));
}

Points RigidTransform::apply(const Points& p) const {
  return ((scale * rotation) * p).colwise() + translation;
}

ChamberSet transformed(const ChamberSet& chambers, const RigidTransform& xf) {
  ChamberSet out = chambers;
  for (auto& m : out.meshes) m.vertices = xf.apply(m.vertices);
  return out;
}

MeshSequence transformed(const MeshSequence& seq, const RigidTransform& xf) {
  MeshSequence out;
  out.frames.reserve(seq.num_frames());
  for (const auto& f : seq.frames) out.frames.push_back(transformed(f, xf));
  return out;
}

AlignResult rigid_align(const ChamberSet& source, const ChamberSet& target, bool allow_scale) {
  const auto n = source.total_vertices();
  if (n != target.total_vertices()) throw ValidationError("rigid_align: source and target vertex counts differ");
  for (std::size_t i = 0; i < kNumStructures; ++i) {
    if (source[i].num_vertices() != target[i].num_vertices()) {
      throw ValidationError("rigid_align: vertex count mismatch in " + std::string(structure_name(kStructures[i])));
    }
  }
  Points src(3, n);
  Points dst(3, n);
  Eigen::Index pos = 0;
  for (std::size_t i = 0; i < kNumStructures; ++i) {
    src.middleCols(pos, source[i].num_vertices()) = source[i].vertices;
    dst.middleCols(pos, target[i].num_vertices()) = target[i].vertices;
    pos += source[i].num_vertices();
  }
  const Vec3 mu_s = src.rowwise().mean();
  const Vec3 mu_d = dst.rowwise().mean();
  const Points xs = src.colwise() - mu_s;
  const Points xd = dst.colwise() - mu_d;
  const double var_s = xs.squaredNorm();
  if (!(var_s > 0.0) || !(xd.squaredNorm() > 0.0)) {
    throw Error("rigid_align: point set is degenerate (all points coincide)");
  }
  const Eigen::Matrix3d cov = xd * xs.transpose();
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(cov, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  if ((svd.matrixU() * svd.matrixV().transpose()).determinant() < 0) d(2, 2) = -1.0;

  RigidTransform xf;
  xf.rotation = svd.matrixU() * d * svd.matrixV().transpose();
  xf.scale = allow_scale ? (svd.singularValues().asDiagonal() * d).trace() / var_s : 1.0;
  xf.translation = mu_d - xf.scale * xf.rotation * mu_s;
  return {xf, transformed(source, xf)};
}

TriMesh inflate_along_normals(const TriMesh& mesh, double offset) {
  if (offset < 0.0) throw ValidationError("inflate_along_normals: offset must be non-negative");
  TriMesh out = mesh;
  if (offset == 0.0) return out;
  out.vertices += offset * vertex_normals(mesh);
  return out;
}

}  // namespace cardioshape
