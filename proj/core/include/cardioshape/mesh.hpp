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

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SparseCore>

#include <array>
#include <cstdint>
#include <string_view>
#include <vector>

namespace cardioshape {

using Vec3 = Eigen::Vector3d;
/// 3×N matrix of points, one column per point. Column-major storage keeps
/// each point's (x,y,z) contiguous.
using Points = Eigen::Matrix3Xd;
using Face = std::array<std::int32_t, 3>;
using Edge = std::array<std::int32_t, 2>;

enum class Structure : int { LvEndo = 0, LvEpi = 1, Rv = 2, La = 3, Ra = 4 };

inline constexpr std::size_t kNumStructures = 5;
inline constexpr std::array<Structure, kNumStructures> kStructures{
    Structure::LvEndo, Structure::LvEpi, Structure::Rv, Structure::La, Structure::Ra};

std::string_view structure_name(Structure s);
/// Inverse of structure_name. Throws ValidationError for unknown names.
Structure structure_from_name(std::string_view name);

struct TriMesh {
  Points vertices;
  std::vector<Face> faces;
  Structure structure = Structure::LvEndo;

  Eigen::Index num_vertices() const { return vertices.cols(); }

  /// Checks index ranges, finiteness and that every vertex is used by a face.
  void validate() const;
};

/// The five cardiac structures, indexed by Structure.
struct ChamberSet {
  std::array<TriMesh, kNumStructures> meshes;

  TriMesh& operator[](Structure s) { return meshes[static_cast<std::size_t>(s)]; }
  const TriMesh& operator[](Structure s) const { return meshes[static_cast<std::size_t>(s)]; }
  TriMesh& operator[](std::size_t i) { return meshes[i]; }
  const TriMesh& operator[](std::size_t i) const { return meshes[i]; }

  Eigen::Index total_vertices() const;
  void validate() const;
};

struct MeshSequence {
  std::vector<ChamberSet> frames;

  std::size_t num_frames() const { return frames.size(); }
  ChamberSet& operator[](std::size_t t) { return frames[t]; }
  const ChamberSet& operator[](std::size_t t) const { return frames[t]; }

  /// Checks every frame and that connectivity is shared across frames.
  void validate() const;
};

/// Connectivity shared by every frame of a sequence and every subject fitted
/// from the same template.
struct Topology {
  std::array<std::vector<Face>, kNumStructures> faces;
  std::array<Eigen::Index, kNumStructures> vertex_counts{};
  std::size_t frames = 1;

  static Topology of(const ChamberSet& chambers, std::size_t frames = 1);
  static Topology of(const MeshSequence& seq);

  Eigen::Index total_vertices() const;
  Eigen::Index vertex_offset(Structure s) const;
  /// 3·T·|V|.
  Eigen::Index shape_dimension() const { return 3 * static_cast<Eigen::Index>(frames) * total_vertices(); }
  /// FNV-1a over vertex counts and faces. Frame count is not part of the digest.
  std::uint64_t digest() const;
  /// Copy of the connectivity with all vertices at the origin.
  ChamberSet empty_chambers() const;
  bool same_connectivity(const Topology& other) const;
};

using ShapeVector = Eigen::VectorXd;

/// Flattens frame-major, then structure in kStructures order, then vertex,
/// then (x,y,z).
ShapeVector vectorize(const MeshSequence& seq);
/// Inverse of vectorize. Throws ValidationError on length mismatch.
MeshSequence devectorize(const ShapeVector& v, const Topology& topo);

/// Sorted unique undirected edges (i < j) of a face list.
std::vector<Edge> unique_edges(const std::vector<Face>& faces);

/// Count of edges used by exactly one face. Zero for a closed surface.
std::size_t boundary_edge_count(const std::vector<Face>& faces);

/// Compressed vertex adjacency (CSR). neighbors of i are
/// indices[offsets[i] .. offsets[i+1]).
struct Adjacency {
  std::vector<std::int32_t> offsets;
  std::vector<std::int32_t> indices;

  static Adjacency build(Eigen::Index num_vertices, const std::vector<Face>& faces);
  std::int32_t degree(Eigen::Index i) const { return offsets[i + 1] - offsets[i]; }
};

/// Area-weighted unit vertex normals. Throws Error naming the vertex if its
/// one-ring has zero total area.
Points vertex_normals(const TriMesh& mesh);
Points vertex_normals(const Points& vertices, const std::vector<Face>& faces);

/// Degree-normalised uniform Laplacian: (L v)_i = v_i − mean of neighbours.
Eigen::SparseMatrix<double> graph_laplacian(const TriMesh& mesh);

/// Rows of L applied to the coordinates, without building the sparse matrix.
Points apply_laplacian(const Points& vertices, const Adjacency& adjacency);

/// H_i = −½ (L v)_i · n_i.
Eigen::VectorXd mean_curvature(const TriMesh& mesh);
Eigen::VectorXd mean_curvature(const Points& vertices, const std::vector<Face>& faces, const Adjacency& adjacency);

/// Similarity transform x ↦ scale · rotation · x + translation.
struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Vec3 translation = Vec3::Zero();
  double scale = 1.0;

  Points apply(const Points& p) const;
};

ChamberSet transformed(const ChamberSet& chambers, const RigidTransform& xf);
MeshSequence transformed(const MeshSequence& seq, const RigidTransform& xf);

struct AlignResult {
  RigidTransform transform;
  ChamberSet aligned;
};

/// Least-squares Procrustes fit of source onto target over all vertices
/// pooled across structures, using index correspondence.
AlignResult rigid_align(const ChamberSet& source, const ChamberSet& target, bool allow_scale);

/// v'_i = v_i + offset · n_i. Self-intersections are not detected.
TriMesh inflate_along_normals(const TriMesh& mesh, double offset);

}  // namespace cardioshape
