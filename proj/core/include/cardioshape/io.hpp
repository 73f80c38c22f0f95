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

#include "cardioshape/ffd.hpp"
#include "cardioshape/mesh.hpp"
#include "cardioshape/motion_correct.hpp"
#include "cardioshape/ssm.hpp"
#include "cardioshape/volume.hpp"

#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace cardioshape::io {

namespace fs = std::filesystem;

/// ASCII OBJ with `v x y z` and 1-based `f a b c` records. Coordinates are
/// written with 17 significant digits so they read back bit-exactly.
void write_obj(const fs::path& path, const TriMesh& mesh);
TriMesh read_obj(const fs::path& path, Structure structure);

/// One OBJ per frame and structure plus manifest.json (structure order,
/// vertex counts, frame count, topology digest).
void write_sequence(const fs::path& dir, const MeshSequence& seq);
MeshSequence read_sequence(const fs::path& dir);

/// JSON header plus little-endian raw payload (frame-major, then z, y, x).
/// The payload file sits next to the header with the extension ".raw".
void write_volumes(const fs::path& header, std::span<const LabelVolume> frames);
void write_volumes(const fs::path& header, std::span<const IntensityVolume> frames);
std::vector<LabelVolume> read_label_volumes(const fs::path& header);
std::vector<IntensityVolume> read_intensity_volumes(const fs::path& header);

/// viewset.json indexing one volume file per plane (dims W×H×1, axes u, v,
/// normal) and, when present, one label volume per plane.
void write_viewset(const fs::path& dir, const ViewSet& views);
ViewSet read_viewset(const fs::path& dir);

/// {plane_id: [dx, dy]} in plane order.
void write_displacements(const fs::path& path, const ViewSet& views, const std::vector<Eigen::Vector2d>& d);
std::vector<std::pair<std::string, Eigen::Vector2d>> read_displacements(const fs::path& path);

/// HSSM container: magic, version, topology digest, T, |V|, M, mean,
/// explained variance, components (one component after another), then
/// sample count, total variance and the component limit.
void write_model(const fs::path& path, const ShapeModel& model);
ShapeModel read_model(const fs::path& path);

/// HFFD container holding one or more lattices: dims, origin, spacing, then
/// displacements row-major over (Gx, Gy, Gz, 3).
void write_grids(const fs::path& path, std::span<const ControlGrid> grids);
std::vector<ControlGrid> read_grids(const fs::path& path);

/// Shortest round-trip decimal form (%.17g).
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
void write_csv(const fs::path& path, const CsvTable& table);
CsvTable read_csv(const fs::path& path);

/// Numeric table whose first column holds row identifiers.
struct LabelledMatrix {
  std::vector<std::string> ids;
  std::vector<std::string> columns;
  Eigen::MatrixXd values;
};
void write_matrix_csv(const fs::path& path, const std::string& id_column, const LabelledMatrix& m);
LabelledMatrix read_matrix_csv(const fs::path& path);

}  // namespace cardioshape::io
