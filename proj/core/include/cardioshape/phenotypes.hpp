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

#include <string>
#include <vector>

namespace cardioshape {

/// Myocardial tissue density used for LV mass (g/mL).
inline constexpr double kMyocardialDensity = 1.05;

/// Enclosed volume of a closed, consistently oriented mesh in mL. Throws
/// ValidationError if the mesh has boundary edges.
double mesh_volume(const TriMesh& mesh);

/// Per-frame volume (mL) of one structure.
std::vector<double> volume_curve(const MeshSequence& seq, Structure s);

struct WallThickness {
  Eigen::VectorXd per_vertex;
  double mean = 0.0;
  double max = 0.0;
};

/// Distance between corresponding LV-endo and LV-epi vertices (mm).
WallThickness wall_thickness(const TriMesh& endo, const TriMesh& epi);

/// Per frame, mean distance of each vertex from its frame-1 position (mm).
std::vector<double> displacement_curve(const MeshSequence& seq, Structure s);

struct PhenotypeTable {
  double lvm = 0.0;  // g
  double lvedv = 0.0, lvesv = 0.0, rvedv = 0.0, rvesv = 0.0;
  double lamaxv = 0.0, laminv = 0.0, ramaxv = 0.0, raminv = 0.0;
  double lvsv = 0.0, rvsv = 0.0, lasv = 0.0, rasv = 0.0;  // mL
  double lvef = 0.0, rvef = 0.0, laef = 0.0, raef = 0.0;  // %
  double lvwt_mean = 0.0, lvwt_max = 0.0;                 // mm
  /// 0-based frames of maximal and minimal LV-endo volume.
  std::size_t ed_frame = 0;
  std::size_t es_frame = 0;

  /// Column names with units, in the order of values().
  static std::vector<std::string> columns();
  std::vector<double> values() const;
};

/// ED/ES are the frames of maximal/minimal LV-endo volume. Ventricular EDV/ESV
/// and atrial MAXV/MINV are the extrema of each volume curve; EF = SV divided
/// by EDV (or MAXV). LVM and LVWT are measured at ED.
PhenotypeTable phenotype_table(const MeshSequence& seq);

}  // namespace cardioshape
