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

#include "cardioshape/phenotypes.hpp"

#include "cardioshape/error.hpp"

#include <algorithm>
#include <cmath>

namespace cardioshape {

double mesh_volume(const TriMesh& mesh) {
  if (mesh.faces.empty()) throw ValidationError("mesh_volume: mesh has no faces");
  if (boundary_edge_count(mesh.faces) != 0) {
    throw ValidationError("mesh_volume: " + std::string(structure_name(mesh.structure)) + " is not closed");
  }
  // Relative to the centroid to keep the tetrahedra small and the sum exact
  // under translation up to rounding.
  const Vec3 c = mesh.vertices.rowwise().mean();
  double six_v = 0.0;
  for (const auto& f : mesh.faces) {
    const Vec3 a = mesh.vertices.col(f[0]) - c;
    const Vec3 b = mesh.vertices.col(f[1]) - c;
    const Vec3 d = mesh.vertices.col(f[2]) - c;
    six_v += a.cross(b).dot(d);
  }
  return std::abs(six_v) / 6.0 * 1e-3;
}

std::vector<double> volume_curve(const MeshSequence& seq, Structure s) {
  std::vector<double> out;
  out.reserve(seq.num_frames());
  for (const auto& frame : seq.frames) out.push_back(mesh_volume(frame[s]));
  return out;
}

WallThickness wall_thickness(const TriMesh& endo, const TriMesh& epi) {
  if (endo.num_vertices() != epi.num_vertices()) {
    throw ValidationError("wall_thickness: LV-endo has " + std::to_string(endo.num_vertices()) +
                          " vertices, LV-epi has " + std::to_string(epi.num_vertices()));
  }
  if (endo.num_vertices() == 0) throw ValidationError("wall_thickness: empty meshes");
  WallThickness w;
  w.per_vertex = (epi.vertices - endo.vertices).colwise().norm().transpose();
  w.mean = w.per_vertex.mean();
  w.max = w.per_vertex.maxCoeff();
  return w;
}

std::vector<double> displacement_curve(const MeshSequence& seq, Structure s) {
  if (seq.frames.empty()) throw ValidationError("displacement_curve: empty sequence");
  const Points& ref = seq[0][s].vertices;
  std::vector<double> out;
  for (const auto& frame : seq.frames) {
    const Points& v = frame[s].vertices;
    if (v.cols() != ref.cols()) throw ValidationError("displacement_curve: vertex count changes between frames");
    out.push_back(v.cols() ? (v - ref).colwise().norm().mean() : 0.0);
  }
  return out;
}

std::vector<std::string> PhenotypeTable::columns() {
  return {"LVM_g",      "LVEDV_mL",   "LVESV_mL",   "RVEDV_mL", "RVESV_mL", "LAMAXV_mL", "LAMINV_mL",
          "RAMAXV_mL",  "RAMINV_mL",  "LVSV_mL",    "RVSV_mL",  "LASV_mL",  "RASV_mL",   "LVEF_pct",
          "RVEF_pct",   "LAEF_pct",   "RAEF_pct",   "LVWT_mean_mm", "LVWT_max_mm"};
}

std::vector<double> PhenotypeTable::values() const {
  return {lvm,  lvedv, lvesv, rvedv, rvesv, lamaxv, laminv, ramaxv,    raminv,   lvsv,
          rvsv, lasv,  rasv,  lvef,  rvef,  laef,   raef,   lvwt_mean, lvwt_max};
}

PhenotypeTable phenotype_table(const MeshSequence& seq) {
  seq.validate();
  PhenotypeTable p;
  const auto lv = volume_curve(seq, Structure::LvEndo);
  p.ed_frame = static_cast<std::size_t>(std::max_element(lv.begin(), lv.end()) - lv.begin());
  p.es_frame = static_cast<std::size_t>(std::min_element(lv.begin(), lv.end()) - lv.begin());
  auto extrema = [&](Structure s, double& hi, double& lo, double& sv, double& ef) {
    const auto curve = s == Structure::LvEndo ? lv : volume_curve(seq, s);
    hi = *std::max_element(curve.begin(), curve.end());
    lo = *std::min_element(curve.begin(), curve.end());
    sv = hi - lo;
    ef = hi > 0.0 ? 100.0 * sv / hi : 0.0;
  };
  extrema(Structure::LvEndo, p.lvedv, p.lvesv, p.lvsv, p.lvef);
  extrema(Structure::Rv, p.rvedv, p.rvesv, p.rvsv, p.rvef);
  extrema(Structure::La, p.lamaxv, p.laminv, p.lasv, p.laef);
  extrema(Structure::Ra, p.ramaxv, p.raminv, p.rasv, p.raef);
  const ChamberSet& ed = seq[p.ed_frame];
  p.lvm = (mesh_volume(ed[Structure::LvEpi]) - mesh_volume(ed[Structure::LvEndo])) * kMyocardialDensity;
  const auto wt = wall_thickness(ed[Structure::LvEndo], ed[Structure::LvEpi]);
  p.lvwt_mean = wt.mean;
  p.lvwt_max = wt.max;
  return p;
}

}  // namespace cardioshape
