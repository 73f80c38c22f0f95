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

#include "cardioshape/synthkit.hpp"

#include "cardioshape/error.hpp"
#include "cardioshape/parallel.hpp"
#include "cardioshape/primitives.hpp"
#include "cardioshape/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace cardioshape {

namespace {

constexpr std::uint64_t kModeStream = 0x4d4f4445;     // per-mode coefficients
constexpr std::uint64_t kSubjectStream = 0x5355424a;  // per-subject draws
constexpr std::uint64_t kSliceStream = 0x534c4943;    // view misalignment

/// Structure whose geometry drives each mode group: LV (endo+epi), RV, LA, RA.
constexpr std::array<Structure, 4> kModeGroups{Structure::LvEndo, Structure::Rv, Structure::La, Structure::Ra};

TriMesh ellipsoid_mesh(const Ellipsoid& e, int n, Structure s) {
  const Points unit = fibonacci_sphere(n);
  TriMesh mesh;
  mesh.structure = s;
  mesh.faces = convex_hull(unit);
  mesh.vertices = (e.radii.asDiagonal() * unit).colwise() + e.center;
  return mesh;
}

/// Real spherical-harmonic-like basis up to degree 2 at a unit direction.
std::array<double, 9> low_order_basis(const Vec3& d) {
  return {1.0, d.x(), d.y(), d.z(), d.x() * d.y(), d.y() * d.z(), d.x() * d.z(), d.x() * d.x() - d.y() * d.y(),
          3.0 * d.z() * d.z() - 1.0};
}

}  // namespace

std::array<int, kNumStructures> SynthConfig::full_vertex_budget() { return {6141, 6141, 5696, 4305, 4751}; }

void SynthConfig::validate() const {
  for (int b : vertex_budget) {
    if (b < 12) throw ValidationError("SynthConfig: vertex budget below 12");
  }
  if (vertex_budget[0] != vertex_budget[1]) throw ValidationError("SynthConfig: LV-endo and LV-epi budgets differ");
  if (n_modes < 0) throw ValidationError("SynthConfig: n_modes must be non-negative");
  if (!(mode_amplitude >= 0.0) || !(mode_decay > 0.0)) throw ValidationError("SynthConfig: invalid mode amplitude");
  if (!(motion_amplitude >= 0.0) || !(motion_jitter >= 0.0)) throw ValidationError("SynthConfig: invalid motion");
  if (frames < 1) throw ValidationError("SynthConfig: frames must be >= 1");
  if (!(voxel_size > 0.0)) throw ValidationError("SynthConfig: voxel size must be positive");
  for (int d : volume_dims) {
    if (d < 1) throw ValidationError("SynthConfig: volume dims must be positive");
  }
  if (!(wall_thickness >= 0.0)) throw ValidationError("SynthConfig: wall thickness must be non-negative");
  if (!(displacement_sigma >= 0.0)) throw ValidationError("SynthConfig: displacement sigma must be non-negative");
}

std::array<Ellipsoid, kNumStructures> default_chamber_layout() {
  return {{
      {{110, 96, 100}, {22, 22, 38}},  // LV-endo
      {{110, 96, 100}, {30, 30, 46}},  // LV-epi (approximate; built by inflation)
      {{55, 96, 100}, {18, 26, 36}},   // RV
      {{110, 96, 168}, {20, 20, 16}},  // LA
      {{58, 96, 166}, {18, 20, 16}},   // RA
  }};
}

Template make_template(const SynthConfig& cfg) {
  cfg.validate();
  const auto layout = default_chamber_layout();
  Template t;
  for (Structure s : kStructures) {
    if (s == Structure::LvEpi) continue;
    const auto i = static_cast<std::size_t>(s);
    t.chambers[s] = ellipsoid_mesh(layout[i], cfg.vertex_budget[i], s);
  }
  t.chambers[Structure::LvEpi] = inflate_along_normals(t.chambers[Structure::LvEndo], cfg.wall_thickness);
  t.chambers[Structure::LvEpi].structure = Structure::LvEpi;
  t.chambers.validate();
  for (Structure s : kStructures) {
    const auto i = static_cast<std::size_t>(s);
    if (boundary_edge_count(t.chambers[i].faces) != 0) throw Error("make_template: open surface");
    t.curvatures[i] = mean_curvature(t.chambers[i]);
  }
  return t;
}

std::array<double, kNumStructures> default_contraction() { return {0.22, 0.08, 0.18, 0.15, 0.13}; }

std::array<double, kNumStructures> contraction_phase() {
  const double h = std::numbers::pi / 2.0;
  return {0.0, 0.0, 0.0, h, h};
}

double contraction_scale(double amplitude, double phase, int t, int frames) {
  const double x = frames > 1 ? std::numbers::pi * t / (frames - 1) : 0.0;
  const double s = std::sin(x + phase);
  return 1.0 - amplitude * s * s;
}

double SubjectTruth::scale(Structure s, int t, int frames) const {
  const auto i = static_cast<std::size_t>(s);
  return contraction_scale(contraction[i], contraction_phase()[i], t, frames);
}

std::vector<Points> make_modes(const SynthConfig& cfg, const Template& tmpl) {
  const auto layout = default_chamber_layout();
  const Topology topo = tmpl.topology();
  std::vector<Points> modes;
  for (int k = 0; k < cfg.n_modes; ++k) {
    Rng rng(cfg.seed, kModeStream + static_cast<std::uint64_t>(k));
    std::array<double, 9> coef{};
    for (auto& c : coef) c = rng.normal();
    const Structure base = kModeGroups[static_cast<std::size_t>(k) % kModeGroups.size()];
    const auto bi = static_cast<std::size_t>(base);
    const TriMesh& mesh = tmpl.chambers[base];
    const Points normals = vertex_normals(mesh);
    Points field(3, mesh.num_vertices());
    for (Eigen::Index v = 0; v < mesh.num_vertices(); ++v) {
      const Vec3 dir = (mesh.vertices.col(v) - layout[bi].center).cwiseQuotient(layout[bi].radii).normalized();
      const auto basis = low_order_basis(dir);
      double f = 0.0;
      for (std::size_t b = 0; b < basis.size(); ++b) f += coef[b] * basis[b];
      field.col(v) = f * normals.col(v);
    }
    const double rms = std::sqrt(field.colwise().squaredNorm().mean());
    if (rms > 0.0) field /= rms;
    Points mode = Points::Zero(3, topo.total_vertices());
    mode.middleCols(topo.vertex_offset(base), mesh.num_vertices()) = field;
    if (base == Structure::LvEndo) {
      mode.middleCols(topo.vertex_offset(Structure::LvEpi), mesh.num_vertices()) = field;
    }
    modes.push_back(std::move(mode));
  }
  return modes;
}

SynthSubject synth_subject(const SynthConfig& cfg, const Template& tmpl, const std::vector<Points>& modes, int id) {
  Rng rng(cfg.seed, kSubjectStream + static_cast<std::uint64_t>(id));
  SynthSubject subj;
  subj.id = id;
  const int n_modes = static_cast<int>(modes.size());
  subj.truth.mode_weights.resize(n_modes);
  for (int k = 0; k < n_modes; ++k) subj.truth.mode_weights[k] = rng.normal();
  const auto base = default_contraction();
  for (std::size_t s = 0; s < kNumStructures; ++s) {
    const double a = base[s] * cfg.motion_amplitude * (1.0 + cfg.motion_jitter * rng.normal());
    subj.truth.contraction[s] = std::clamp(a, 0.0, 0.9);
  }
  auto weight = [&](int k) { return k < n_modes ? subj.truth.mode_weights[k] : 0.0; };
  subj.attributes.age = 55.0 + 8.0 * (0.8 * weight(0) + 0.6 * rng.normal());
  subj.attributes.sex = weight(1) + 0.5 * rng.normal() > 0.0 ? 1 : 0;
  const double g = weight(2) + 0.5 * rng.normal();
  const double cut = 0.4307 * std::sqrt(1.25);  // terciles of N(0, 1.25)
  subj.attributes.group = g < -cut ? 0 : (g < cut ? 1 : 2);
  subj.attributes.bmi = 26.0 + 3.0 * (0.7 * weight(3) + 0.7 * rng.normal());

  const Topology topo = tmpl.topology();
  Points offset = Points::Zero(3, topo.total_vertices());
  double sd = 1.0;
  for (int k = 0; k < n_modes; ++k) {
    offset += (cfg.mode_amplitude * sd * subj.truth.mode_weights[k]) * modes[static_cast<std::size_t>(k)];
    sd *= cfg.mode_decay;
  }
  subj.shape = tmpl.chambers;
  for (Structure s : kStructures) {
    auto& m = subj.shape[s];
    m.vertices += offset.middleCols(topo.vertex_offset(s), m.num_vertices());
  }
  for (Structure s : kStructures) {
    const Structure centre_of = s == Structure::LvEpi ? Structure::LvEndo : s;
    subj.truth.motion_center[static_cast<std::size_t>(s)] = subj.shape[centre_of].vertices.rowwise().mean();
  }
  subj.sequence.frames.resize(static_cast<std::size_t>(cfg.frames));
  for (int t = 0; t < cfg.frames; ++t) {
    ChamberSet frame = subj.shape;
    for (Structure s : kStructures) {
      const Vec3 c = subj.truth.motion_center[static_cast<std::size_t>(s)];
      const double k = subj.truth.scale(s, t, cfg.frames);
      frame[s].vertices = ((frame[s].vertices.colwise() - c) * k).colwise() + c;
    }
    subj.sequence.frames[static_cast<std::size_t>(t)] = std::move(frame);
  }
  return subj;
}

Population synth_population(const SynthConfig& cfg, int n_subjects) {
  if (n_subjects < 1) throw ValidationError("synth_population: need at least one subject");
  Population pop;
  pop.tmpl = make_template(cfg);
  pop.modes = make_modes(cfg, pop.tmpl);
  pop.subjects.resize(static_cast<std::size_t>(n_subjects));
  parallel_for(pop.subjects.size(), [&](std::size_t i) {
    pop.subjects[i] = synth_subject(cfg, pop.tmpl, pop.modes, static_cast<int>(i));
  });
  return pop;
}

namespace {

/// Voxels whose centre lies inside a closed mesh, by ray parity along +x.
std::vector<std::uint8_t> inside_mask(const TriMesh& mesh, const LabelVolume& grid) {
  const int nx = grid.dims[0];
  const int ny = grid.dims[1];
  const int nz = grid.dims[2];
  const double vs = grid.spacing[0];
  const Vec3& o = grid.origin;
  std::vector<std::vector<std::int32_t>> rows(static_cast<std::size_t>(ny) * nz);
  const double margin = 1e-3 * vs;
  for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
    double y0 = 1e300, y1 = -1e300, z0 = 1e300, z1 = -1e300;
    for (int c = 0; c < 3; ++c) {
      const Vec3 p = mesh.vertices.col(mesh.faces[f][c]);
      y0 = std::min(y0, p.y());
      y1 = std::max(y1, p.y());
      z0 = std::min(z0, p.z());
      z1 = std::max(z1, p.z());
    }
    const int j0 = std::max(0, static_cast<int>(std::ceil((y0 - margin - o.y()) / vs)));
    const int j1 = std::min(ny - 1, static_cast<int>(std::floor((y1 + margin - o.y()) / vs)));
    const int k0 = std::max(0, static_cast<int>(std::ceil((z0 - margin - o.z()) / vs)));
    const int k1 = std::min(nz - 1, static_cast<int>(std::floor((z1 + margin - o.z()) / vs)));
    for (int k = k0; k <= k1; ++k) {
      for (int j = j0; j <= j1; ++j) rows[static_cast<std::size_t>(k) * ny + j].push_back(static_cast<std::int32_t>(f));
    }
  }

  std::vector<std::uint8_t> mask(grid.voxel_count(), 0);
  std::vector<double> hits;
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      const auto& bucket = rows[static_cast<std::size_t>(k) * ny + j];
      if (bucket.empty()) continue;
      bool ok = false;
      for (int attempt = 0; attempt < 16 && !ok; ++attempt) {
        // Deterministic sub-voxel jitter when the ray grazes an edge or vertex.
        const double y = o.y() + j * vs + attempt * 1e-6 * vs * 0.6180339887;
        const double z = o.z() + k * vs + attempt * 1e-6 * vs * 0.4142135624;
        hits.clear();
        ok = true;
        for (std::int32_t f : bucket) {
          const Vec3 a = mesh.vertices.col(mesh.faces[f][0]);
          const Vec3 b = mesh.vertices.col(mesh.faces[f][1]);
          const Vec3 c = mesh.vertices.col(mesh.faces[f][2]);
          const double area = (b.y() - a.y()) * (c.z() - a.z()) - (b.z() - a.z()) * (c.y() - a.y());
          if (std::abs(area) < 1e-14 * vs * vs) continue;  // edge-on; neighbours carry the crossing
          const double w0 = ((b.y() - y) * (c.z() - z) - (b.z() - z) * (c.y() - y)) / area;
          const double w1 = ((c.y() - y) * (a.z() - z) - (c.z() - z) * (a.y() - y)) / area;
          const double w2 = 1.0 - w0 - w1;
          const double lo = std::min({w0, w1, w2});
          if (lo < -1e-10) continue;
          if (lo <= 1e-10) {
            ok = false;
            break;
          }
          hits.push_back(w0 * a.x() + w1 * b.x() + w2 * c.x());
        }
        if (ok && hits.size() % 2 != 0) ok = false;
      }
      if (!ok) throw Error("voxelize: could not resolve a degenerate ray in row (" + std::to_string(j) + ", " +
                           std::to_string(k) + ")");
      std::sort(hits.begin(), hits.end());
      for (std::size_t h = 0; h + 1 < hits.size(); h += 2) {
        const int i0 = std::max(0, static_cast<int>(std::ceil((hits[h] - o.x()) / vs)));
        const int i1 = std::min(nx - 1, static_cast<int>(std::floor((hits[h + 1] - o.x()) / vs)));
        for (int i = i0; i <= i1; ++i) mask[grid.index(i, j, k)] = 1;
      }
    }
  }
  return mask;
}

}  // namespace

LabelVolume voxelize(const ChamberSet& chambers, double voxel_size, std::array<int, 3> dims) {
  if (!(voxel_size > 0.0)) throw ValidationError("voxelize: voxel size must be positive");
  LabelVolume vol = LabelVolume::zeros(dims, Vec3::Constant(voxel_size), Vec3::Constant(0.5 * voxel_size));
  const Vec3 box(dims[0] * voxel_size, dims[1] * voxel_size, dims[2] * voxel_size);
  for (const auto& mesh : chambers.meshes) {
    if (mesh.num_vertices() == 0) continue;
    const Vec3 lo = mesh.vertices.rowwise().minCoeff();
    const Vec3 hi = mesh.vertices.rowwise().maxCoeff();
    if ((lo.array() < 0.0).any() || (hi.array() > box.array()).any()) {
      throw ValidationError("voxelize: " + std::string(structure_name(mesh.structure)) +
                            " extends outside the volume");
    }
  }
  // Lowest precedence first so later structures overwrite.
  const std::array<std::pair<Structure, Label>, kNumStructures> order{{{Structure::Ra, kRaBlood},
                                                                       {Structure::La, kLaBlood},
                                                                       {Structure::Rv, kRvBlood},
                                                                       {Structure::LvEpi, kLvMyocardium},
                                                                       {Structure::LvEndo, kLvBlood}}};
  for (auto [s, label] : order) {
    if (chambers[s].num_vertices() == 0) continue;
    const auto mask = inside_mask(chambers[s], vol);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) vol.data[i] = label;
    }
  }
  return vol;
}

IntensityVolume synth_intensity(const LabelVolume& labels) {
  static constexpr std::array<float, 6> kLevel{0.10f, 1.00f, 0.35f, 0.90f, 0.80f, 0.70f};
  IntensityVolume img;
  img.dims = labels.dims;
  img.spacing = labels.spacing;
  img.origin = labels.origin;
  img.axes = labels.axes;
  img.data.resize(labels.voxel_count());
  const auto [nx, ny, nz] = labels.dims;
  for (int k = 0; k < nz; ++k) {
    for (int j = 0; j < ny; ++j) {
      for (int i = 0; i < nx; ++i) {
        const std::uint8_t l = labels.at(i, j, k);
        const double ramp = 0.15 * i / nx + 0.10 * j / ny + 0.05 * k / nz;
        img.at(i, j, k) = static_cast<float>((l < kLevel.size() ? kLevel[l] : 0.0f) + ramp);
      }
    }
  }
  return box_blur(img, 1, 3);
}

ViewSpecs ViewSpecs::standard() {
  ViewSpecs v;
  for (int d = 0; d < 8; ++d) {
    const double z = 70.0 + 10.0 * d;
    v.sax.push_back({"sax_" + std::to_string(d), {10.0, 16.0, z}, Vec3::UnitX(), Vec3::UnitY()});
  }
  v.la_2ch = {"la_2ch", {100.0, 16.0, 40.0}, Vec3::UnitY(), Vec3::UnitZ()};
  v.la_4ch = {"la_4ch", {10.0, 86.0, 40.0}, Vec3::UnitX(), Vec3::UnitZ()};
  return v;
}

std::vector<PlaneSpec> ViewSpecs::all() const {
  std::vector<PlaneSpec> out = sax;
  out.push_back(la_2ch);
  out.push_back(la_4ch);
  return out;
}

SlicedViews slice_views(std::span<const IntensityVolume> intensity, std::span<const LabelVolume> labels,
                        const ViewSpecs& specs, double sigma, std::uint64_t seed) {
  if (intensity.empty()) throw ValidationError("slice_views: no frames");
  if (!labels.empty() && labels.size() != intensity.size()) {
    throw ValidationError("slice_views: label and intensity frame counts differ");
  }
  if (!(sigma >= 0.0)) throw ValidationError("slice_views: sigma must be non-negative");
  const auto& ref = intensity.front();
  for (const auto& v : intensity) {
    if (!same_geometry(v, ref)) throw ValidationError("slice_views: frames differ in geometry");
  }
  for (const auto& v : labels) {
    if (!same_geometry(v, ref)) throw ValidationError("slice_views: labels and intensity differ in geometry");
  }
  const Vec3 lo = ref.voxel_center(0, 0, 0);
  const Vec3 hi = ref.voxel_center(ref.dims[0] - 1, ref.dims[1] - 1, ref.dims[2] - 1);

  Rng rng(seed, kSliceStream);
  const int frames = static_cast<int>(intensity.size());
  auto make_plane = [&](const PlaneSpec& spec, Eigen::Vector2d& truth) {
    SlicePlane p;
    p.id = spec.id;
    p.origin = spec.origin;
    p.axis_u = spec.axis_u;
    p.axis_v = spec.axis_v;
    p.du = spec.du;
    p.dv = spec.dv;
    p.width = spec.width;
    p.height = spec.height;
    p.frames = frames;
    for (int cu = 0; cu < 2; ++cu) {
      for (int cv = 0; cv < 2; ++cv) {
        const Vec3 corner = p.point_at(cu * p.extent_u(), cv * p.extent_v());
        if ((corner.array() < lo.array() - 1e-9).any() || (corner.array() > hi.array() + 1e-9).any()) {
          throw ValidationError("slice_views: plane " + spec.id + " leaves the volume");
        }
      }
    }
    truth = Eigen::Vector2d(sigma * rng.normal(), sigma * rng.normal());
    const std::size_t n = static_cast<std::size_t>(frames) * p.width * p.height;
    p.image.resize(n);
    if (!labels.empty()) p.labels.resize(n);
    for (int t = 0; t < frames; ++t) {
      for (int r = 0; r < p.height; ++r) {
        for (int c = 0; c < p.width; ++c) {
          const Vec3 q = p.point_at(c * p.du - truth.x(), r * p.dv - truth.y());
          const std::size_t idx = p.pixel_index(t, r, c);
          p.image[idx] = static_cast<float>(trilinear(intensity[static_cast<std::size_t>(t)], q));
          if (!labels.empty()) p.labels[idx] = nearest_label(labels[static_cast<std::size_t>(t)], q);
        }
      }
    }
    return p;
  };

  SlicedViews out;
  out.truth.resize(specs.sax.size() + 2);
  for (std::size_t d = 0; d < specs.sax.size(); ++d) out.views.sax.push_back(make_plane(specs.sax[d], out.truth[d]));
  out.views.la_2ch = make_plane(specs.la_2ch, out.truth[specs.sax.size()]);
  out.views.la_4ch = make_plane(specs.la_4ch, out.truth[specs.sax.size() + 1]);
  out.views.validate();
  return out;
}

FrameVolumes render_sequence(const MeshSequence& seq, const SynthConfig& cfg) {
  FrameVolumes out;
  out.labels.resize(seq.num_frames());
  out.intensity.resize(seq.num_frames());
  parallel_for(seq.num_frames(), [&](std::size_t t) {
    out.labels[t] = voxelize(seq[t], cfg.voxel_size, cfg.volume_dims);
    out.intensity[t] = synth_intensity(out.labels[t]);
  });
  return out;
}

}  // namespace cardioshape
