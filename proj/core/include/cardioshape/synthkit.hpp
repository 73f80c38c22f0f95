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
#include "cardioshape/motion_correct.hpp"
#include "cardioshape/objectives.hpp"
#include "cardioshape/volume.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace cardioshape {

struct SynthConfig {
  std::uint64_t seed = 0;
  /// Vertices per structure; LV-endo and LV-epi must match.
  std::array<int, kNumStructures> vertex_budget{614, 614, 570, 431, 475};
  int n_modes = 6;
  /// RMS vertex displacement (mm) of the leading shape mode at one SD.
  double mode_amplitude = 4.0;
  /// SD ratio between consecutive shape modes.
  double mode_decay = 0.8;
  /// Multiplier on the default per-structure contraction amplitudes.
  double motion_amplitude = 1.0;
  /// Relative per-subject SD of the contraction amplitudes.
  double motion_jitter = 0.1;
  int frames = 10;
  double voxel_size = 2.0;
  std::array<int, 3> volume_dims{96, 96, 128};
  double wall_thickness = 8.0;
  double displacement_sigma = 2.0;

  /// 6141/6141/5696/4305/4751 vertices, 27,034 in total.
  static std::array<int, kNumStructures> full_vertex_budget();
  void validate() const;
};

struct Ellipsoid {
  Vec3 center;
  Vec3 radii;
};

/// Rest geometry of the blood-pool structures (LV-epi is derived by inflation).
std::array<Ellipsoid, kNumStructures> default_chamber_layout();

struct Template {
  ChamberSet chambers;
  TemplateCurvatures curvatures;

  Topology topology(std::size_t frames = 1) const { return Topology::of(chambers, frames); }
};

/// Five closed ellipsoidal surfaces in anatomical arrangement, LV-epi built by
/// inflating LV-endo along its normals.
Template make_template(const SynthConfig& cfg);

/// Per-structure contraction amplitude a and phase φ of
/// s(t) = 1 − a·sin²(π(t−1)/(T−1) + φ).
std::array<double, kNumStructures> default_contraction();
std::array<double, kNumStructures> contraction_phase();

/// Radial scale factor of a structure at 0-based frame t.
double contraction_scale(double amplitude, double phase, int t, int frames);

struct SubjectTruth {
  /// Standard-normal weight per shape mode.
  Eigen::VectorXd mode_weights;
  std::array<double, kNumStructures> contraction{};
  /// Motion centre of each structure (LV-epi shares the LV-endo centre).
  std::array<Vec3, kNumStructures> motion_center{};

  /// s(t) for one structure.
  double scale(Structure s, int t, int frames) const;
};

struct Attributes {
  double age = 0.0;
  int sex = 0;
  int group = 0;
  double bmi = 0.0;
};

struct SynthSubject {
  int id = 0;
  /// Rest shape (template plus mode displacements).
  ChamberSet shape;
  MeshSequence sequence;
  SubjectTruth truth;
  Attributes attributes;
};

/// Smooth displacement fields along the template normals, one per mode,
/// each 3×|V| pooled over structures with unit RMS over the vertices it moves.
std::vector<Points> make_modes(const SynthConfig& cfg, const Template& tmpl);

/// Subject `id` of the population; depends only on (cfg, id).
SynthSubject synth_subject(const SynthConfig& cfg, const Template& tmpl, const std::vector<Points>& modes, int id);

struct Population {
  Template tmpl;
  std::vector<Points> modes;
  std::vector<SynthSubject> subjects;
};

/// Age is driven by mode 0, sex by mode 1, group (terciles) by mode 2 and
/// BMI by mode 3, each with additive noise.
Population synth_population(const SynthConfig& cfg, int n_subjects);

/// Label volume whose voxel (i,j,k) is centred at (i+½, j+½, k+½)·voxel_size.
/// Containment is decided by ray parity along +x. LV-endo takes precedence
/// over LV-epi (the myocardium), then RV, LA, RA. Throws ValidationError if a
/// mesh leaves the volume.
LabelVolume voxelize(const ChamberSet& chambers, double voxel_size, std::array<int, 3> dims);

/// Smooth synthetic image: label-dependent intensity plus a weak linear ramp,
/// blurred with three box passes.
IntensityVolume synth_intensity(const LabelVolume& labels);

struct PlaneSpec {
  std::string id;
  Vec3 origin;
  Vec3 axis_u;
  Vec3 axis_v;
  double du = 2.5;
  double dv = 2.5;
  int width = 64;
  int height = 64;
};

struct ViewSpecs {
  std::vector<PlaneSpec> sax;
  PlaneSpec la_2ch;
  PlaneSpec la_4ch;

  /// 8 short-axis slices 10 mm apart plus 2ch and 4ch planes through the LV,
  /// all 64×64 at 2.5 mm, laid out for the default volume.
  static ViewSpecs standard();
  std::vector<PlaneSpec> all() const;
};

struct SlicedViews {
  ViewSet views;
  /// Displacement that realigns each plane, in ViewSet::plane order.
  std::vector<Eigen::Vector2d> truth;
};

/// Resamples every frame onto each plane (trilinear intensity, nearest label)
/// after misaligning the plane by a N(0, σ²) in-plane shift per axis. The
/// stored displacement of every plane is zero; `truth` holds the correction.
SlicedViews slice_views(std::span<const IntensityVolume> intensity, std::span<const LabelVolume> labels,
                        const ViewSpecs& specs, double sigma, std::uint64_t seed);

/// Label and intensity volumes of every frame of a sequence.
struct FrameVolumes {
  std::vector<LabelVolume> labels;
  std::vector<IntensityVolume> intensity;
};
FrameVolumes render_sequence(const MeshSequence& seq, const SynthConfig& cfg);

}  // namespace cardioshape
