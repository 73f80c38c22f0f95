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
#include "cardioshape/primitives.hpp"
#include "cardioshape/rng.hpp"

#include <Eigen/Geometry>

#include <functional>

namespace cardioshape::testing {

/// Five small icospheres, one per structure, at distinct centres.
inline ChamberSet small_chambers(int subdivisions = 1, double radius = 10.0) {
  ChamberSet cs;
  for (std::size_t s = 0; s < kNumStructures; ++s) {
    cs[s] = icosphere(subdivisions, radius * (1.0 + 0.1 * static_cast<double>(s)),
                      Vec3(40.0 * static_cast<double>(s), 5.0 * static_cast<double>(s), 0.0));
    cs[s].structure = kStructures[s];
  }
  return cs;
}

inline Points random_points(Rng& rng, Eigen::Index n, double scale = 1.0) {
  Points p(3, n);
  for (Eigen::Index i = 0; i < n; ++i) p.col(i) = scale * Vec3(rng.normal(), rng.normal(), rng.normal());
  return p;
}

/// Sequence of `frames` copies of `cs`, each vertex jittered by N(0, jitter²).
inline MeshSequence jittered_sequence(const ChamberSet& cs, std::size_t frames, double jitter, Rng& rng) {
  MeshSequence seq;
  for (std::size_t t = 0; t < frames; ++t) {
    ChamberSet f = cs;
    for (auto& m : f.meshes) m.vertices += random_points(rng, m.vertices.cols(), jitter);
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

inline Eigen::Matrix3d random_rotation(Rng& rng) {
  Eigen::Quaterniond q(rng.normal(), rng.normal(), rng.normal(), rng.normal());
  return q.normalized().toRotationMatrix();
}

/// Relative error ‖a − b‖ / max(‖b‖, floor).
inline double relative_error(const Eigen::VectorXd& a, const Eigen::VectorXd& b, double floor = 1e-12) {
  return (a - b).norm() / std::max(b.norm(), floor);
}

/// Central differences of f over every coordinate of x.
inline Eigen::VectorXd central_difference(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x,
                                          double h) {
  Eigen::VectorXd g(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double x0 = x[i];
    x[i] = x0 + h;
    const double fp = f(x);
    x[i] = x0 - h;
    const double fm = f(x);
    x[i] = x0;
    g[i] = (fp - fm) / (2.0 * h);
  }
  return g;
}

/// Flat view of every vertex coordinate of a sequence in vectorize order.
inline void set_coordinates(MeshSequence& seq, const Eigen::VectorXd& v) {
  Eigen::Index k = 0;
  for (auto& f : seq.frames) {
    for (auto& m : f.meshes) {
      for (Eigen::Index i = 0; i < m.vertices.size(); ++i) m.vertices.data()[i] = v[k++];
    }
  }
}

}  // namespace cardioshape::testing
