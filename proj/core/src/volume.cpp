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

#include "cardioshape/volume.hpp"

#include "cardioshape/error.hpp"

#include <algorithm>
#include <cmath>

namespace cardioshape {

double trilinear(const IntensityVolume& vol, const Vec3& world) {
  const Vec3 p = vol.to_voxel(world);
  std::array<int, 3> i0{};
  std::array<double, 3> f{};
  for (int a = 0; a < 3; ++a) {
    const double c = std::clamp(p[a], 0.0, static_cast<double>(vol.dims[a] - 1));
    i0[a] = std::min(static_cast<int>(std::floor(c)), std::max(0, vol.dims[a] - 2));
    f[a] = c - i0[a];
  }
  auto at = [&](int di, int dj, int dk) {
    const int i = std::min(i0[0] + di, vol.dims[0] - 1);
    const int j = std::min(i0[1] + dj, vol.dims[1] - 1);
    const int k = std::min(i0[2] + dk, vol.dims[2] - 1);
    return static_cast<double>(vol.at(i, j, k));
  };
  double out = 0.0;
  for (int dk = 0; dk < 2; ++dk) {
    for (int dj = 0; dj < 2; ++dj) {
      for (int di = 0; di < 2; ++di) {
        const double w = (di ? f[0] : 1.0 - f[0]) * (dj ? f[1] : 1.0 - f[1]) * (dk ? f[2] : 1.0 - f[2]);
        if (w != 0.0) out += w * at(di, dj, dk);
      }
    }
  }
  return out;
}

std::uint8_t nearest_label(const LabelVolume& vol, const Vec3& world) {
  const Vec3 p = vol.to_voxel(world);
  std::array<int, 3> idx{};
  for (int a = 0; a < 3; ++a) {
    idx[a] = std::clamp(static_cast<int>(std::lround(p[a])), 0, vol.dims[a] - 1);
  }
  return vol.at(idx[0], idx[1], idx[2]);
}

IntensityVolume box_blur(const IntensityVolume& vol, int half_width, int passes) {
  if (half_width < 0 || passes < 0) throw ValidationError("box_blur: negative width or pass count");
  IntensityVolume cur = vol;
  if (half_width == 0) return cur;
  std::vector<double> line;
  std::vector<double> prefix;
  for (int pass = 0; pass < passes; ++pass) {
    for (int axis = 0; axis < 3; ++axis) {
      const int n = cur.dims[axis];
      const int o1 = (axis + 1) % 3;
      const int o2 = (axis + 2) % 3;
      line.resize(static_cast<std::size_t>(n));
      prefix.resize(static_cast<std::size_t>(n) + 1);
      std::array<int, 3> ijk{};
      for (int b = 0; b < cur.dims[o2]; ++b) {
        for (int a = 0; a < cur.dims[o1]; ++a) {
          ijk[o1] = a;
          ijk[o2] = b;
          prefix[0] = 0.0;
          for (int x = 0; x < n; ++x) {
            ijk[axis] = x;
            prefix[x + 1] = prefix[x] + cur.at(ijk[0], ijk[1], ijk[2]);
          }
          for (int x = 0; x < n; ++x) {
            // Window clipped at the border and renormalised.
            const int lo = std::max(0, x - half_width);
            const int hi = std::min(n - 1, x + half_width);
            line[x] = (prefix[hi + 1] - prefix[lo]) / (hi - lo + 1);
          }
          for (int x = 0; x < n; ++x) {
            ijk[axis] = x;
            cur.at(ijk[0], ijk[1], ijk[2]) = static_cast<float>(line[x]);
          }
        }
      }
    }
  }
  return cur;
}

}  // namespace cardioshape
