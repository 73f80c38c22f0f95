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

#include "cardioshape/objectives.hpp"

#include "cardioshape/error.hpp"
#include "cardioshape/nearest.hpp"
#include "cardioshape/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace cardioshape {

namespace {

std::string where(std::size_t t, std::size_t c) {
  return "frame " + std::to_string(t) + ", " + std::string(structure_name(kStructures[c]));
}

void require_frames(const MeshSequence& seq, const char* what) {
  if (seq.frames.empty()) throw ValidationError(std::string(what) + ": empty sequence");
}

/// Runs a per-frame term in parallel and reduces values in frame order.
template <class Fn>
LossResult per_frame(const MeshSequence& seq, Fn&& fn) {
  LossResult out;
  out.gradient = zero_gradient(seq);
  std::vector<double> values(seq.num_frames(), 0.0);
  parallel_for(seq.num_frames(), [&](std::size_t t) { values[t] = fn(t, out.gradient[t]); });
  for (double v : values) out.value += v;
  return out;
}

/// (1 − r) between a curvature field and the template's, with gradient
/// accumulated into grad (scaled by `scale`).
double curvature_term(const Points& v, const std::vector<Face>& faces, const Adjacency& adj,
                      const Eigen::VectorXd& h0, double scale, Points& grad, const std::string& ctx) {
  const auto n = v.cols();
  if (h0.size() != n) throw ValidationError("curvature_loss: template curvature length mismatch at " + ctx);
  Points area_normal = Points::Zero(3, n);
  for (const auto& f : faces) {
    const Vec3 c = (v.col(f[1]) - v.col(f[0])).cross(v.col(f[2]) - v.col(f[0]));
    for (auto i : f) area_normal.col(i) += c;
  }
  Eigen::VectorXd len(n);
  Points normals(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    len[i] = area_normal.col(i).norm();
    if (!(len[i] > 0.0)) throw Error("vertex " + std::to_string(i) + " has a zero-area one-ring at " + ctx);
    normals.col(i) = area_normal.col(i) / len[i];
  }
  const Points lap = apply_laplacian(v, adj);
  const Eigen::VectorXd h = -0.5 * (lap.array() * normals.array()).colwise().sum().transpose();

  const Eigen::VectorXd a = h.array() - h.mean();
  const Eigen::VectorXd b = h0.array() - h0.mean();
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw Error("curvature_loss: zero-variance curvature field at " + ctx);
  const double r = a.dot(b) / (na * nb);
  // d(1 − r)/dH; centring drops out because a and b both sum to zero.
  const Eigen::VectorXd g_h = -scale * (b / (na * nb) - r * a / (na * na));

  Points g_n(3, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double gi = g_h[i];
    const Vec3 ni = normals.col(i);
    const Vec3 li = lap.col(i);
    // Through the Laplacian.
    grad.col(i) += -0.5 * gi * ni;
    const auto deg = adj.degree(i);
    for (auto k = adj.offsets[i]; k < adj.offsets[i + 1]; ++k) grad.col(adj.indices[k]) += (0.5 * gi / deg) * ni;
    // Through the normal: ∂n/∂N = (I − n nᵀ)/|N|.
    g_n.col(i) = -0.5 * gi * (li - ni.dot(li) * ni) / len[i];
  }
  for (const auto& f : faces) {
    const Vec3 g = g_n.col(f[0]) + g_n.col(f[1]) + g_n.col(f[2]);
    const Vec3 x0 = v.col(f[0]);
    const Vec3 x1 = v.col(f[1]);
    const Vec3 x2 = v.col(f[2]);
    grad.col(f[0]) += (x1 - x2).cross(g);
    grad.col(f[1]) += (x2 - x0).cross(g);
    grad.col(f[2]) += (x0 - x1).cross(g);
  }
  return 1.0 - r;
}

}  // namespace

void LossWeights::validate() const {
  for (double w : {edge, curv, temp, cycle}) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ValidationError("loss weights must be finite and non-negative");
  }
}

SequenceGradient zero_gradient(const MeshSequence& seq) {
  SequenceGradient g(seq.num_frames());
  for (std::size_t t = 0; t < seq.num_frames(); ++t) {
    for (std::size_t c = 0; c < kNumStructures; ++c) g[t][c] = Points::Zero(3, seq[t][c].num_vertices());
  }
  return g;
}

void accumulate(SequenceGradient& into, const SequenceGradient& g, double weight) {
  if (into.size() != g.size()) throw ValidationError("accumulate: frame count mismatch");
  for (std::size_t t = 0; t < g.size(); ++t) {
    for (std::size_t c = 0; c < kNumStructures; ++c) into[t][c] += weight * g[t][c];
  }
}

LossResult recon_loss(const MeshSequence& seq, const TargetClouds& targets) {
  require_frames(seq, "recon_loss");
  if (targets.size() != seq.num_frames()) {
    throw ValidationError("recon_loss: " + std::to_string(targets.size()) + " target frames for " +
                          std::to_string(seq.num_frames()) + " mesh frames");
  }
  for (std::size_t t = 0; t < targets.size(); ++t) {
    for (std::size_t c = 0; c < kNumStructures; ++c) {
      if (targets[t][c].cols() == 0) throw ValidationError("recon_loss: empty target cloud at " + where(t, c));
    }
  }
  const double inv_t = 1.0 / static_cast<double>(seq.num_frames());
  return per_frame(seq, [&](std::size_t t, std::array<Points, kNumStructures>& grad) {
    double value = 0.0;
    for (std::size_t c = 0; c < kNumStructures; ++c) {
      const Points& v = seq[t][c].vertices;
      const Points& p = targets[t][c];
      const double wv = inv_t / static_cast<double>(v.cols());
      const double wp = inv_t / static_cast<double>(p.cols());
      const PointGrid cloud(p);
      const PointGrid mesh(v);
      double sum_v = 0.0;
      for (Eigen::Index i = 0; i < v.cols(); ++i) {
        const auto hit = cloud.nearest(v.col(i));
        sum_v += hit.distance;
        if (hit.distance > 0.0) grad[c].col(i) += wv * (v.col(i) - p.col(hit.index)) / hit.distance;
      }
      double sum_p = 0.0;
      for (Eigen::Index j = 0; j < p.cols(); ++j) {
        const auto hit = mesh.nearest(p.col(j));
        sum_p += hit.distance;
        if (hit.distance > 0.0) grad[c].col(hit.index) += wp * (v.col(hit.index) - p.col(j)) / hit.distance;
      }
      value += sum_v / static_cast<double>(v.cols()) + sum_p / static_cast<double>(p.cols());
    }
    return value * inv_t;
  });
}

LossResult edge_length_std(const Points& points, const std::vector<Edge>& edges) {
  LossResult out;
  out.gradient.resize(1);
  out.gradient[0][0] = Points::Zero(3, points.cols());
  if (edges.empty()) return out;
  const auto m = static_cast<double>(edges.size());
  Eigen::VectorXd len(static_cast<Eigen::Index>(edges.size()));
  for (std::size_t e = 0; e < edges.size(); ++e) {
    len[static_cast<Eigen::Index>(e)] = (points.col(edges[e][0]) - points.col(edges[e][1])).norm();
  }
  const double mean = len.mean();
  const double sd = std::sqrt((len.array() - mean).square().sum() / m);
  out.value = sd;
  if (!(sd > 0.0)) return out;
  Points& g = out.gradient[0][0];
  for (std::size_t e = 0; e < edges.size(); ++e) {
    const double l = len[static_cast<Eigen::Index>(e)];
    if (!(l > 0.0)) continue;
    const double coeff = (l - mean) / (m * sd);
    const Vec3 dir = (points.col(edges[e][0]) - points.col(edges[e][1])) / l;
    g.col(edges[e][0]) += coeff * dir;
    g.col(edges[e][1]) -= coeff * dir;
  }
  return out;
}

LossResult edge_loss(const MeshSequence& seq) {
  require_frames(seq, "edge_loss");
  std::array<std::vector<Edge>, kNumStructures> edges;
  for (std::size_t c = 0; c < kNumStructures; ++c) edges[c] = unique_edges(seq[0][c].faces);
  const double inv_t = 1.0 / static_cast<double>(seq.num_frames());
  return per_frame(seq, [&](std::size_t t, std::array<Points, kNumStructures>& grad) {
    double value = 0.0;
    for (std::size_t c = 0; c < kNumStructures; ++c) {
      const auto term = edge_length_std(seq[t][c].vertices, edges[c]);
      value += term.value;
      grad[c] += inv_t * term.gradient[0][0];
    }
    return value * inv_t;
  });
}

LossResult curvature_loss(const MeshSequence& seq, const TemplateCurvatures& template_curvatures) {
  require_frames(seq, "curvature_loss");
  std::array<Adjacency, kNumStructures> adj;
  for (std::size_t c = 0; c < kNumStructures; ++c) adj[c] = Adjacency::build(seq[0][c].num_vertices(), seq[0][c].faces);
  const double inv_t = 1.0 / static_cast<double>(seq.num_frames());
  return per_frame(seq, [&](std::size_t t, std::array<Points, kNumStructures>& grad) {
    double value = 0.0;
    for (std::size_t c = 0; c < kNumStructures; ++c) {
      value += curvature_term(seq[t][c].vertices, seq[t][c].faces, adj[c], template_curvatures[c], inv_t, grad[c],
                              where(t, c));
    }
    return value * inv_t;
  });
}

LossResult temporal_loss(const MeshSequence& seq) {
  const auto frames = seq.num_frames();
  if (frames < 2) throw ValidationError("temporal_loss: needs at least 2 frames, got " + std::to_string(frames));
  LossResult out;
  out.gradient = zero_gradient(seq);
  const double inv = 1.0 / static_cast<double>(frames - 1);
  for (std::size_t t = 0; t + 1 < frames; ++t) {
    for (std::size_t c = 0; c < kNumStructures; ++c) {
      const Points diff = seq[t + 1][c].vertices - seq[t][c].vertices;
      const double w = inv / static_cast<double>(diff.cols());
      for (Eigen::Index i = 0; i < diff.cols(); ++i) {
        const double d = diff.col(i).norm();
        out.value += w * d;
        if (d > 0.0) {
          const Vec3 u = w * diff.col(i) / d;
          out.gradient[t + 1][c].col(i) += u;
          out.gradient[t][c].col(i) -= u;
        }
      }
    }
  }
  return out;
}

LossResult cycle_loss(const MeshSequence& seq) {
  require_frames(seq, "cycle_loss");
  LossResult out;
  out.gradient = zero_gradient(seq);
  const auto last = seq.num_frames() - 1;
  if (last == 0) return out;
  for (std::size_t c = 0; c < kNumStructures; ++c) {
    const Points diff = seq[last][c].vertices - seq[0][c].vertices;
    const double w = 1.0 / static_cast<double>(diff.cols());
    for (Eigen::Index i = 0; i < diff.cols(); ++i) {
      const double d = diff.col(i).norm();
      out.value += w * d;
      if (d > 0.0) {
        const Vec3 u = w * diff.col(i) / d;
        out.gradient[last][c].col(i) += u;
        out.gradient[0][c].col(i) -= u;
      }
    }
  }
  return out;
}

TotalLossResult total_loss(const MeshSequence& seq, const TargetClouds& targets, const LossWeights& weights,
                           const TemplateCurvatures& template_curvatures) {
  weights.validate();
  TotalLossResult out;
  auto recon = recon_loss(seq, targets);
  out.terms.recon = recon.value;
  out.gradient = std::move(recon.gradient);
  if (weights.edge != 0.0) {
    const auto r = edge_loss(seq);
    out.terms.edge = r.value;
    accumulate(out.gradient, r.gradient, weights.edge);
  }
  if (weights.curv != 0.0) {
    const auto r = curvature_loss(seq, template_curvatures);
    out.terms.curv = r.value;
    accumulate(out.gradient, r.gradient, weights.curv);
  }
  if (seq.num_frames() >= 2) {
    if (weights.temp != 0.0) {
      const auto r = temporal_loss(seq);
      out.terms.temp = r.value;
      accumulate(out.gradient, r.gradient, weights.temp);
    }
    if (weights.cycle != 0.0) {
      const auto r = cycle_loss(seq);
      out.terms.cycle = r.value;
      accumulate(out.gradient, r.gradient, weights.cycle);
    }
  }
  out.value = out.terms.recon + weights.edge * out.terms.edge + weights.curv * out.terms.curv +
              weights.temp * out.terms.temp + weights.cycle * out.terms.cycle;
  return out;
}

double percentile(std::vector<double> values, double q) {
  if (values.empty()) throw ValidationError("percentile: empty input");
  if (!(q >= 0.0 && q <= 100.0)) throw ValidationError("percentile: q must lie in [0,100]");
  std::sort(values.begin(), values.end());
  const double pos = q / 100.0 * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, values.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return values[lo] + frac * (values[hi] - values[lo]);
}

SurfaceDistances surface_distances(const Points& a, const Points& b) {
  if (a.cols() == 0 || b.cols() == 0) throw ValidationError("surface_distances: empty point set");
  const PointGrid grid_a(a);
  const PointGrid grid_b(b);
  std::vector<double> pooled;
  pooled.reserve(static_cast<std::size_t>(a.cols() + b.cols()));
  double sum_ab = 0.0;
  for (Eigen::Index i = 0; i < a.cols(); ++i) {
    const double d = grid_b.nearest(a.col(i)).distance;
    sum_ab += d;
    pooled.push_back(d);
  }
  double sum_ba = 0.0;
  for (Eigen::Index j = 0; j < b.cols(); ++j) {
    const double d = grid_a.nearest(b.col(j)).distance;
    sum_ba += d;
    pooled.push_back(d);
  }
  SurfaceDistances out;
  out.uni_a_to_b = sum_ab / static_cast<double>(a.cols());
  out.uni_b_to_a = sum_ba / static_cast<double>(b.cols());
  out.assd = 0.5 * (out.uni_a_to_b + out.uni_b_to_a);
  out.hd90 = percentile(std::move(pooled), 90.0);
  return out;
}

double dice(std::span<const std::uint8_t> a, std::span<const std::uint8_t> b, std::uint8_t label) {
  if (a.size() != b.size()) throw ValidationError("dice: label arrays differ in size");
  std::size_t na = 0;
  std::size_t nb = 0;
  std::size_t both = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const bool in_a = a[i] == label;
    const bool in_b = b[i] == label;
    na += in_a;
    nb += in_b;
    both += in_a && in_b;
  }
  if (na + nb == 0) return 1.0;
  return 2.0 * static_cast<double>(both) / static_cast<double>(na + nb);
}

double dice(const LabelVolume& a, const LabelVolume& b, std::uint8_t label) {
  if (a.dims != b.dims) throw ValidationError("dice: volume dimensions differ");
  return dice(std::span<const std::uint8_t>(a.data), std::span<const std::uint8_t>(b.data), label);
}

double temporal_laplacian_error(const MeshSequence& seq) {
  const auto frames = seq.num_frames();
  if (frames < 3) {
    throw ValidationError("temporal_laplacian_error: needs at least 3 frames, got " + std::to_string(frames));
  }
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t t = 1; t + 1 < frames; ++t) {
    for (std::size_t c = 0; c < kNumStructures; ++c) {
      const Points d2 = seq[t - 1][c].vertices + seq[t + 1][c].vertices - 2.0 * seq[t][c].vertices;
      sum += d2.colwise().norm().sum();
      count += static_cast<std::size_t>(d2.cols());
    }
  }
  return count ? sum / static_cast<double>(count) : 0.0;
}

double pearson_r(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("pearson_r: length mismatch");
  if (x.size() < 2) throw ValidationError("pearson_r: need at least two samples");
  const Eigen::Map<const Eigen::VectorXd> xv(x.data(), static_cast<Eigen::Index>(x.size()));
  const Eigen::Map<const Eigen::VectorXd> yv(y.data(), static_cast<Eigen::Index>(y.size()));
  const Eigen::VectorXd a = xv.array() - xv.mean();
  const Eigen::VectorXd b = yv.array() - yv.mean();
  const double na = a.norm();
  const double nb = b.norm();
  if (!(na > 0.0) || !(nb > 0.0)) throw Error("pearson_r: zero variance");
  return std::clamp(a.dot(b) / (na * nb), -1.0, 1.0);
}

}  // namespace cardioshape
