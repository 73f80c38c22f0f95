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

#include "cardioshape/ssm.hpp"

#include "cardioshape/error.hpp"
#include "cardioshape/nearest.hpp"
#include "cardioshape/optim.hpp"
#include "cardioshape/parallel.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>

#include <cmath>
#include <limits>
#include <string>

namespace cardioshape {

ShapeModel::ShapeModel(const Topology& topology, int max_components)
    : topology_(topology),
      digest_(topology.digest()),
      frames_(topology.frames),
      vertices_(topology.total_vertices()),
      dimension_(topology.shape_dimension()),
      max_components_(max_components) {
  if (max_components < 1) throw ValidationError("ShapeModel: max_components must be >= 1");
  components_.resize(dimension_, 0);
}

ShapeModel::ShapeModel(Eigen::Index dimension, int max_components)
    : frames_(1), dimension_(dimension), max_components_(max_components) {
  if (max_components < 1) throw ValidationError("ShapeModel: max_components must be >= 1");
  if (dimension < 1) throw ValidationError("ShapeModel: dimension must be >= 1");
  components_.resize(dimension_, 0);
}

ShapeModel ShapeModel::from_parts(std::uint64_t digest, std::size_t frames, Eigen::Index vertices, int max_components,
                                  Eigen::VectorXd mean, Eigen::VectorXd explained_variance, Eigen::MatrixXd components,
                                  std::int64_t n_seen, double total_variance) {
  ShapeModel m;
  m.digest_ = digest;
  m.frames_ = frames;
  m.vertices_ = vertices;
  m.max_components_ = max_components;
  m.dimension_ = 3 * static_cast<Eigen::Index>(frames) * vertices;
  const Eigen::Index dim = m.dimension();
  if (mean.size() != dim || components.rows() != dim || components.cols() != explained_variance.size()) {
    throw ValidationError("ShapeModel: stored arrays have inconsistent sizes");
  }
  if (n_seen < 0 || components.cols() > max_components) throw ValidationError("ShapeModel: inconsistent counts");
  m.mean_ = std::move(mean);
  m.explained_variance_ = std::move(explained_variance);
  m.components_ = std::move(components);
  m.n_seen_ = n_seen;
  m.total_variance_ = total_variance;
  const double denom = n_seen > 1 ? static_cast<double>(n_seen - 1) : 1.0;
  m.singular_values_ = (m.explained_variance_ * denom).cwiseSqrt();
  m.sum_squares_ = total_variance * denom;
  return m;
}

void ShapeModel::check_dimension(Eigen::Index n, const char* what) const {
  if (n != dimension()) {
    throw ValidationError(std::string(what) + ": expected shape vectors of length " + std::to_string(dimension()) +
                          ", got " + std::to_string(n));
  }
}

void ShapeModel::partial_fit(const Eigen::MatrixXd& batch) {
  check_dimension(batch.rows(), "partial_fit");
  const Eigen::Index b = batch.cols();
  if (b < 1) throw ValidationError("partial_fit: empty batch");
  if (!batch.allFinite()) throw ValidationError("partial_fit: non-finite batch entry");
  const Eigen::Index dim = dimension();
  const Eigen::VectorXd batch_mean = batch.rowwise().mean();
  const Eigen::MatrixXd centred = batch.colwise() - batch_mean;
  const double batch_ss = centred.squaredNorm();

  const Eigen::Index k_prev = components_.cols();
  const bool first = n_seen_ == 0;
  const Eigen::Index rows = (first ? 0 : k_prev + 1) + b;
  Eigen::MatrixXd stack(rows, dim);
  Eigen::Index r = 0;
  if (!first) {
    stack.topRows(k_prev) = singular_values_.asDiagonal() * components_.transpose();
    r = k_prev;
  }
  stack.middleRows(r, b) = centred.transpose();
  r += b;
  const double n = static_cast<double>(n_seen_);
  const double nb = static_cast<double>(b);
  if (!first) {
    const Eigen::VectorXd shift = batch_mean - mean_;
    stack.row(r) = std::sqrt(n * nb / (n + nb)) * shift.transpose();
    sum_squares_ += batch_ss + n * nb / (n + nb) * shift.squaredNorm();
    mean_ = (n * mean_ + nb * batch_mean) / (n + nb);
  } else {
    sum_squares_ = batch_ss;
    mean_ = batch_mean;
  }
  n_seen_ += b;

  // Right singular vectors of the stacked matrix.
  Eigen::VectorXd sv;
  Eigen::MatrixXd dirs;
  if (dim <= rows) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(stack, Eigen::ComputeThinV);
    sv = svd.singularValues();
    dirs = svd.matrixV();
  } else {
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(stack.transpose());
    const Eigen::MatrixXd rmat = qr.matrixQR().topRows(rows).triangularView<Eigen::Upper>();
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(rmat.transpose(), Eigen::ComputeFullV);
    // stackᵀ = Q·R, stack = Rᵀ·Qᵀ = U·S·(Q·V)ᵀ.
    const Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(dim, rows);
    sv = svd.singularValues();
    dirs = q * svd.matrixV();
  }

  Eigen::Index keep = std::min<Eigen::Index>(max_components_, sv.size());
  const double tol = sv.size() > 0 ? sv[0] * 1e-10 : 0.0;
  while (keep > 0 && !(sv[keep - 1] > tol)) --keep;
  components_ = dirs.leftCols(keep);
  singular_values_ = sv.head(keep);
  for (Eigen::Index c = 0; c < keep; ++c) {
    Eigen::Index arg = 0;
    components_.col(c).cwiseAbs().maxCoeff(&arg);
    if (components_(arg, c) < 0.0) components_.col(c) *= -1.0;
  }
  const double denom = n_seen_ > 1 ? static_cast<double>(n_seen_ - 1) : 1.0;
  explained_variance_ = singular_values_.array().square() / denom;
  total_variance_ = sum_squares_ / denom;
}

void ShapeModel::fit(const Eigen::MatrixXd& data, int batch_size) {
  if (batch_size < 1) throw ValidationError("fit: batch size must be >= 1");
  for (Eigen::Index start = 0; start < data.cols(); start += batch_size) {
    const Eigen::Index count = std::min<Eigen::Index>(batch_size, data.cols() - start);
    partial_fit(data.middleCols(start, count));
  }
}

void ShapeModel::attach(const Topology& topology) {
  if (topology.digest() != digest_) throw ValidationError("ShapeModel: topology digest does not match the model");
  if (topology.total_vertices() != vertices_) throw ValidationError("ShapeModel: vertex count does not match");
  Topology t = topology;
  t.frames = frames_;
  topology_ = std::move(t);
}

const Topology& ShapeModel::topology() const {
  if (!topology_) throw ValidationError("ShapeModel: no connectivity attached");
  return *topology_;
}

Eigen::VectorXd ShapeModel::encode(const ShapeVector& v) const {
  check_dimension(v.size(), "encode");
  return components_.transpose() * (v - mean_);
}

ShapeVector ShapeModel::decode(const Eigen::VectorXd& w) const {
  if (w.size() > components_.cols()) {
    throw ValidationError("decode: descriptor has " + std::to_string(w.size()) + " entries but the model has " +
                          std::to_string(components_.cols()) + " components");
  }
  return mean_ + components_.leftCols(w.size()) * w;
}

ShapeVector ShapeModel::project(const ShapeVector& v, int k) const {
  check_dimension(v.size(), "project");
  if (k < 0 || k > num_components()) throw ValidationError("project: k out of range");
  const auto p = components_.leftCols(k);
  return mean_ + p * (p.transpose() * (v - mean_));
}

double ShapeModel::compactness(int k) const {
  if (k < 1 || k > max_components_) throw ValidationError("compactness: k must be in [1, M]");
  if (!(total_variance_ > 0.0)) throw Error("compactness: model has zero total variance");
  const Eigen::Index kk = std::min<Eigen::Index>(k, explained_variance_.size());
  return std::min(1.0, explained_variance_.head(kk).sum() / total_variance_);
}

Eigen::MatrixXd stack_shapes(std::span<const MeshSequence> sequences) {
  if (sequences.empty()) return {};
  const ShapeVector first = vectorize(sequences.front());
  Eigen::MatrixXd out(first.size(), static_cast<Eigen::Index>(sequences.size()));
  out.col(0) = first;
  for (std::size_t i = 1; i < sequences.size(); ++i) {
    const ShapeVector v = vectorize(sequences[i]);
    if (v.size() != first.size()) throw ValidationError("stack_shapes: sequences differ in size");
    out.col(static_cast<Eigen::Index>(i)) = v;
  }
  return out;
}

double mean_vertex_distance(const ShapeVector& a, const ShapeVector& b) {
  if (a.size() != b.size() || a.size() % 3 != 0 || a.size() == 0) {
    throw ValidationError("mean_vertex_distance: incompatible shape vectors");
  }
  const Eigen::Map<const Points> pa(a.data(), 3, a.size() / 3);
  const Eigen::Map<const Points> pb(b.data(), 3, b.size() / 3);
  return (pa - pb).colwise().norm().mean();
}

double mean_squared_vertex_distance(const ShapeVector& a, const ShapeVector& b) {
  if (a.size() != b.size() || a.size() % 3 != 0 || a.size() == 0) {
    throw ValidationError("mean_squared_vertex_distance: incompatible shape vectors");
  }
  return (a - b).squaredNorm() / static_cast<double>(a.size() / 3);
}

GeneralizationStats generalization_error(const ShapeModel& model, const Eigen::MatrixXd& test, int k) {
  GeneralizationStats s;
  for (Eigen::Index i = 0; i < test.cols(); ++i) {
    const ShapeVector v = test.col(i);
    const ShapeVector r = model.project(v, k);
    s.per_vector.push_back(mean_vertex_distance(v, r));
    s.per_vector_mse.push_back(mean_squared_vertex_distance(v, r));
  }
  if (s.per_vector.empty()) return s;
  for (double e : s.per_vector_mse) s.mse_mean += e;
  s.mse_mean /= static_cast<double>(s.per_vector_mse.size());
  double sum = 0.0;
  for (double e : s.per_vector) sum += e;
  s.mean = sum / static_cast<double>(s.per_vector.size());
  double var = 0.0;
  for (double e : s.per_vector) var += (e - s.mean) * (e - s.mean);
  s.sd = s.per_vector.size() > 1 ? std::sqrt(var / static_cast<double>(s.per_vector.size() - 1)) : 0.0;
  return s;
}

namespace {

struct Crossing {
  Eigen::Index a;  // global coordinate offsets (multiples of 3)
  Eigen::Index b;
  double tau;
  double sa;
  double sb;
};

/// Crossing points of the edges of one structure in one frame of a flat shape
/// vector. Endpoint classification uses s < 0 versus s >= 0.
void cut_edges(const Eigen::VectorXd& v, Eigen::Index base, Eigen::Index count, const std::vector<Edge>& edges,
               const ContourPlane& plane, std::vector<Crossing>& out, std::vector<Vec3>& points) {
  thread_local std::vector<double> side;
  side.resize(static_cast<std::size_t>(count));
  const double offset = plane.normal.dot(plane.origin);
  for (Eigen::Index i = 0; i < count; ++i) side[i] = plane.normal.dot(v.segment<3>(base + 3 * i)) - offset;
  for (const auto& e : edges) {
    const double sa = side[e[0]];
    const double sb = side[e[1]];
    if ((sa < 0.0) == (sb < 0.0)) continue;
    const Eigen::Index ia = base + 3 * e[0];
    const Eigen::Index ib = base + 3 * e[1];
    const double tau = sa / (sa - sb);
    out.push_back({ia, ib, tau, sa, sb});
    const Vec3 pa = v.segment<3>(ia);
    points.push_back(pa + tau * (v.segment<3>(ib) - pa));
  }
}

Points to_points(const std::vector<Vec3>& pts) {
  Points out(3, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t i = 0; i < pts.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = pts[i];
  return out;
}

struct ContourIndex {
  std::vector<std::size_t> structures;
  PointGrid observed;
};

}  // namespace

Points slice_mesh(const TriMesh& mesh, const ContourPlane& plane) {
  const Eigen::VectorXd flat = Eigen::Map<const Eigen::VectorXd>(mesh.vertices.data(), mesh.vertices.size());
  std::vector<Crossing> cross;
  std::vector<Vec3> pts;
  cut_edges(flat, 0, mesh.vertices.cols(), unique_edges(mesh.faces), plane, cross, pts);
  return to_points(pts);
}

std::vector<Contour> slice_contours(const MeshSequence& seq, std::span<const ContourPlane> planes, bool labelled) {
  std::vector<Contour> out;
  for (std::size_t t = 0; t < seq.num_frames(); ++t) {
    for (const auto& plane : planes) {
      if (labelled) {
        for (Structure s : kStructures) {
          Points p = slice_mesh(seq[t][s], plane);
          if (p.cols() > 0) out.push_back({static_cast<int>(t), s, plane, std::move(p)});
        }
      } else {
        std::vector<Vec3> all;
        for (Structure s : kStructures) {
          const Points p = slice_mesh(seq[t][s], plane);
          for (Eigen::Index i = 0; i < p.cols(); ++i) all.push_back(p.col(i));
        }
        if (!all.empty()) out.push_back({static_cast<int>(t), std::nullopt, plane, to_points(all)});
      }
    }
  }
  return out;
}

DescriptorFit fit_to_contours(const ShapeModel& model, std::span<const Contour> contours,
                              const DescriptorFitOptions& options) {
  if (contours.empty()) throw ValidationError("fit_to_contours: no contours");
  if (options.iterations < 0) throw ValidationError("fit_to_contours: iterations must be non-negative");
  const Topology& topo = model.topology();
  std::array<std::vector<Edge>, kNumStructures> edges;
  for (std::size_t s = 0; s < kNumStructures; ++s) edges[s] = unique_edges(topo.faces[s]);
  const Eigen::Index nv = topo.total_vertices();

  std::vector<ContourIndex> index;
  index.reserve(contours.size());
  for (const auto& c : contours) {
    if (c.points.cols() == 0) throw ValidationError("fit_to_contours: empty contour");
    if (c.frame < 0 || static_cast<std::size_t>(c.frame) >= model.frames()) {
      throw ValidationError("fit_to_contours: contour frame out of range");
    }
    ContourIndex ci{{}, PointGrid(c.points)};
    if (c.structure) {
      ci.structures.push_back(static_cast<std::size_t>(*c.structure));
    } else {
      for (std::size_t s = 0; s < kNumStructures; ++s) ci.structures.push_back(s);
    }
    index.push_back(std::move(ci));
  }

  const Eigen::VectorXd sd = model.component_sd();
  const Eigen::Index m = sd.size();
  Eigen::VectorXd u = Eigen::VectorXd::Zero(m);
  AdamState adam(AdamOptions{options.lr});
  DescriptorFit fit;
  fit.best_loss = std::numeric_limits<double>::infinity();
  fit.w = Eigen::VectorXd::Zero(m);

  const double inv_n = 1.0 / static_cast<double>(contours.size());
  std::vector<double> losses(contours.size());
  std::vector<std::vector<std::pair<Eigen::Index, Vec3>>> grads(contours.size());
  for (int it = 0; it <= options.iterations; ++it) {
    const Eigen::VectorXd w = sd.cwiseProduct(u);
    const Eigen::VectorXd v = model.decode(w);
    parallel_for(contours.size(), [&](std::size_t ci) {
      const Contour& c = contours[ci];
      auto& g = grads[ci];
      g.clear();
      const Eigen::Index frame_base = 3 * static_cast<Eigen::Index>(c.frame) * nv;
      thread_local std::vector<Crossing> cross;
      thread_local std::vector<Vec3> pts;
      thread_local std::vector<Vec3> gp;
      cross.clear();
      pts.clear();
      for (std::size_t s : index[ci].structures) {
        cut_edges(v, frame_base + 3 * topo.vertex_offset(kStructures[s]), topo.vertex_counts[s], edges[s], c.plane, cross,
                  pts);
      }
      const double n_obs = static_cast<double>(c.points.cols());
      double loss = 0.0;
      if (pts.empty()) {
        // No predicted cut: pull the nearest vertices onto the observed points.
        for (Eigen::Index o = 0; o < c.points.cols(); ++o) {
          double best = std::numeric_limits<double>::infinity();
          Eigen::Index arg = -1;
          for (std::size_t s : index[ci].structures) {
            const Eigen::Index base = frame_base + 3 * topo.vertex_offset(kStructures[s]);
            for (Eigen::Index i = 0; i < topo.vertex_counts[s]; ++i) {
              const double d = (v.segment<3>(base + 3 * i) - c.points.col(o)).norm();
              if (d < best) {
                best = d;
                arg = base + 3 * i;
              }
            }
          }
          loss += best / n_obs;
          if (best > 0.0) g.emplace_back(arg, (v.segment<3>(arg) - c.points.col(o)) / (best * n_obs));
        }
        losses[ci] = loss;
        return;
      }
      const Points pred = to_points(pts);
      const double n_pred = static_cast<double>(pts.size());
      gp.assign(pts.size(), Vec3::Zero());
      for (std::size_t p = 0; p < pts.size(); ++p) {
        const NearestHit hit = index[ci].observed.nearest(pts[p]);
        loss += hit.distance / n_pred;
        if (hit.distance > 0.0) gp[p] += (pts[p] - c.points.col(hit.index)) / (hit.distance * n_pred);
      }
      const PointGrid pred_grid(pred);
      for (Eigen::Index o = 0; o < c.points.cols(); ++o) {
        const NearestHit hit = pred_grid.nearest(c.points.col(o));
        loss += hit.distance / n_obs;
        if (hit.distance > 0.0) {
          gp[static_cast<std::size_t>(hit.index)] += (pred.col(hit.index) - c.points.col(o)) / (hit.distance * n_obs);
        }
      }
      for (std::size_t p = 0; p < pts.size(); ++p) {
        const Crossing& x = cross[p];
        const Vec3 edge = v.segment<3>(x.b) - v.segment<3>(x.a);
        const double denom = (x.sa - x.sb) * (x.sa - x.sb);
        const double ge = gp[p].dot(edge);
        g.emplace_back(x.a, (1.0 - x.tau) * gp[p] - ge * x.sb / denom * c.plane.normal);
        g.emplace_back(x.b, x.tau * gp[p] + ge * x.sa / denom * c.plane.normal);
      }
      losses[ci] = loss;
    });
    double loss = 0.0;
    Eigen::VectorXd gv = Eigen::VectorXd::Zero(v.size());
    for (std::size_t ci = 0; ci < contours.size(); ++ci) {
      loss += losses[ci] * inv_n;
      for (const auto& [at, g] : grads[ci]) gv.segment<3>(at) += g * inv_n;
    }
    if (!std::isfinite(loss)) throw Error("fit_to_contours: non-finite loss at iteration " + std::to_string(it));
    fit.trace.push_back(loss);
    if (loss < fit.best_loss) {
      fit.best_loss = loss;
      fit.w = w;
    }
    if (it == options.iterations) break;
    const Eigen::VectorXd gu = sd.cwiseProduct(model.components().transpose() * gv);
    adam.step(u, gu);
  }
  return fit;
}

CompletionResult complete_sequence(const ShapeModel& model, const MeshSequence& partial,
                                   const std::vector<bool>& observed, const DescriptorFitOptions& options) {
  if (partial.num_frames() != model.frames()) {
    throw ValidationError("complete_sequence: sequence has " + std::to_string(partial.num_frames()) +
                          " frames, model expects " + std::to_string(model.frames()));
  }
  if (observed.size() != partial.num_frames()) throw ValidationError("complete_sequence: mask length mismatch");
  std::vector<std::size_t> frames;
  for (std::size_t t = 0; t < observed.size(); ++t) {
    if (observed[t]) frames.push_back(t);
  }
  if (frames.empty()) throw ValidationError("complete_sequence: no observed frames");
  const ShapeVector full_target = vectorize(partial);
  const Eigen::Index nv = model.vertices();
  const Eigen::Index block = 3 * nv;
  const double inv = 1.0 / (static_cast<double>(frames.size()) * static_cast<double>(nv));

  // Restrict the model to the observed rows once.
  const auto rows = static_cast<Eigen::Index>(frames.size()) * block;
  const Eigen::Index m = model.num_components();
  Eigen::MatrixXd basis(rows, m);
  Eigen::VectorXd mean(rows), target(rows);
  for (std::size_t f = 0; f < frames.size(); ++f) {
    const Eigen::Index src = static_cast<Eigen::Index>(frames[f]) * block;
    const Eigen::Index dst = static_cast<Eigen::Index>(f) * block;
    basis.middleRows(dst, block) = model.components().middleRows(src, block);
    mean.segment(dst, block) = model.mean().segment(src, block);
    target.segment(dst, block) = full_target.segment(src, block);
  }

  const Eigen::VectorXd sd = model.component_sd();
  Eigen::VectorXd u = Eigen::VectorXd::Zero(sd.size());
  AdamState adam(AdamOptions{options.lr});
  CompletionResult res;
  res.best_loss = std::numeric_limits<double>::infinity();
  res.w = Eigen::VectorXd::Zero(sd.size());
  Eigen::VectorXd gv(rows);
  for (int it = 0; it <= options.iterations; ++it) {
    const Eigen::VectorXd w = sd.cwiseProduct(u);
    const Eigen::VectorXd v = mean + basis * w;
    gv.setZero();
    double loss = 0.0;
    for (Eigen::Index i = 0; i < rows; i += 3) {
      const Vec3 d = v.segment<3>(i) - target.segment<3>(i);
      const double n = d.norm();
      loss += n * inv;
      if (n > 0.0) gv.segment<3>(i) = d * (inv / n);
    }
    if (!std::isfinite(loss)) throw Error("complete_sequence: non-finite loss at iteration " + std::to_string(it));
    res.trace.push_back(loss);
    if (loss < res.best_loss) {
      res.best_loss = loss;
      res.w = w;
    }
    if (it == options.iterations) break;
    adam.step(u, sd.cwiseProduct(basis.transpose() * gv));
  }
  res.sequence = devectorize(model.decode(res.w), model.topology());
  return res;
}

MeshSequence sample_mode(const ShapeModel& model, int k, double multiplier) {
  if (k < 0 || k >= model.num_components()) throw ValidationError("sample_mode: component index out of range");
  Eigen::VectorXd w = Eigen::VectorXd::Zero(k + 1);
  w[k] = multiplier * std::sqrt(model.explained_variance()[k]);
  return devectorize(model.decode(w), model.topology());
}

}  // namespace cardioshape
