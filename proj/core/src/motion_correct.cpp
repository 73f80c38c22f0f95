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

#include "cardioshape/motion_correct.hpp"

#include "cardioshape/error.hpp"
#include "cardioshape/objectives.hpp"
#include "cardioshape/optim.hpp"
#include "cardioshape/parallel.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace cardioshape {

namespace {

struct Sample {
  double value;
  double d_dx;  // ∂/∂Δx
  double d_dy;  // ∂/∂Δy
};

/// Bilinear sample at continuous pixel coordinates with clamping; derivatives
/// are with respect to the millimetre displacement.
Sample sample_pixel(const SlicePlane& plane, int t, double px, double py) {
  const double cx = std::clamp(px, 0.0, static_cast<double>(plane.width - 1));
  const double cy = std::clamp(py, 0.0, static_cast<double>(plane.height - 1));
  const int c0 = std::min(static_cast<int>(std::floor(cx)), std::max(0, plane.width - 2));
  const int r0 = std::min(static_cast<int>(std::floor(cy)), std::max(0, plane.height - 2));
  const int c1 = std::min(c0 + 1, plane.width - 1);
  const int r1 = std::min(r0 + 1, plane.height - 1);
  const double fx = cx - c0;
  const double fy = cy - r0;
  const double i00 = plane.image[plane.pixel_index(t, r0, c0)];
  const double i01 = plane.image[plane.pixel_index(t, r0, c1)];
  const double i10 = plane.image[plane.pixel_index(t, r1, c0)];
  const double i11 = plane.image[plane.pixel_index(t, r1, c1)];
  Sample s;
  s.value = (1 - fy) * ((1 - fx) * i00 + fx * i01) + fy * ((1 - fx) * i10 + fx * i11);
  const bool clamp_x = px < 0.0 || px > plane.width - 1 || plane.width < 2;
  const bool clamp_y = py < 0.0 || py > plane.height - 1 || plane.height < 2;
  s.d_dx = clamp_x ? 0.0 : ((1 - fy) * (i01 - i00) + fy * (i11 - i10)) / plane.du;
  s.d_dy = clamp_y ? 0.0 : ((1 - fx) * (i10 - i00) + fx * (i11 - i01)) / plane.dv;
  return s;
}

double sign(double x) { return (x > 0.0) - (x < 0.0); }

struct AxisTap {
  int i0;
  int i1;
  double f;
  bool clamped;
};

std::vector<AxisTap> axis_taps(int n, double offset) {
  std::vector<AxisTap> taps(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) {
    const double p = k + offset;
    const double cp = std::clamp(p, 0.0, static_cast<double>(n - 1));
    const int i0 = std::min(static_cast<int>(std::floor(cp)), std::max(0, n - 2));
    taps[k] = {i0, std::min(i0 + 1, n - 1), cp - i0, p < 0.0 || p > n - 1 || n < 2};
  }
  return taps;
}

/// Whole-image version of sample_pixel for a uniform in-plane shift.
void shift_image(const SlicePlane& plane, int t, const Eigen::Vector2d& disp, std::vector<Sample>& out) {
  const auto cols = axis_taps(plane.width, disp.x() / plane.du);
  const auto rows = axis_taps(plane.height, disp.y() / plane.dv);
  const float* img = plane.image.data() + plane.pixel_index(t, 0, 0);
  const double inv_du = 1.0 / plane.du;
  const double inv_dv = 1.0 / plane.dv;
  for (int r = 0; r < plane.height; ++r) {
    const AxisTap& ry = rows[r];
    const float* row0 = img + static_cast<std::size_t>(ry.i0) * plane.width;
    const float* row1 = img + static_cast<std::size_t>(ry.i1) * plane.width;
    const double fy = ry.f;
    Sample* dst = out.data() + static_cast<std::size_t>(r) * plane.width;
    for (int c = 0; c < plane.width; ++c) {
      const AxisTap& cx = cols[c];
      const double i00 = row0[cx.i0];
      const double i01 = row0[cx.i1];
      const double i10 = row1[cx.i0];
      const double i11 = row1[cx.i1];
      const double fx = cx.f;
      const double top = (1 - fx) * i00 + fx * i01;
      const double bottom = (1 - fx) * i10 + fx * i11;
      dst[c].value = (1 - fy) * top + fy * bottom;
      dst[c].d_dx = cx.clamped ? 0.0 : ((1 - fy) * (i01 - i00) + fy * (i11 - i10)) * inv_du;
      dst[c].d_dy = ry.clamped ? 0.0 : (bottom - top) * inv_dv;
    }
  }
}

/// Precomputed intersection geometry: in-plane millimetre coordinates of the
/// samples in both planes.
struct PairSamples {
  std::size_t a;
  std::size_t b;
  Eigen::Matrix2Xd xy_a;
  Eigen::Matrix2Xd xy_b;
};

std::vector<PairSamples> build_pairs(const ViewSet& views, std::vector<std::string>* warnings) {
  std::vector<std::pair<std::size_t, std::size_t>> plan;
  const std::size_t d = views.sax.size();
  const std::size_t i2 = d;
  const std::size_t i4 = d + 1;
  plan.emplace_back(i2, i4);
  for (std::size_t s = 0; s < d; ++s) plan.emplace_back(s, i2);
  for (std::size_t s = 0; s < d; ++s) plan.emplace_back(s, i4);
  std::vector<PairSamples> out;
  for (auto [a, b] : plan) {
    const auto& pa = views.plane(a);
    const auto& pb = views.plane(b);
    const Points pts = intersection_samples(pa, pb);
    if (pts.cols() == 0) {
      if (warnings) warnings->push_back("intersection " + pa.id + " / " + pb.id + " is empty; term contributes 0");
      continue;
    }
    PairSamples ps{a, b, Eigen::Matrix2Xd(2, pts.cols()), Eigen::Matrix2Xd(2, pts.cols())};
    for (Eigen::Index i = 0; i < pts.cols(); ++i) {
      ps.xy_a.col(i) = pa.project(pts.col(i));
      ps.xy_b.col(i) = pb.project(pts.col(i));
    }
    out.push_back(std::move(ps));
  }
  return out;
}

class McEvaluator {
 public:
  explicit McEvaluator(const ViewSet& views) : views_(views) {
    views_.validate();
    pairs_ = build_pairs(views_, &warnings_);
  }

  const std::vector<std::string>& warnings() const { return warnings_; }

  double evaluate(const std::vector<Eigen::Vector2d>& disp, std::vector<Eigen::Vector2d>& grad) const {
    const std::size_t np = views_.plane_count();
    const int frames = views_.frames();
    std::vector<double> values(static_cast<std::size_t>(frames), 0.0);
    std::vector<std::vector<Eigen::Vector2d>> grads(static_cast<std::size_t>(frames),
                                                    std::vector<Eigen::Vector2d>(np, Eigen::Vector2d::Zero()));
    parallel_for(static_cast<std::size_t>(frames), [&](std::size_t ft) {
      values[ft] = evaluate_frame(static_cast<int>(ft), disp, grads[ft]);
    });
    grad.assign(np, Eigen::Vector2d::Zero());
    double value = 0.0;
    const double inv_t = 1.0 / frames;
    for (int t = 0; t < frames; ++t) {
      value += values[t] * inv_t;
      for (std::size_t p = 0; p < np; ++p) grad[p] += grads[t][p] * inv_t;
    }
    return value;
  }

 private:
  double evaluate_frame(int t, const std::vector<Eigen::Vector2d>& disp, std::vector<Eigen::Vector2d>& grad) const {
    double value = 0.0;
    for (const auto& ps : pairs_) {
      const auto& pa = views_.plane(ps.a);
      const auto& pb = views_.plane(ps.b);
      const auto& da = disp[ps.a];
      const auto& db = disp[ps.b];
      for (Eigen::Index i = 0; i < ps.xy_a.cols(); ++i) {
        const Sample sa = sample_pixel(pa, t, (ps.xy_a(0, i) + da.x()) / pa.du, (ps.xy_a(1, i) + da.y()) / pa.dv);
        const Sample sb = sample_pixel(pb, t, (ps.xy_b(0, i) + db.x()) / pb.du, (ps.xy_b(1, i) + db.y()) / pb.dv);
        const double diff = sa.value - sb.value;
        value += std::abs(diff);
        const double s = sign(diff);
        grad[ps.a] += s * Eigen::Vector2d(sa.d_dx, sa.d_dy);
        grad[ps.b] -= s * Eigen::Vector2d(sb.d_dx, sb.d_dy);
      }
    }
    const std::size_t depth = views_.sax.size();
    if (depth < 3) return value;
    // Shifted short-axis images and their displacement derivatives.
    const auto& ref = views_.sax.front();
    const std::size_t npx = static_cast<std::size_t>(ref.width) * ref.height;
    std::vector<std::vector<Sample>> shifted(depth, std::vector<Sample>(npx));
    for (std::size_t d = 0; d < depth; ++d) {
      shift_image(views_.sax[d], t, disp[d], shifted[d]);
    }
    for (std::size_t d = 1; d + 1 < depth; ++d) {
      Eigen::Vector2d g_prev = Eigen::Vector2d::Zero();
      Eigen::Vector2d g_mid = Eigen::Vector2d::Zero();
      Eigen::Vector2d g_next = Eigen::Vector2d::Zero();
      double sum = 0.0;
      for (std::size_t k = 0; k < npx; ++k) {
        const auto& a = shifted[d - 1][k];
        const auto& m = shifted[d][k];
        const auto& b = shifted[d + 1][k];
        const double res = a.value + b.value - 2.0 * m.value;
        sum += std::abs(res);
        const double s = sign(res);
        if (s == 0.0) continue;
        g_prev += s * Eigen::Vector2d(a.d_dx, a.d_dy);
        g_next += s * Eigen::Vector2d(b.d_dx, b.d_dy);
        g_mid -= 2.0 * s * Eigen::Vector2d(m.d_dx, m.d_dy);
      }
      value += 0.5 * sum;
      grad[d - 1] += 0.5 * g_prev;
      grad[d] += 0.5 * g_mid;
      grad[d + 1] += 0.5 * g_next;
    }
    return value;
  }

  const ViewSet& views_;
  std::vector<PairSamples> pairs_;
  std::vector<std::string> warnings_;
};

}  // namespace

void SlicePlane::validate() const {
  if (width < 1 || height < 1 || frames < 1) throw ValidationError("plane " + id + ": empty image");
  if (!(du > 0.0) || !(dv > 0.0)) throw ValidationError("plane " + id + ": pixel spacing must be positive");
  if (std::abs(axis_u.norm() - 1.0) > 1e-9 || std::abs(axis_v.norm() - 1.0) > 1e-9 ||
      std::abs(axis_u.dot(axis_v)) > 1e-9) {
    throw ValidationError("plane " + id + ": axes must be orthonormal");
  }
  const auto n = static_cast<std::size_t>(frames) * width * height;
  if (image.size() != n) throw ValidationError("plane " + id + ": image size does not match frames×height×width");
  if (!labels.empty() && labels.size() != n) throw ValidationError("plane " + id + ": label size mismatch");
  if (!displacement.allFinite()) throw ValidationError("plane " + id + ": non-finite displacement");
}

const SlicePlane& ViewSet::plane(std::size_t i) const {
  if (i < sax.size()) return sax[i];
  if (i == sax.size()) return la_2ch;
  if (i == sax.size() + 1) return la_4ch;
  throw ValidationError("ViewSet: plane index out of range");
}

SlicePlane& ViewSet::plane(std::size_t i) {
  return const_cast<SlicePlane&>(static_cast<const ViewSet&>(*this).plane(i));
}

std::vector<Eigen::Vector2d> ViewSet::displacements() const {
  std::vector<Eigen::Vector2d> d;
  d.reserve(plane_count());
  for (std::size_t i = 0; i < plane_count(); ++i) d.push_back(plane(i).displacement);
  return d;
}

void ViewSet::set_displacements(const std::vector<Eigen::Vector2d>& d) {
  if (d.size() != plane_count()) throw ValidationError("ViewSet: displacement count mismatch");
  for (std::size_t i = 0; i < d.size(); ++i) plane(i).displacement = d[i];
}

void ViewSet::validate() const {
  if (sax.size() < 3) throw ValidationError("ViewSet: need at least 3 short-axis slices");
  la_2ch.validate();
  la_4ch.validate();
  const auto& ref = sax.front();
  for (std::size_t d = 0; d < sax.size(); ++d) {
    const auto& s = sax[d];
    s.validate();
    if (s.frames != la_2ch.frames || la_4ch.frames != la_2ch.frames) {
      throw ValidationError("ViewSet: planes disagree on frame count");
    }
    if (s.width != ref.width || s.height != ref.height || s.du != ref.du || s.dv != ref.dv ||
        (s.axis_u - ref.axis_u).norm() > 1e-9 || (s.axis_v - ref.axis_v).norm() > 1e-9) {
      throw ValidationError("ViewSet: short-axis slices must share pixel grid and orientation");
    }
    const Vec3 offset = s.origin - ref.origin;
    if (std::abs(offset.dot(ref.axis_u)) > 1e-6 || std::abs(offset.dot(ref.axis_v)) > 1e-6) {
      throw ValidationError("ViewSet: short-axis slice " + s.id + " is shifted in-plane relative to the stack");
    }
    if (d > 0) {
      const double prev = (sax[d - 1].origin - ref.origin).dot(ref.normal());
      if (!(offset.dot(ref.normal()) > prev)) {
        throw ValidationError("ViewSet: short-axis slices must be ordered along their normal");
      }
    }
  }
}

Points intersection_samples(const SlicePlane& a, const SlicePlane& b) {
  const Vec3 na = a.normal();
  const Vec3 nb = b.normal();
  Vec3 dir = na.cross(nb);
  if (dir.norm() < 1e-9) throw ValidationError("intersection_samples: planes " + a.id + " and " + b.id + " are parallel");
  dir.normalize();
  Eigen::Matrix3d m;
  m.row(0) = na.transpose();
  m.row(1) = nb.transpose();
  m.row(2) = dir.transpose();
  const Vec3 p0 = m.partialPivLu().solve(Vec3(na.dot(a.origin), nb.dot(b.origin), 0.0));

  double s_lo = -std::numeric_limits<double>::infinity();
  double s_hi = std::numeric_limits<double>::infinity();
  auto clip = [&](const SlicePlane& p) {
    const Vec3 rel = p0 - p.origin;
    const std::array<std::pair<Vec3, double>, 2> axes{{{p.axis_u, p.extent_u()}, {p.axis_v, p.extent_v()}}};
    for (const auto& [axis, extent] : axes) {
      const double start = rel.dot(axis);
      const double rate = dir.dot(axis);
      if (std::abs(rate) < 1e-12) {
        if (start < -1e-9 || start > extent + 1e-9) {
          s_lo = 1.0;
          s_hi = 0.0;
        }
        continue;
      }
      double t0 = (0.0 - start) / rate;
      double t1 = (extent - start) / rate;
      if (t0 > t1) std::swap(t0, t1);
      s_lo = std::max(s_lo, t0);
      s_hi = std::min(s_hi, t1);
    }
  };
  clip(a);
  clip(b);
  if (!(s_hi >= s_lo - 1e-9)) return Points(3, 0);
  const double step = std::min({a.du, a.dv, b.du, b.dv});
  const auto count = static_cast<Eigen::Index>(std::floor((s_hi - s_lo) / step + 1e-9)) + 1;
  Points out(3, count);
  for (Eigen::Index i = 0; i < count; ++i) out.col(i) = p0 + (s_lo + static_cast<double>(i) * step) * dir;
  return out;
}

double bilinear_sample(const SlicePlane& plane, const Vec3& point, int frame) {
  if (frame < 0 || frame >= plane.frames) throw ValidationError("bilinear_sample: frame out of range");
  const Eigen::Vector2d xy = plane.project(point);
  return sample_pixel(plane, frame, (xy.x() + plane.displacement.x()) / plane.du,
                      (xy.y() + plane.displacement.y()) / plane.dv)
      .value;
}

std::uint8_t nearest_label_sample(const SlicePlane& plane, const Vec3& point, int frame) {
  if (!plane.has_labels()) throw ValidationError("plane " + plane.id + " has no labels");
  if (frame < 0 || frame >= plane.frames) throw ValidationError("nearest_label_sample: frame out of range");
  const Eigen::Vector2d xy = plane.project(point);
  const int c = std::clamp(static_cast<int>(std::lround((xy.x() + plane.displacement.x()) / plane.du)), 0, plane.width - 1);
  const int r = std::clamp(static_cast<int>(std::lround((xy.y() + plane.displacement.y()) / plane.dv)), 0, plane.height - 1);
  return plane.labels[plane.pixel_index(frame, r, c)];
}

McObjective mc_objective(const ViewSet& views) {
  const McEvaluator eval(views);
  McObjective out;
  out.value = eval.evaluate(views.displacements(), out.gradient);
  out.warnings = eval.warnings();
  return out;
}

McResult mc_optimize(const ViewSet& views, const McOptions& options) {
  if (options.epochs < 0) throw ValidationError("mc_optimize: epochs must be non-negative");
  const McEvaluator eval(views);
  const std::size_t np = views.plane_count();
  auto disp = views.displacements();
  Eigen::VectorXd params(2 * np);
  for (std::size_t p = 0; p < np; ++p) params.segment<2>(2 * p) = disp[p];
  AdamState adam(AdamOptions{options.lr});

  McResult result;
  result.best_objective = std::numeric_limits<double>::infinity();
  std::vector<Eigen::Vector2d> grad;
  Eigen::VectorXd flat_grad(2 * np);
  for (int epoch = 0; epoch <= options.epochs; ++epoch) {
    for (std::size_t p = 0; p < np; ++p) disp[p] = params.segment<2>(2 * p);
    const double value = eval.evaluate(disp, grad);
    if (!std::isfinite(value)) {
      throw Error("mc_optimize: objective became non-finite at epoch " + std::to_string(epoch));
    }
    result.trace.push_back(value);
    if (value < result.best_objective) {
      result.best_objective = value;
      result.displacements = disp;
    }
    if (epoch == options.epochs) break;
    for (std::size_t p = 0; p < np; ++p) flat_grad.segment<2>(2 * p) = grad[p];
    adam.step(params, flat_grad);
  }
  return result;
}

IntersectionQuality eval_intersections(const ViewSet& views) {
  views.validate();
  const auto pairs = build_pairs(views, nullptr);
  bool labelled = true;
  for (std::size_t p = 0; p < views.plane_count(); ++p) labelled = labelled && views.plane(p).has_labels();

  std::vector<double> ia;
  std::vector<double> ib;
  std::vector<std::uint8_t> la;
  std::vector<std::uint8_t> lb;
  for (int t = 0; t < views.frames(); ++t) {
    for (const auto& ps : pairs) {
      const auto& pa = views.plane(ps.a);
      const auto& pb = views.plane(ps.b);
      for (Eigen::Index i = 0; i < ps.xy_a.cols(); ++i) {
        const Vec3 p = pa.point_at(ps.xy_a(0, i), ps.xy_a(1, i));
        ia.push_back(bilinear_sample(pa, p, t));
        ib.push_back(bilinear_sample(pb, p, t));
        if (labelled) {
          la.push_back(nearest_label_sample(pa, p, t));
          lb.push_back(nearest_label_sample(pb, p, t));
        }
      }
    }
  }
  IntersectionQuality q;
  if (ia.size() < 2) throw Error("eval_intersections: no intersection samples");
  q.pearson_r = pearson_r(ia, ib);
  if (labelled) {
    std::set<std::uint8_t> present;
    for (auto l : la) if (l != kBackground) present.insert(l);
    for (auto l : lb) if (l != kBackground) present.insert(l);
    double sum = 0.0;
    for (auto l : present) sum += dice(la, lb, l);
    q.dice = present.empty() ? 1.0 : sum / static_cast<double>(present.size());
  }
  return q;
}

}  // namespace cardioshape
