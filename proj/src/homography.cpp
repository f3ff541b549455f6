// Copyright 2026 The bevloss Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "bevloss/homography.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Dense>

namespace bevloss {

void validate(const PointCorrespondenceSet& pairs) {
  if (pairs.sources.size() != pairs.targets.size()) {
    throw std::invalid_argument("correspondence set: size mismatch");
  }
  if (pairs.size() < 4) {
    throw std::invalid_argument(
        "correspondence set: at least 4 point pairs required");
  }
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!pairs.sources[i].array().isFinite().all() ||
        !pairs.targets[i].array().isFinite().all()) {
      throw std::invalid_argument("correspondence set: non-finite coordinate");
    }
    for (std::size_t j = i + 1; j < pairs.size(); ++j) {
      if ((pairs.sources[i] - pairs.sources[j]).norm() <
          kDuplicatePointEpsilon) {
        throw std::invalid_argument(
            "correspondence set: duplicated source point");
      }
    }
  }
}

const char* to_string(EstimateError error) {
  switch (error) {
    case EstimateError::degenerate_configuration:
      return "degenerate configuration";
    case EstimateError::ill_conditioned_gradient:
      return "ill-conditioned gradient";
  }
  return "unknown";
}

namespace {

struct Normalization {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  double scale = 1.0;
  std::vector<Eigen::Vector2d> points;
  bool ok = false;
};

Normalization hartley_normalize(const std::vector<Eigen::Vector2d>& points) {
  Normalization out;
  const double n = static_cast<double>(points.size());
  for (const auto& p : points) out.centroid += p;
  out.centroid /= n;
  double mean_dist = 0.0;
  for (const auto& p : points) mean_dist += (p - out.centroid).norm();
  mean_dist /= n;
  if (mean_dist < 1e-12) return out;  // coincident points
  out.scale = std::numbers::sqrt2 / mean_dist;
  out.points.reserve(points.size());
  for (const auto& p : points) out.points.push_back(out.scale * (p - out.centroid));
  out.ok = true;
  return out;
}

bool collinear(const std::vector<Eigen::Vector2d>& normalized) {
  // Normalized sets are centered, so the scatter matrix has zero mean.
  Eigen::Matrix2d scatter = Eigen::Matrix2d::Zero();
  for (const auto& p : normalized) scatter += p * p.transpose();
  scatter /= static_cast<double>(normalized.size());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> eig(scatter);
  const double lo = eig.eigenvalues()(0), hi = eig.eigenvalues()(1);
  return hi <= 0.0 || lo / hi < kCollinearityEpsilon;
}

Eigen::Matrix3d similarity_transform(const Eigen::Vector2d& centroid,
                                     double scale) {
  Eigen::Matrix3d t;
  t << scale, 0.0, -scale * centroid.x(), 0.0, scale, -scale * centroid.y(),
      0.0, 0.0, 1.0;
  return t;
}

Eigen::Matrix3d similarity_inverse(const Eigen::Vector2d& centroid,
                                   double scale) {
  Eigen::Matrix3d t;
  t << 1.0 / scale, 0.0, centroid.x(), 0.0, 1.0 / scale, centroid.y(), 0.0,
      0.0, 1.0;
  return t;
}

Eigen::Matrix3d reshape_row_major(const Eigen::Matrix<double, 9, 1>& v) {
  Eigen::Matrix3d m;
  m << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);
  return m;
}

}  // namespace

SolveResult solve_dlt(const PointCorrespondenceSet& pairs) {
  validate(pairs);
  SolveResult result;
  DltSolve& s = result.solve;
  const std::size_t n = pairs.size();

  Normalization src = hartley_normalize(pairs.sources);
  Normalization dst = hartley_normalize(pairs.targets);
  if (!src.ok || !dst.ok || collinear(src.points) || collinear(dst.points)) {
    result.error = EstimateError::degenerate_configuration;
    return result;
  }
  s.src_centroid = src.centroid;
  s.dst_centroid = dst.centroid;
  s.src_scale = src.scale;
  s.dst_scale = dst.scale;
  s.src_normalized = std::move(src.points);
  s.dst_normalized = std::move(dst.points);

  s.design.resize(2 * static_cast<Eigen::Index>(n), 9);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = s.src_normalized[i].x(), b = s.src_normalized[i].y();
    const double c = s.dst_normalized[i].x(), e = s.dst_normalized[i].y();
    s.design.row(2 * i) << -a, -b, -1.0, 0.0, 0.0, 0.0, c * a, c * b, c;
    s.design.row(2 * i + 1) << 0.0, 0.0, 0.0, -a, -b, -1.0, e * a, e * b, e;
  }

  const Eigen::Matrix<double, 9, 9> normal = s.design.transpose() * s.design;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix<double, 9, 9>> eig(normal);
  s.eigenvalues = eig.eigenvalues();
  s.eigenvectors = eig.eigenvectors();

  const double sv0 = std::sqrt(std::max(s.eigenvalues(0), 0.0));
  const double sv1 = std::sqrt(std::max(s.eigenvalues(1), 0.0));
  if (sv1 < 1e-12 || sv0 / sv1 > 1.0 - kConditionEpsilon) {
    result.error = EstimateError::degenerate_configuration;
    return result;
  }

  const Eigen::Matrix3d normalized_h =
      reshape_row_major(s.eigenvectors.col(0));
  const Eigen::Matrix3d raw = similarity_inverse(s.dst_centroid, s.dst_scale) *
                              normalized_h *
                              similarity_transform(s.src_centroid, s.src_scale);
  s.raw_norm = raw.norm();
  const Eigen::Matrix3d unit = raw / s.raw_norm;
  const Eigen::Vector2d& first_source = pairs.sources.front();
  const double w0 = unit(2, 0) * first_source.x() +
                    unit(2, 1) * first_source.y() + unit(2, 2);
  s.gauge_sign = w0 < 0.0 ? -1.0 : 1.0;
  s.h = s.gauge_sign * unit;
  result.ok = true;
  return result;
}

EstimateResult estimate_homography(const PointCorrespondenceSet& pairs) {
  const SolveResult solved = solve_dlt(pairs);
  EstimateResult out;
  out.ok = solved.ok;
  out.error = solved.error;
  if (solved.ok) out.h = solved.solve.h;
  return out;
}

Eigen::Vector2d apply_homography(const Homography3x3& h,
                                 const Eigen::Vector2d& point) {
  const Eigen::Vector3d mapped = h * Eigen::Vector3d(point.x(), point.y(), 1.0);
  if (std::abs(mapped.z()) < kHomogeneousScaleEpsilon) {
    throw std::domain_error("apply_homography: vanishing homogeneous scale");
  }
  return {mapped.x() / mapped.z(), mapped.y() / mapped.z()};
}

void apply_homography_backward(const Homography3x3& h,
                               const Eigen::Vector2d& point,
                               const Eigen::Vector2d& d_out,
                               Eigen::Matrix3d* dh_accum,
                               Eigen::Vector2d* dpoint_accum) {
  const Eigen::Vector3d hom(point.x(), point.y(), 1.0);
  const Eigen::Vector3d mapped = h * hom;
  const double w = mapped.z();
  const Eigen::Vector2d out(mapped.x() / w, mapped.y() / w);
  if (dh_accum != nullptr) {
    dh_accum->row(0) += d_out.x() / w * hom.transpose();
    dh_accum->row(1) += d_out.y() / w * hom.transpose();
    dh_accum->row(2) -=
        (d_out.x() * out.x() + d_out.y() * out.y()) / w * hom.transpose();
  }
  if (dpoint_accum != nullptr) {
    for (int col = 0; col < 2; ++col) {
      const double ju = (h(0, col) - out.x() * h(2, col)) / w;
      const double jv = (h(1, col) - out.y() * h(2, col)) / w;
      (*dpoint_accum)(col) += d_out.x() * ju + d_out.y() * jv;
    }
  }
}

namespace {

// Pulls normalized-coordinate gradients plus the gradients on the similarity
// parameters (scale, centroid) back to the raw points of one set.
std::vector<Eigen::Vector2d> normalization_backward(
    const std::vector<Eigen::Vector2d>& normalized, double scale,
    const std::vector<Eigen::Vector2d>& d_normalized, double d_scale,
    const Eigen::Vector2d& d_centroid) {
  const std::size_t n = normalized.size();
  const double inv_n = 1.0 / static_cast<double>(n);
  const double mean_dist = std::numbers::sqrt2 / scale;

  // Total gradient on the scale, including the dependence of each normalized
  // point on it: normalized_i = scale * (p_i - centroid).
  double g_scale = d_scale;
  for (std::size_t i = 0; i < n; ++i) {
    g_scale += d_normalized[i].dot(normalized[i]) / scale;
  }
  Eigen::Vector2d g_centroid = d_centroid;
  for (std::size_t i = 0; i < n; ++i) g_centroid -= scale * d_normalized[i];

  std::vector<Eigen::Vector2d> unit(n);
  Eigen::Vector2d unit_mean = Eigen::Vector2d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const double len = normalized[i].norm();
    unit[i] = len > 1e-15 ? (normalized[i] / len).eval()
                          : Eigen::Vector2d::Zero().eval();
    unit_mean += unit[i];
  }
  unit_mean *= inv_n;

  const double scale_coeff = g_scale * scale / mean_dist * inv_n;
  std::vector<Eigen::Vector2d> d_points(n);
  for (std::size_t i = 0; i < n; ++i) {
    d_points[i] = scale * d_normalized[i] + inv_n * g_centroid +
                  scale_coeff * (unit_mean - unit[i]);
  }
  return d_points;
}

}  // namespace

HomographyGradients dlt_backward(const DltSolve& solve,
                                 const Eigen::Matrix3d& upstream) {
  HomographyGradients out;
  const double sv0 = std::sqrt(std::max(solve.eigenvalues(0), 0.0));
  const double sv1 = std::sqrt(std::max(solve.eigenvalues(1), 0.0));
  if (sv1 - sv0 < kEigenGapEpsilon) {
    out.error = EstimateError::ill_conditioned_gradient;
    return out;
  }

  // Gauge fix backward: h = sign * raw / ||raw||; the component of the
  // upstream gradient along the gauge direction has no effect and is removed.
  const Eigen::Matrix3d unit = solve.gauge_sign * solve.h;
  const Eigen::Matrix3d g_unit = solve.gauge_sign * upstream;
  const double along = (g_unit.array() * unit.array()).sum();
  const Eigen::Matrix3d g_raw = (g_unit - along * unit) / solve.raw_norm;

  // Denormalization backward: raw = T_dst^-1 * N * T_src.
  const Eigen::Matrix3d t_src =
      similarity_transform(solve.src_centroid, solve.src_scale);
  const Eigen::Matrix3d t_dst_inv =
      similarity_inverse(solve.dst_centroid, solve.dst_scale);
  const Eigen::Matrix3d normalized_h =
      reshape_row_major(solve.eigenvectors.col(0));

  const Eigen::Matrix3d g_normalized_h =
      t_dst_inv.transpose() * g_raw * t_src.transpose();
  const Eigen::Matrix3d g_t_src =
      (t_dst_inv * normalized_h).transpose() * g_raw;
  const Eigen::Matrix3d g_t_dst_inv =
      g_raw * (normalized_h * t_src).transpose();

  // T_dst^-1 = [[1/s, 0, cx], [0, 1/s, cy], [0, 0, 1]].
  const double g_dst_scale =
      -(g_t_dst_inv(0, 0) + g_t_dst_inv(1, 1)) / (solve.dst_scale * solve.dst_scale);
  const Eigen::Vector2d g_dst_centroid(g_t_dst_inv(0, 2), g_t_dst_inv(1, 2));

  // T_src = [[s, 0, -s cx], [0, s, -s cy], [0, 0, 1]].
  const double g_src_scale = g_t_src(0, 0) + g_t_src(1, 1) -
                             g_t_src(0, 2) * solve.src_centroid.x() -
                             g_t_src(1, 2) * solve.src_centroid.y();
  const Eigen::Vector2d g_src_centroid(-solve.src_scale * g_t_src(0, 2),
                                       -solve.src_scale * g_t_src(1, 2));

  // Eigenvector backward: dh = (lambda_0 I - M)^+ dM h with M = A^T A.
  Eigen::Matrix<double, 9, 1> g_h9;
  g_h9 << g_normalized_h(0, 0), g_normalized_h(0, 1), g_normalized_h(0, 2),
      g_normalized_h(1, 0), g_normalized_h(1, 1), g_normalized_h(1, 2),
      g_normalized_h(2, 0), g_normalized_h(2, 1), g_normalized_h(2, 2);

  Eigen::Matrix<double, 9, 1> pinv_g = Eigen::Matrix<double, 9, 1>::Zero();
  for (int i = 1; i < 9; ++i) {
    const Eigen::Matrix<double, 9, 1> v = solve.eigenvectors.col(i);
    pinv_g += v * (v.dot(g_h9) / (solve.eigenvalues(0) - solve.eigenvalues(i)));
  }
  const Eigen::Matrix<double, 9, 1> h9 = solve.eigenvectors.col(0);
  const Eigen::Matrix<double, 9, 9> p = pinv_g * h9.transpose();
  const Eigen::MatrixXd g_design = solve.design * (p + p.transpose());

  // Design-row backward onto the normalized coordinates.
  const std::size_t n = solve.src_normalized.size();
  std::vector<Eigen::Vector2d> g_src_n(n), g_dst_n(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double a = solve.src_normalized[i].x(), b = solve.src_normalized[i].y();
    const double c = solve.dst_normalized[i].x(), e = solve.dst_normalized[i].y();
    const auto w1 = g_design.row(2 * i);
    const auto w2 = g_design.row(2 * i + 1);
    g_src_n[i].x() = -w1(0) + c * w1(6) - w2(3) + e * w2(6);
    g_src_n[i].y() = -w1(1) + c * w1(7) - w2(4) + e * w2(7);
    g_dst_n[i].x() = a * w1(6) + b * w1(7) + w1(8);
    g_dst_n[i].y() = a * w2(6) + b * w2(7) + w2(8);
  }

  out.d_sources = normalization_backward(solve.src_normalized, solve.src_scale,
                                         g_src_n, g_src_scale, g_src_centroid);
  out.d_targets = normalization_backward(solve.dst_normalized, solve.dst_scale,
                                         g_dst_n, g_dst_scale, g_dst_centroid);
  out.ok = true;
  return out;
}

HomographyGradients estimate_homography_backward(
    const PointCorrespondenceSet& pairs, const Eigen::Matrix3d& upstream) {
  const SolveResult solved = solve_dlt(pairs);
  if (!solved.ok) {
    HomographyGradients out;
    out.error = solved.error;
    return out;
  }
  return dlt_backward(solved.solve, upstream);
}

}  // namespace bevloss
