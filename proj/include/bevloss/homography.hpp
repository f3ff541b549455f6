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

#pragma once

#include <vector>

#include <Eigen/Core>

namespace bevloss {

// Degeneracy thresholds, applied to the Hartley-normalized DLT system.
inline constexpr double kConditionEpsilon = 1e-6;     // smallest-sv ratio guard
inline constexpr double kEigenGapEpsilon = 1e-9;      // sv gap for gradients
inline constexpr double kHomogeneousScaleEpsilon = 1e-12;
inline constexpr double kCollinearityEpsilon = 1e-10;
inline constexpr double kDuplicatePointEpsilon = 1e-9;

/// Gauge-fixed plane-to-plane mapping: unit Frobenius norm, sign chosen so the
/// third row applied to the first source point gives a positive scale.
using Homography3x3 = Eigen::Matrix3d;

/// Paired 2D points: `targets[i] ~ H * sources[i]`. At least 4 pairs, no
/// duplicated source points.
struct PointCorrespondenceSet {
  std::vector<Eigen::Vector2d> sources;
  std::vector<Eigen::Vector2d> targets;

  std::size_t size() const { return sources.size(); }
};

/// Throws std::invalid_argument when the set violates its invariants.
void validate(const PointCorrespondenceSet& pairs);

enum class EstimateError {
  degenerate_configuration,
  ill_conditioned_gradient,
};

const char* to_string(EstimateError error);

/// Full state of one DLT solve, kept so gradients can be propagated back
/// through it without re-solving.
struct DltSolve {
  Homography3x3 h = Homography3x3::Identity();
  double gauge_sign = 1.0;
  double raw_norm = 1.0;  // Frobenius norm of the denormalized solution

  // Hartley normalization of each point set: normalized = scale * (p - centroid).
  Eigen::Vector2d src_centroid = Eigen::Vector2d::Zero();
  Eigen::Vector2d dst_centroid = Eigen::Vector2d::Zero();
  double src_scale = 1.0;
  double dst_scale = 1.0;
  std::vector<Eigen::Vector2d> src_normalized;
  std::vector<Eigen::Vector2d> dst_normalized;

  // Eigen-decomposition of A^T A for the normalized design matrix A.
  Eigen::MatrixXd design;                       // 2n x 9
  Eigen::Matrix<double, 9, 9> eigenvectors;     // columns, eigenvalues ascending
  Eigen::Matrix<double, 9, 1> eigenvalues;
};

struct SolveResult {
  bool ok = false;
  EstimateError error = EstimateError::degenerate_configuration;
  DltSolve solve;
};

/// Solves the 2n x 9 DLT system for the correspondence set on
/// Hartley-normalized coordinates and keeps the solve state.
SolveResult solve_dlt(const PointCorrespondenceSet& pairs);

struct EstimateResult {
  bool ok = false;
  EstimateError error = EstimateError::degenerate_configuration;
  Homography3x3 h = Homography3x3::Identity();
};

/// Gauge-fixed minimizer of ||A vec(H)|| over unit vec(H).
EstimateResult estimate_homography(const PointCorrespondenceSet& pairs);

/// Dehomogenized H * [p; 1]. Invariant to rescaling of H. Throws
/// std::domain_error when the homogeneous scale vanishes.
Eigen::Vector2d apply_homography(const Homography3x3& h,
                                 const Eigen::Vector2d& point);

/// Accumulates the pullback of `d_out` through apply_homography into the
/// gradient wrt H and (optionally) wrt the input point.
void apply_homography_backward(const Homography3x3& h,
                               const Eigen::Vector2d& point,
                               const Eigen::Vector2d& d_out,
                               Eigen::Matrix3d* dh_accum,
                               Eigen::Vector2d* dpoint_accum);

struct HomographyGradients {
  bool ok = false;
  EstimateError error = EstimateError::ill_conditioned_gradient;
  std::vector<Eigen::Vector2d> d_sources;
  std::vector<Eigen::Vector2d> d_targets;
};

/// Pullback of `upstream` (the gradient of a scalar wrt the gauge-fixed H)
/// onto every source and target coordinate, by implicit differentiation of the
/// smallest eigenvector of A^T A. The gauge direction is projected out.
HomographyGradients dlt_backward(const DltSolve& solve,
                                 const Eigen::Matrix3d& upstream);

/// Convenience wrapper: re-solves and applies dlt_backward.
HomographyGradients estimate_homography_backward(
    const PointCorrespondenceSet& pairs, const Eigen::Matrix3d& upstream);

}  // namespace bevloss
