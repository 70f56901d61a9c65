#pragma once

#include "evmesh/geometry.hpp"

#include <vector>

namespace evmesh {

struct JointSample {
  double t = 0.0;
  std::vector<Vec3> joints;  // meters
};
using JointTrajectory = std::vector<JointSample>;

/// For each estimate, the index of the ground-truth sample nearest in time,
/// or -1 when none lies within `tolerance` seconds. gt must be time-sorted.
std::vector<int> match_nearest(const JointTrajectory& est, const JointTrajectory& gt,
                               double tolerance);

// Per-(sample, joint) Euclidean errors in millimeters for already paired
// trajectories (est[i] against gt[i]). Throws std::domain_error on joint
// count or length mismatch.
std::vector<std::vector<double>> joint_errors_mm(const JointTrajectory& est,
                                                 const JointTrajectory& gt);

struct MpjpeResult {
  double mean_mm = 0.0;    // over all (sample, joint) pairs
  double median_mm = 0.0;  // median over samples of the per-sample mean
  int samples = 0;
};
MpjpeResult mpjpe(const JointTrajectory& est, const JointTrajectory& gt);

// Fraction of (sample, joint) pairs with error <= each threshold (mm).
std::vector<double> pck_curve(const JointTrajectory& est, const JointTrajectory& gt,
                              const std::vector<double>& thresholds_mm);

// 0, 1, ..., 50 mm.
std::vector<double> default_pck_thresholds();

// Trapezoidal area under a PCK curve over uniformly spaced thresholds,
// normalized by the threshold span. Throws std::domain_error otherwise.
double auc(const std::vector<double>& pck, const std::vector<double>& thresholds_mm);

/// Pairs estimates with their nearest ground-truth samples (dropping
/// unmatched ones) so the functions above can be applied.
struct MatchedPair {
  JointTrajectory est;
  JointTrajectory gt;
  int unmatched = 0;
};
MatchedPair pair_by_time(const JointTrajectory& est, const JointTrajectory& gt, double tolerance);

}  // namespace evmesh
