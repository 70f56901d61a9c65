#pragma once

#include "evmesh/model.hpp"
#include "evmesh/simulator.hpp"

#include <cstdint>
#include <vector>

namespace evmesh {

// Single-coordinate linear sweep from `base` to base + delta * e_index.
std::vector<Keyframe> sweep_trajectory(const VecX& base, int index, double delta, double duration);

/// Smooth random motion: control points drawn uniformly in [-range_d, range_d]
/// per coordinate every `key_interval` seconds (the first one is `start`),
/// Catmull-Rom interpolated and resampled every `sample_dt` seconds.
struct RandomMotionSpec {
  double duration = 0.5;
  double key_interval = 0.25;
  double sample_dt = 0.005;
  std::uint64_t seed = 0;
};
std::vector<Keyframe> random_trajectory(const VecX& start, const VecX& range,
                                        const RandomMotionSpec& spec);

// `range` over every pose coordinate (PCA coefficients for templates with a basis).
std::vector<Keyframe> pca_random_trajectory(const KinematicTemplate& tmpl, double range,
                                            const RandomMotionSpec& spec);
// First three coordinates are elbow angles (radians), the rest hand PCA coefficients.
std::vector<Keyframe> arm_hand_trajectory(const KinematicTemplate& tmpl, double elbow_range,
                                          double hand_range, const RandomMotionSpec& spec);

}  // namespace evmesh
