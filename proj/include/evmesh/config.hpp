#pragma once

#include "evmesh/geometry.hpp"
#include "evmesh/image.hpp"
#include "evmesh/model.hpp"
#include "evmesh/simulator.hpp"
#include "evmesh/tracker.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace evmesh {

/// Raised for any invalid configuration value; the message starts with the
/// dotted field name.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct CameraSettings {
  double fx = 1000.0, fy = 1000.0, cx = 640.0, cy = 360.0;
  int width = 1280, height = 720;
  Eigen::Isometry3d world_from_camera = Eigen::Isometry3d::Identity();

  PinholeCamera make() const;
};

struct TemplateSettings {
  std::string builtin = "finger3";  // used when path is empty
  std::string path;

  KinematicTemplate load() const;
};

struct BackgroundSettings {
  std::string path;  // PGM or PNG; empty selects the procedural texture
  std::optional<std::uint64_t> seed;  // procedural texture seed (defaults to the run seed)
  double lo = 0.03, hi = 0.97;
};

struct SimulationSettings {
  SimulatorConfig config;
  ShadingConfig shading;
  BackgroundSettings background;
  int dump_every = 0;             // write modality dumps every n-th sample (0: never)
  std::string events_file = "events.csv";  // ".bin" suffix selects the binary format
};

struct TrajectorySettings {
  std::string generator = "sweep";  // keyframes | sweep | pca_random | arm_hand
  std::vector<Keyframe> keyframes;
  // sweep
  int index = 0;
  double delta = 0.6;
  std::vector<double> start;  // empty: zero pose
  // random generators
  double duration = 0.5;
  double range = 1.0;
  double elbow_range = 0.3;
  double hand_range = 1.0;
  double key_interval = 0.25;
  double sample_dt = 0.005;
};

struct TrackerSettings {
  TrackerConfig config;
  // Scene-relative defaults, as multiples of the template bounding-box
  // diagonal; explicit absolute values in the config take precedence.
  double lateral_scale = 0.01;  // sqrt(alpha) / diagonal
  double longitudinal_scale = 0.25;  // beta / diagonal
  double outlier_fraction = 0.05;   // d_lat_max / diagonal
  std::optional<double> alpha, beta, d_lat_max;

  // Likelihood parameters resolved for a template of the given diagonal.
  LikelihoodParams resolve(double diagonal) const;
};

struct EvaluationSettings {
  double match_tolerance = 0.005;  // seconds
};

struct AblationSettings {
  std::vector<std::uint64_t> seeds = {1, 2, 3};
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string output_dir = "out";
  CameraSettings camera;
  TemplateSettings templ;
  SimulationSettings simulator;
  TrajectorySettings trajectory;
  TrackerSettings tracker;
  EvaluationSettings evaluation;
  AblationSettings ablation;

  // Throws ConfigError naming the first invalid field.
  void validate() const;
};

// Relative paths inside the file are resolved against its directory.
RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& json_text, const std::string& base_dir = ".");

std::vector<Keyframe> build_trajectory(const TrajectorySettings& settings,
                                       const KinematicTemplate& tmpl, std::uint64_t seed);
ImageD build_background(const BackgroundSettings& settings, const CameraSettings& camera,
                        std::uint64_t run_seed);

}  // namespace evmesh
