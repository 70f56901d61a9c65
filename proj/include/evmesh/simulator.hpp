#pragma once

#include "evmesh/geometry.hpp"
#include "evmesh/image.hpp"
#include "evmesh/model.hpp"
#include "evmesh/rng.hpp"

#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

namespace evmesh {

struct Event {
  double t = 0.0;
  std::uint16_t x = 0;
  std::uint16_t y = 0;
  std::int8_t polarity = 1;

  friend bool operator==(const Event&, const Event&) = default;
};

// Total order used for the final stream sort.
inline bool event_less(const Event& a, const Event& b) {
  if (a.t != b.t) return a.t < b.t;
  if (a.y != b.y) return a.y < b.y;
  if (a.x != b.x) return a.x < b.x;
  return a.polarity < b.polarity;
}

enum class EventTimestamp {
  SampleEnd,  // every signal event carries the current sample time
  Crossing,   // linear interpolation of the threshold crossing inside the interval
};

struct SimulatorConfig {
  double c_pos = 0.5;
  double c_neg = 0.5;
  double threshold_sigma = 0.0004;
  double sp_rate = 1e-5;
  double max_pixel_disp = 1.0;
  double dt_min = 1e-6;
  double dt_max = 0.01;
  std::uint64_t rng_seed = 0;
  // Compare against a per-pixel reference updated on firing instead of the
  // previous sample (allows several events per pixel per sample).
  bool reference_memory = false;
  EventTimestamp timestamp = EventTimestamp::Crossing;

  // Throws std::invalid_argument naming the offending field.
  void validate() const;
};

struct ShadingConfig {
  double albedo = 0.75;
  double ambient = 0.25;
  Vec3 light_direction = Vec3(-0.35, -0.45, -1.0).normalized();  // toward the light
};

inline constexpr double kLogEpsilon = 1e-4;
inline constexpr double kNearPlane = 1e-3;

/// Z-buffer result: owning face and perspective-correct barycentrics per pixel.
struct Raster {
  Image<double> depth;  // camera-frame z, +inf on background
  Image<int> face;      // -1 on background
  Image<double> bary1;  // weight of the face's second vertex
  Image<double> bary2;  // weight of the face's third vertex
};

struct FrameModalities {
  ImageD log_brightness;
  ImageD depth;
  Image<Vec3> normals;       // zero on background
  Image<Vec2> motion_field;  // pixels / second, zero on background
};

struct GroundTruthRecord {
  double t = 0.0;
  VecX theta;
  std::vector<Vec3> joints;
};

struct Keyframe {
  double t = 0.0;
  VecX theta;
};

Raster rasterize(const PosedMesh& mesh, const std::vector<FaceIndices>& faces,
                 const PinholeCamera& camera);
ImageD shade_log_brightness(const Raster& raster, const PosedMesh& mesh,
                            const ImageD& background, const ShadingConfig& shading);
// ln(background + eps), and shading against that precomputed image.
ImageD log_background(const ImageD& background);
ImageD shade_log_brightness_cached(const Raster& raster, const PosedMesh& mesh,
                                   const ImageD& log_bg, const ShadingConfig& shading);

// Full modalities (motion field left zero; see motion_field()).
FrameModalities render(const PosedMesh& mesh, const std::vector<FaceIndices>& faces,
                       const PinholeCamera& camera, const ImageD& background,
                       const ShadingConfig& shading);

// Image-plane velocity of the surface point seen at each pixel of `raster_a`
// when the mesh moves to pose b over `dt` seconds.
Image<Vec2> motion_field(const Raster& raster_a, const PosedMesh& b,
                         const std::vector<FaceIndices>& faces, double dt,
                         const PinholeCamera& camera);
Image<Vec2> motion_field(const KinematicTemplate& tmpl, const VecX& theta_a, const VecX& theta_b,
                         double dt, const PinholeCamera& camera);

// budget / max |field|, clamped to [dt_min, dt_max]; dt_max for a static field.
double adaptive_dt(const Image<Vec2>& field, double budget, double dt_min, double dt_max);

struct ContrastThresholds {
  double positive;
  double negative;
};
// Per-pixel thresholds drawn for sample `step`.
ContrastThresholds contrast_thresholds(const SimulatorConfig& config, const CounterRng& rng,
                                       std::uint64_t step, std::uint64_t pixel);

// Events between two log-brightness samples. `reference` is only used (and
// updated) in reference-memory mode.
std::vector<Event> generate_events(const ImageD& prev, const ImageD& cur, double t_prev,
                                   double t_cur, const SimulatorConfig& config,
                                   const CounterRng& rng, std::uint64_t step,
                                   ImageD* reference = nullptr);

VecX interpolate_keyframes(const std::vector<Keyframe>& keyframes, double t);

struct SimulationResult {
  std::vector<Event> events;
  std::vector<GroundTruthRecord> ground_truth;
  // Largest projected vertex displacement (pixels) between consecutive samples.
  double max_step_displacement = 0.0;
};

// Receives the modalities of every `every`-th sample as soon as its motion
// field is known, so dumps never pile up in memory. The last sample has no
// lookahead and arrives with an empty motion field.
struct DumpSink {
  int every = 0;
  std::function<void(std::size_t index, double t, const FrameModalities&)> write;
};

SimulationResult simulate_sequence(const KinematicTemplate& tmpl,
                                   const std::vector<Keyframe>& keyframes,
                                   const PinholeCamera& camera, const ImageD& background,
                                   const ShadingConfig& shading, const SimulatorConfig& config,
                                   const DumpSink& dumps = {});

// Event stream files: CSV `t,x,y,p` or length-prefixed little-endian binary
// (u64 count, then f64 t / u16 x / u16 y / i8 p records) for paths ending in .bin.
void write_events(const std::vector<Event>& events, const std::string& path);
std::vector<Event> read_events(const std::string& path);

void write_ground_truth(const std::vector<GroundTruthRecord>& records, const std::string& path);
std::vector<GroundTruthRecord> read_ground_truth(const std::string& path);

}  // namespace evmesh
