#include "evmesh/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <string>

namespace evmesh {

namespace {

// Counter-RNG streams; each random quantity gets its own stream so adding
// one does not shift the others.
enum Stream : std::uint64_t {
  kPositiveThreshold = 1,
  kNegativeThreshold = 2,
  kNoiseFire = 3,
  kNoisePolarity = 4,
  kNoiseTime = 5,
};

void check(bool ok, const std::string& field, const std::string& rule) {
  if (!ok) throw std::invalid_argument("simulator." + field + ": " + rule);
}

}  // namespace

void SimulatorConfig::validate() const {
  check(c_pos > 0.0, "c_pos", "must be > 0");
  check(c_neg > 0.0, "c_neg", "must be > 0");
  check(threshold_sigma >= 0.0, "threshold_sigma", "must be >= 0");
  check(sp_rate >= 0.0 && sp_rate <= 1.0, "sp_rate", "must lie in [0, 1]");
  check(max_pixel_disp > 0.0, "max_pixel_disp", "must be > 0");
  check(dt_min > 0.0, "dt_min", "must be > 0");
  check(dt_max >= dt_min, "dt_max", "must be >= dt_min");
}

ContrastThresholds contrast_thresholds(const SimulatorConfig& config, const CounterRng& rng,
                                       std::uint64_t step, std::uint64_t pixel) {
  double pos = config.c_pos;
  double neg = config.c_neg;
  if (config.threshold_sigma > 0.0) {
    pos += config.threshold_sigma * rng.normal(kPositiveThreshold, step, pixel);
    neg += config.threshold_sigma * rng.normal(kNegativeThreshold, step, pixel);
  }
  return {std::max(pos, 1e-6), std::max(neg, 1e-6)};
}

std::vector<Event> generate_events(const ImageD& prev, const ImageD& cur, double t_prev,
                                   double t_cur, const SimulatorConfig& config,
                                   const CounterRng& rng, std::uint64_t step, ImageD* reference) {
  if (prev.width() != cur.width() || prev.height() != cur.height()) {
    throw std::invalid_argument("generate_events: image sizes differ");
  }
  const bool memory = config.reference_memory && reference != nullptr;
  const int w = cur.width();
  const double span = t_cur - t_prev;
  std::vector<Event> events;

  auto stamp = [&](double from, double to, double level) {
    if (config.timestamp == EventTimestamp::SampleEnd || to == from) return t_cur;
    const double frac = std::clamp((level - from) / (to - from), 0.0, 1.0);
    return t_prev + frac * span;
  };
  auto emit = [&](size_t i, double t, int polarity) {
    events.push_back({t, static_cast<std::uint16_t>(i % w), static_cast<std::uint16_t>(i / w),
                      static_cast<std::int8_t>(polarity)});
  };

  for (size_t i = 0; i < cur.size(); ++i) {
    const double base = memory ? (*reference)[i] : prev[i];
    const double delta = cur[i] - base;
    if (delta == 0.0) continue;
    const auto c = contrast_thresholds(config, rng, step, i);
    if (!memory) {
      if (delta >= c.positive) emit(i, stamp(prev[i], cur[i], prev[i] + c.positive), +1);
      else if (-delta >= c.negative) emit(i, stamp(prev[i], cur[i], prev[i] - c.negative), -1);
      continue;
    }
    double ref = base;
    while (cur[i] - ref >= c.positive) {
      ref += c.positive;
      emit(i, stamp(prev[i], cur[i], ref), +1);
    }
    while (ref - cur[i] >= c.negative) {
      ref -= c.negative;
      emit(i, stamp(prev[i], cur[i], ref), -1);
    }
    (*reference)[i] = ref;
  }

  if (config.sp_rate > 0.0) {
    // Bernoulli(sp_rate) per pixel, visited by geometric gaps between firing
    // pixels instead of one draw per pixel.
    const double log_miss = std::log1p(-config.sp_rate);
    std::uint64_t draw = 0;
    for (size_t i = 0;; ++i) {
      if (config.sp_rate < 1.0) {
        const double u = rng.uniform(kNoiseFire, step, draw++);
        const double gap = std::floor(std::log1p(-u) / log_miss);
        if (gap >= static_cast<double>(cur.size() - i)) break;
        i += static_cast<size_t>(gap);
      }
      if (i >= cur.size()) break;
      const int polarity = rng.uniform(kNoisePolarity, step, i) < 0.5 ? -1 : 1;
      emit(i, t_prev + rng.uniform(kNoiseTime, step, i) * span, polarity);
    }
  }
  return events;
}

VecX interpolate_keyframes(const std::vector<Keyframe>& keyframes, double t) {
  if (keyframes.empty()) throw std::domain_error("interpolate_keyframes: no keyframes");
  if (t <= keyframes.front().t) return keyframes.front().theta;
  if (t >= keyframes.back().t) return keyframes.back().theta;
  const auto it = std::upper_bound(keyframes.begin(), keyframes.end(), t,
                                   [](double v, const Keyframe& k) { return v < k.t; });
  const Keyframe& b = *it;
  const Keyframe& a = *(it - 1);
  const double u = (t - a.t) / (b.t - a.t);
  return (1.0 - u) * a.theta + u * b.theta;
}

namespace {

struct Sample {
  double t;
  VecX theta;
  PosedMesh mesh;
  Raster raster;
  ImageD log_image;
  std::vector<Vec2> projected;  // vertex projections (NaN behind the camera)
};

std::vector<Vec2> project_vertices(const PosedMesh& mesh, const PinholeCamera& camera) {
  std::vector<Vec2> out(mesh.vertices.size());
  for (size_t v = 0; v < out.size(); ++v) {
    const Vec3 pc = camera.to_camera(mesh.vertices[v]);
    out[v] = pc.z() > kNearPlane ? camera.project_camera(pc)
                                 : Vec2::Constant(std::numeric_limits<double>::quiet_NaN());
  }
  return out;
}

double max_displacement(const std::vector<Vec2>& a, const std::vector<Vec2>& b) {
  double m = 0.0;
  for (size_t v = 0; v < a.size(); ++v) {
    if (a[v].hasNaN() || b[v].hasNaN()) continue;
    m = std::max(m, (a[v] - b[v]).norm());
  }
  return m;
}

}  // namespace

SimulationResult simulate_sequence(const KinematicTemplate& tmpl,
                                   const std::vector<Keyframe>& keyframes,
                                   const PinholeCamera& camera, const ImageD& background,
                                   const ShadingConfig& shading, const SimulatorConfig& config,
                                   const DumpSink& dumps) {
  config.validate();
  if (keyframes.size() < 2) throw std::domain_error("simulate_sequence: need at least 2 keyframes");
  for (size_t k = 1; k < keyframes.size(); ++k) {
    if (!(keyframes[k].t > keyframes[k - 1].t)) {
      throw std::domain_error("simulate_sequence: keyframe times must be strictly increasing");
    }
  }
  if (background.width() != camera.width() || background.height() != camera.height()) {
    throw std::invalid_argument("simulate_sequence: background size differs from the sensor");
  }

  const CounterRng rng(config.rng_seed);
  const ImageD log_bg = log_background(background);
  const auto& faces = tmpl.faces();
  const double t_end = keyframes.back().t;

  auto make_sample = [&](double t) {
    Sample s;
    s.t = t;
    s.theta = interpolate_keyframes(keyframes, t);
    s.mesh = pose_mesh(tmpl, s.theta);
    s.raster = rasterize(s.mesh, faces, camera);
    s.log_image = shade_log_brightness_cached(s.raster, s.mesh, log_bg, shading);
    s.projected = project_vertices(s.mesh, camera);
    return s;
  };

  SimulationResult result;
  const bool dumping = dumps.every > 0 && dumps.write;
  std::optional<FrameModalities> pending;
  double pending_t = 0.0;
  std::size_t dump_index = 0;
  auto flush = [&] {
    if (!pending) return;
    dumps.write(dump_index++, pending_t, *pending);
    pending.reset();
  };
  auto record = [&](const Sample& s, std::uint64_t step) {
    result.ground_truth.push_back({s.t, s.theta, s.mesh.joints});
    if (dumping && step % static_cast<std::uint64_t>(dumps.every) == 0) {
      flush();
      FrameModalities m;
      m.log_brightness = s.log_image;
      m.depth = s.raster.depth;
      m.normals = Image<Vec3>(camera.width(), camera.height(), Vec3::Zero());
      for (size_t i = 0; i < m.normals.size(); ++i) {
        if (s.raster.face[i] >= 0) m.normals[i] = s.mesh.faces[s.raster.face[i]].normal;
      }
      pending = std::move(m);
      pending_t = s.t;
    }
  };

  Sample cur = make_sample(keyframes.front().t);
  ImageD reference = cur.log_image;
  std::uint64_t step = 0;
  record(cur, step);

  while (cur.t < t_end) {
    // Motion field toward a lookahead pose one maximal step ahead.
    const double t_look = std::min(cur.t + config.dt_max, t_end);
    const PosedMesh look = pose_mesh(tmpl, interpolate_keyframes(keyframes, t_look));
    const Image<Vec2> field = motion_field(cur.raster, look, faces, t_look - cur.t, camera);
    if (pending && pending_t == cur.t) {
      pending->motion_field = field;
      flush();
    }
    double dt = adaptive_dt(field, config.max_pixel_disp, config.dt_min, config.dt_max);

    // The field only sees visible pixels at one instant; shrink the step
    // until no vertex moves further than the budget.
    while (true) {
      const double t_next = std::min(cur.t + dt, t_end);
      const PosedMesh probe = pose_mesh(tmpl, interpolate_keyframes(keyframes, t_next));
      if (dt <= config.dt_min ||
          max_displacement(cur.projected, project_vertices(probe, camera)) <= config.max_pixel_disp) {
        break;
      }
      dt = std::max(0.5 * dt, config.dt_min);
    }

    Sample next = make_sample(std::min(cur.t + dt, t_end));
    ++step;
    auto events = generate_events(cur.log_image, next.log_image, cur.t, next.t, config, rng, step,
                                  config.reference_memory ? &reference : nullptr);
    result.events.insert(result.events.end(), events.begin(), events.end());
    result.max_step_displacement =
        std::max(result.max_step_displacement, max_displacement(cur.projected, next.projected));
    record(next, step);
    cur = std::move(next);
  }
  flush();

  std::sort(result.events.begin(), result.events.end(), event_less);
  return result;
}

}  // namespace evmesh
