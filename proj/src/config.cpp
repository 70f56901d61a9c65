#include "evmesh/config.hpp"

#include "evmesh/motion.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace evmesh {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

[[noreturn]] void fail(const std::string& field, const std::string& why) {
  throw ConfigError(field + ": " + why);
}

/// One JSON object with field-path bookkeeping; unknown keys are rejected.
class Block {
 public:
  Block(const json& j, std::string prefix) : j_(j), prefix_(std::move(prefix)) {
    if (!j_.is_object()) fail(prefix_.empty() ? "config" : prefix_, "expected an object");
  }

  std::string field(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_.at(key).is_null();
  }

  const json& at(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <class T>
  void get(const std::string& key, T& out) {
    if (!has(key)) return;
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      fail(field(key), "wrong type (" + std::string(j_.at(key).type_name()) + ")");
    }
    if constexpr (std::is_floating_point_v<T>) {
      if (!std::isfinite(out)) fail(field(key), "must be finite");
    }
  }

  template <class T>
  void get(const std::string& key, std::optional<T>& out) {
    if (!has(key)) return;
    T v{};
    get(key, v);
    out = v;
  }

  Block child(const std::string& key) { return Block(at(key), field(key)); }

  void finish() const {
    for (const auto& [key, _] : j_.items()) {
      if (!seen_.count(key)) fail(field(key), "unknown field");
    }
  }

 private:
  const json& j_;
  std::string prefix_;
  std::set<std::string> seen_;
};

Vec3 read_vec3(Block& b, const std::string& key, Vec3 fallback) {
  std::vector<double> v;
  b.get(key, v);
  if (v.empty()) return fallback;
  if (v.size() != 3) fail(b.field(key), "expected 3 numbers");
  return {v[0], v[1], v[2]};
}

std::string resolve_path(const std::string& p, const std::string& base_dir) {
  if (p.empty()) return p;
  const fs::path path(p);
  return path.is_absolute() ? p : (fs::path(base_dir) / path).lexically_normal().string();
}

void parse_camera(Block b, CameraSettings& c) {
  b.get("fx", c.fx);
  b.get("fy", c.fy);
  b.get("cx", c.cx);
  b.get("cy", c.cy);
  b.get("width", c.width);
  b.get("height", c.height);
  if (b.has("world_from_camera")) {
    Block e = b.child("world_from_camera");
    const Vec3 t = read_vec3(e, "translation", Vec3::Zero());
    std::vector<double> q;
    e.get("rotation", q);
    Eigen::Quaterniond rot = Eigen::Quaterniond::Identity();
    if (!q.empty()) {
      if (q.size() != 4) fail(e.field("rotation"), "expected a quaternion [w, x, y, z]");
      rot = Eigen::Quaterniond(q[0], q[1], q[2], q[3]);
      if (rot.norm() < 1e-12) fail(e.field("rotation"), "zero quaternion");
      rot.normalize();
    }
    c.world_from_camera = Eigen::Isometry3d::Identity();
    c.world_from_camera.translate(t);
    c.world_from_camera.rotate(rot);
    e.finish();
  }
  b.finish();
}

void parse_simulator(Block b, SimulationSettings& s, const std::string& base_dir) {
  auto& c = s.config;
  b.get("c_pos", c.c_pos);
  b.get("c_neg", c.c_neg);
  if (b.has("contrast")) {
    b.get("contrast", c.c_pos);
    c.c_neg = c.c_pos;
  }
  b.get("threshold_sigma", c.threshold_sigma);
  b.get("sp_rate", c.sp_rate);
  b.get("max_pixel_disp", c.max_pixel_disp);
  b.get("dt_min", c.dt_min);
  b.get("dt_max", c.dt_max);
  b.get("reference_memory", c.reference_memory);
  std::string stamp;
  b.get("timestamp", stamp);
  if (stamp == "crossing") c.timestamp = EventTimestamp::Crossing;
  else if (stamp == "sample_end") c.timestamp = EventTimestamp::SampleEnd;
  else if (!stamp.empty()) fail(b.field("timestamp"), "expected 'crossing' or 'sample_end'");
  b.get("dump_every", s.dump_every);
  b.get("events_file", s.events_file);

  if (b.has("background")) {
    const json& bg = b.at("background");
    if (bg.is_string()) {
      s.background.path = resolve_path(bg.get<std::string>(), base_dir);
    } else {
      Block g = b.child("background");
      g.get("path", s.background.path);
      s.background.path = resolve_path(s.background.path, base_dir);
      g.get("seed", s.background.seed);
      g.get("lo", s.background.lo);
      g.get("hi", s.background.hi);
      g.finish();
    }
  }
  if (b.has("shading")) {
    Block sh = b.child("shading");
    sh.get("albedo", s.shading.albedo);
    sh.get("ambient", s.shading.ambient);
    s.shading.light_direction = read_vec3(sh, "light_direction", s.shading.light_direction);
    sh.finish();
  }
  b.finish();
}

void parse_trajectory(Block b, TrajectorySettings& t) {
  b.get("generator", t.generator);
  if (b.has("keyframes")) {
    t.generator = "keyframes";
    const json& ks = b.at("keyframes");
    if (!ks.is_array()) fail(b.field("keyframes"), "expected an array");
    for (size_t k = 0; k < ks.size(); ++k) {
      Block kb(ks[k], b.field("keyframes[" + std::to_string(k) + "]"));
      Keyframe kf;
      std::vector<double> theta;
      if (!kb.has("t") || !kb.has("theta")) fail(kb.field("t"), "keyframes need 't' and 'theta'");
      kb.get("t", kf.t);
      kb.get("theta", theta);
      kf.theta = Eigen::Map<const VecX>(theta.data(), static_cast<Eigen::Index>(theta.size()));
      kb.finish();
      t.keyframes.push_back(std::move(kf));
    }
  }
  b.get("index", t.index);
  b.get("delta", t.delta);
  b.get("start", t.start);
  b.get("duration", t.duration);
  b.get("range", t.range);
  b.get("elbow_range", t.elbow_range);
  b.get("hand_range", t.hand_range);
  b.get("key_interval", t.key_interval);
  b.get("sample_dt", t.sample_dt);
  b.finish();
}

void parse_tracker(Block b, TrackerSettings& t) {
  auto& c = t.config;
  b.get("alpha", t.alpha);
  b.get("beta", t.beta);
  b.get("gamma", c.likelihood.gamma);
  b.get("d_lat_max", t.d_lat_max);
  b.get("lateral_scale", t.lateral_scale);
  b.get("longitudinal_scale", t.longitudinal_scale);
  b.get("outlier_fraction", t.outlier_fraction);
  std::string s;
  if (b.has("variant_e")) {
    b.get("variant_e", s);
    try { c.em.variant_e = parse_variant_e(s); } catch (const std::invalid_argument& e) { fail(b.field("variant_e"), e.what()); }
  }
  if (b.has("variant_m")) {
    b.get("variant_m", s);
    try { c.em.variant_m = parse_variant_m(s); } catch (const std::invalid_argument& e) { fail(b.field("variant_m"), e.what()); }
  }
  if (b.has("association")) {
    b.get("association", s);
    try { c.em.association = parse_association(s); } catch (const std::invalid_argument& e) { fail(b.field("association"), e.what()); }
  }
  if (b.has("grad_mode")) {
    b.get("grad_mode", s);
    try { c.em.grad_mode = parse_grad_mode(s); } catch (const std::invalid_argument& e) { fail(b.field("grad_mode"), e.what()); }
  }
  b.get("max_em_iters", c.em.max_em_iters);
  b.get("expectation_update_tol", c.em.expectation_update_tol);
  b.get("early_stop_tol", c.em.early_stop_tol);
  b.get("step_size", c.em.step_size);
  b.get("max_grad_iters", c.em.max_grad_iters);
  b.get("fd_step", c.em.fd_step);
  b.get("q_prune", c.em.q_prune);
  b.get("cull_faces", c.em.cull_faces);
  b.get("buffer_size", c.buffer_size);
  b.get("prior_weight", c.prior_weight);
  b.get("min_prior_dt", c.min_prior_dt);
  b.finish();
}

}  // namespace

PinholeCamera CameraSettings::make() const {
  return PinholeCamera(fx, fy, cx, cy, width, height, world_from_camera);
}

KinematicTemplate TemplateSettings::load() const {
  if (!path.empty()) return load_template_json(path);
  return make_builtin_template(builtin);
}

LikelihoodParams TrackerSettings::resolve(double diagonal) const {
  LikelihoodParams p = config.likelihood;
  p.alpha = alpha ? *alpha : std::pow(lateral_scale * diagonal, 2);
  p.beta = beta ? *beta : longitudinal_scale * diagonal;
  p.d_lat_max = d_lat_max ? *d_lat_max : outlier_fraction * diagonal;
  return p;
}

void RunConfig::validate() const {
  auto check = [](bool ok, const std::string& field, const std::string& why) {
    if (!ok) fail(field, why);
  };
  check(camera.fx > 0.0, "camera.fx", "must be > 0");
  check(camera.fy > 0.0, "camera.fy", "must be > 0");
  check(camera.width > 0 && camera.width <= 65535, "camera.width", "must lie in [1, 65535]");
  check(camera.height > 0 && camera.height <= 65535, "camera.height", "must lie in [1, 65535]");
  check(camera.cx >= 0.0 && camera.cx < camera.width, "camera.cx", "must lie in [0, width)");
  check(camera.cy >= 0.0 && camera.cy < camera.height, "camera.cy", "must lie in [0, height)");

  if (templ.path.empty()) {
    check(is_builtin_template(templ.builtin), "template",
          "unknown built-in '" + templ.builtin + "' (finger3, hand5, armhand)");
  } else {
    check(fs::exists(templ.path), "template.path", "file not found: " + templ.path);
  }

  try {
    simulator.config.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  check(simulator.dump_every >= 0, "simulator.dump_every", "must be >= 0");
  check(!simulator.events_file.empty(), "simulator.events_file", "must not be empty");
  check(simulator.shading.albedo > 0.0 && simulator.shading.albedo <= 1.0, "simulator.shading.albedo",
        "must lie in (0, 1]");
  check(simulator.shading.ambient >= 0.0 && simulator.shading.ambient <= 1.0,
        "simulator.shading.ambient", "must lie in [0, 1]");
  check(simulator.shading.light_direction.norm() > 0.0, "simulator.shading.light_direction",
        "must be non-zero");
  const auto& bg = simulator.background;
  if (!bg.path.empty()) {
    check(fs::exists(bg.path), "simulator.background", "file not found: " + bg.path);
  }
  check(bg.lo >= 0.0 && bg.hi <= 1.0 && bg.lo < bg.hi, "simulator.background",
        "need 0 <= lo < hi <= 1");

  const auto& t = trajectory;
  const std::set<std::string> generators = {"keyframes", "sweep", "pca_random", "arm_hand"};
  check(generators.count(t.generator) > 0, "trajectory.generator",
        "expected keyframes, sweep, pca_random or arm_hand");
  if (t.generator == "keyframes") {
    check(t.keyframes.size() >= 2, "trajectory.keyframes", "need at least 2 keyframes");
    for (size_t k = 1; k < t.keyframes.size(); ++k) {
      check(t.keyframes[k].t > t.keyframes[k - 1].t, "trajectory.keyframes",
            "times must be strictly increasing");
    }
  }
  check(t.duration > 0.0, "trajectory.duration", "must be > 0");
  check(t.range >= 0.0, "trajectory.range", "must be >= 0");
  check(t.elbow_range >= 0.0, "trajectory.elbow_range", "must be >= 0");
  check(t.hand_range >= 0.0, "trajectory.hand_range", "must be >= 0");
  check(t.key_interval > 0.0, "trajectory.key_interval", "must be > 0");
  check(t.sample_dt > 0.0, "trajectory.sample_dt", "must be > 0");

  const auto& tr = tracker;
  check(!tr.alpha || *tr.alpha > 0.0, "tracker.alpha", "must be > 0");
  check(!tr.beta || *tr.beta > 0.0, "tracker.beta", "must be > 0");
  check(!tr.d_lat_max || *tr.d_lat_max > 0.0, "tracker.d_lat_max", "must be > 0");
  check(tr.lateral_scale > 0.0, "tracker.lateral_scale", "must be > 0");
  check(tr.longitudinal_scale > 0.0, "tracker.longitudinal_scale", "must be > 0");
  check(tr.outlier_fraction > 0.0, "tracker.outlier_fraction", "must be > 0");
  check(tr.config.likelihood.gamma > 0.0, "tracker.gamma", "must be > 0");
  check(tr.config.buffer_size > 0, "tracker.buffer_size", "must be > 0");
  check(tr.config.prior_weight >= 0.0, "tracker.prior_weight", "must be >= 0");
  check(tr.config.min_prior_dt > 0.0, "tracker.min_prior_dt", "must be > 0");
  try {
    tr.config.em.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }

  check(evaluation.match_tolerance > 0.0, "evaluation.match_tolerance", "must be > 0");
  check(!ablation.seeds.empty(), "ablation.seeds", "must list at least one seed");
  check(!output_dir.empty(), "output_dir", "must not be empty");
}

RunConfig parse_run_config(const std::string& json_text, const std::string& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig c;
  Block root(j, "");
  root.get("seed", c.seed);
  root.get("output_dir", c.output_dir);
  c.output_dir = resolve_path(c.output_dir, base_dir);
  if (root.has("camera")) parse_camera(root.child("camera"), c.camera);
  if (root.has("template")) {
    const json& t = root.at("template");
    if (t.is_string()) {
      c.templ.builtin = t.get<std::string>();
    } else {
      Block tb = root.child("template");
      tb.get("builtin", c.templ.builtin);
      tb.get("path", c.templ.path);
      c.templ.path = resolve_path(c.templ.path, base_dir);
      tb.finish();
    }
  }
  if (root.has("simulator")) parse_simulator(root.child("simulator"), c.simulator, base_dir);
  if (root.has("trajectory")) parse_trajectory(root.child("trajectory"), c.trajectory);
  if (root.has("tracker")) parse_tracker(root.child("tracker"), c.tracker);
  if (root.has("evaluation")) {
    Block e = root.child("evaluation");
    e.get("match_tolerance", c.evaluation.match_tolerance);
    e.finish();
  }
  if (root.has("ablation")) {
    Block a = root.child("ablation");
    a.get("seeds", c.ablation.seeds);
    a.finish();
  }
  root.finish();
  c.simulator.config.rng_seed = c.seed;
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  const fs::path dir = fs::path(path).parent_path();
  return parse_run_config(ss.str(), dir.empty() ? "." : dir.string());
}

std::vector<Keyframe> build_trajectory(const TrajectorySettings& s, const KinematicTemplate& tmpl,
                                       std::uint64_t seed) {
  const int dim = tmpl.param_dim();
  if (s.generator == "keyframes") {
    for (size_t k = 0; k < s.keyframes.size(); ++k) {
      if (s.keyframes[k].theta.size() != dim) {
        fail("trajectory.keyframes[" + std::to_string(k) + "].theta",
             "expected " + std::to_string(dim) + " values");
      }
    }
    return s.keyframes;
  }
  if (s.generator == "sweep") {
    VecX base = VecX::Zero(dim);
    if (!s.start.empty()) {
      if (static_cast<int>(s.start.size()) != dim) {
        fail("trajectory.start", "expected " + std::to_string(dim) + " values");
      }
      base = Eigen::Map<const VecX>(s.start.data(), dim);
    }
    if (s.index < 0 || s.index >= dim) fail("trajectory.index", "out of range for the template");
    return sweep_trajectory(base, s.index, s.delta, s.duration);
  }
  RandomMotionSpec spec{s.duration, s.key_interval, s.sample_dt, seed * 0x9E3779B97F4A7C15ull + 17};
  if (s.generator == "pca_random") return pca_random_trajectory(tmpl, s.range, spec);
  if (dim < 4) fail("trajectory.generator", "arm_hand needs a template with an elbow (armhand)");
  return arm_hand_trajectory(tmpl, s.elbow_range, s.hand_range, spec);
}

ImageD build_background(const BackgroundSettings& s, const CameraSettings& camera,
                        std::uint64_t run_seed) {
  if (s.path.empty()) {
    return procedural_texture(camera.width, camera.height, s.seed ? *s.seed : run_seed, s.lo, s.hi);
  }
  ImageD img = load_grayscale(s.path);
  if (img.width() != camera.width || img.height() != camera.height) {
    fail("simulator.background", "image is " + std::to_string(img.width()) + "x" +
                                     std::to_string(img.height()) + ", sensor is " +
                                     std::to_string(camera.width) + "x" +
                                     std::to_string(camera.height));
  }
  return img;
}

}  // namespace evmesh
