#include "evmesh/commands.hpp"

#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>

namespace evmesh {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

int guarded(const std::function<void()>& body) {
  try {
    body();
    return kExitOk;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntime;
  }
}

std::string numbered(const std::string& dir, const char* stem, size_t index, const char* ext) {
  char name[64];
  std::snprintf(name, sizeof name, "%s_%05zu.%s", stem, index, ext);
  return (fs::path(dir) / name).string();
}

void save_normals_ppm(const Image<Vec3>& normals, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "P6\n" << normals.width() << ' ' << normals.height() << "\n255\n";
  for (size_t i = 0; i < normals.size(); ++i) {
    for (int c = 0; c < 3; ++c) {
      const double v = std::clamp(0.5 * (normals[i][c] + 1.0), 0.0, 1.0);
      out.put(static_cast<char>(std::lround(v * 255.0)));
    }
  }
}

void save_motion_csv(const Image<Vec2>& field, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "x,y,u,v\n";
  for (int y = 0; y < field.height(); ++y) {
    for (int x = 0; x < field.width(); ++x) {
      const Vec2& f = field(x, y);
      if (f.x() == 0.0 && f.y() == 0.0) continue;
      out << x << ',' << y << ',' << f.x() << ',' << f.y() << '\n';
    }
  }
}

// Writes each dumped sample as it arrives, plus an index of sample times.
class DumpWriter {
 public:
  explicit DumpWriter(std::string dir) : dir_(std::move(dir)) {}

  void operator()(size_t k, double t, const FrameModalities& m) {
    if (!times_.is_open()) {
      fs::create_directories(dir_);
      times_.open((fs::path(dir_) / "times.csv").string());
      if (!times_) throw std::runtime_error("cannot write dumps to '" + dir_ + "'");
      times_ << "index,t\n" << std::setprecision(12);
    }
    times_ << k << ',' << t << '\n';
    save_pgm(m.log_brightness, numbered(dir_, "log_brightness", k, "pgm"), std::log(kLogEpsilon), 0.0);
    double near = std::numeric_limits<double>::infinity(), far = 0.0;
    for (double d : m.depth.data()) {
      if (std::isfinite(d)) {
        near = std::min(near, d);
        far = std::max(far, d);
      }
    }
    save_pgm(m.depth, numbered(dir_, "depth", k, "pgm"), near, far > near ? far : near + 1.0);
    save_normals_ppm(m.normals, numbered(dir_, "normals", k, "ppm"));
    if (m.motion_field.size() > 0) save_motion_csv(m.motion_field, numbered(dir_, "motion", k, "csv"));
  }

 private:
  std::string dir_;
  std::ofstream times_;
};

RunConfig load_with_overrides(const std::string& config_path, const Overrides& o) {
  RunConfig c = load_run_config(config_path);
  apply_overrides(c, o);
  return c;
}

}  // namespace

void apply_overrides(RunConfig& c, const Overrides& o) {
  if (o.out_dir) c.output_dir = *o.out_dir;
  if (o.seed) {
    c.seed = *o.seed;
    c.simulator.config.rng_seed = *o.seed;
  }
  auto& em = c.tracker.config.em;
  if (o.association) em.association = parse_association(*o.association);
  if (o.variant_e) em.variant_e = parse_variant_e(*o.variant_e);
  if (o.variant_m) em.variant_m = parse_variant_m(*o.variant_m);
  if (o.buffer_size) c.tracker.config.buffer_size = *o.buffer_size;
  c.validate();
}

SimulationResult simulate_run(const RunConfig& config, const KinematicTemplate& tmpl,
                              const DumpSink& dumps) {
  const auto keyframes = build_trajectory(config.trajectory, tmpl, config.seed);
  const ImageD background = build_background(config.simulator.background, config.camera, config.seed);
  SimulatorConfig sim = config.simulator.config;
  sim.rng_seed = config.seed;
  return simulate_sequence(tmpl, keyframes, config.camera.make(), background,
                           config.simulator.shading, sim, dumps);
}

TrackerConfig resolve_tracker(const RunConfig& config, const KinematicTemplate& tmpl) {
  TrackerConfig t = config.tracker.config;
  t.likelihood = config.tracker.resolve(tmpl.bounding_box_diagonal());
  return t;
}

JointTrajectory joints_of(const KinematicTemplate& tmpl, const std::vector<TrajectorySample>& traj) {
  JointTrajectory out;
  out.reserve(traj.size());
  for (const auto& s : traj) out.push_back({s.t, joint_positions(tmpl, s.theta)});
  return out;
}

JointTrajectory joints_of(const std::vector<GroundTruthRecord>& gt) {
  JointTrajectory out;
  out.reserve(gt.size());
  for (const auto& r : gt) out.push_back({r.t, r.joints});
  return out;
}

EvaluationReport evaluate_trajectory(const JointTrajectory& est, const JointTrajectory& gt,
                                     double tolerance) {
  const MatchedPair pair = pair_by_time(est, gt, tolerance);
  EvaluationReport r;
  r.tolerance = tolerance;
  r.matched = static_cast<int>(pair.est.size());
  r.unmatched = pair.unmatched;
  if (pair.est.empty()) throw std::runtime_error("evaluate: no estimate lies within the matching tolerance of a ground-truth sample");
  r.mpjpe = mpjpe(pair.est, pair.gt);
  r.thresholds_mm = default_pck_thresholds();
  r.pck = pck_curve(pair.est, pair.gt, r.thresholds_mm);
  r.auc = auc(r.pck, r.thresholds_mm);
  return r;
}

void write_trajectory(const std::vector<TrajectorySample>& traj, const KinematicTemplate& tmpl,
                      const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  for (const auto& s : traj) {
    json j;
    j["t"] = s.t;
    j["theta"] = std::vector<double>(s.theta.data(), s.theta.data() + s.theta.size());
    j["joints"] = json::array();
    for (const auto& p : joint_positions(tmpl, s.theta)) j["joints"].push_back({p.x(), p.y(), p.z()});
    out << j.dump() << '\n';
  }
}

JointTrajectory read_trajectory_joints(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  JointTrajectory out;
  std::string row;
  size_t line = 0;
  while (std::getline(in, row)) {
    ++line;
    if (row.empty()) continue;
    try {
      const json j = json::parse(row);
      JointSample s;
      s.t = j.at("t").get<double>();
      for (const auto& p : j.at("joints")) {
        s.joints.emplace_back(p.at(0).get<double>(), p.at(1).get<double>(), p.at(2).get<double>());
      }
      out.push_back(std::move(s));
    } catch (const json::exception& e) {
      throw std::invalid_argument(path + ":" + std::to_string(line) + ": " + e.what());
    }
  }
  return out;
}

void write_diagnostics(const std::vector<TrajectorySample>& traj, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "buffer,t,em_iters,grad_iters,inliers,objective,coasted\n" << std::setprecision(12);
  for (size_t b = 0; b < traj.size(); ++b) {
    const auto& d = traj[b].diagnostics;
    out << b << ',' << traj[b].t << ',' << d.em_iters << ',' << d.grad_iters << ',' << d.inliers
        << ',' << d.objective << ',' << (d.coasted ? 1 : 0) << '\n';
  }
}

std::string AblationRow::label() const {
  return to_string(variant_e) + to_string(variant_m) + "/" + to_string(association);
}

std::vector<AblationRow> run_ablation(const RunConfig& config, std::ostream* progress) {
  const KinematicTemplate tmpl = config.templ.load();
  const TrackerConfig base = resolve_tracker(config, tmpl);
  struct Variant {
    VariantE e;
    VariantM m;
  };
  const Variant variants[] = {{VariantE::E3, VariantM::M2},
                              {VariantE::E2Normal, VariantM::M2},
                              {VariantE::E2Longitudinal, VariantM::M2},
                              {VariantE::E3, VariantM::M1Lateral}};
  std::vector<AblationRow> rows;
  for (auto a : {Association::Soft, Association::Hard}) {
    for (const auto& v : variants) {
      AblationRow r{v.e, v.m, a};
      r.is_default = v.e == VariantE::E3 && v.m == VariantM::M2 && a == Association::Soft;
      rows.push_back(r);
    }
  }

  const double n = static_cast<double>(config.ablation.seeds.size());
  for (const auto seed : config.ablation.seeds) {
    RunConfig c = config;
    c.seed = seed;
    c.simulator.config.rng_seed = seed;
    const SimulationResult sim = simulate_run(c, tmpl);
    const JointTrajectory gt = joints_of(sim.ground_truth);
    const auto& first = sim.ground_truth.front();
    for (auto& row : rows) {
      TrackerConfig tc = base;
      tc.em.variant_e = row.variant_e;
      tc.em.variant_m = row.variant_m;
      tc.em.association = row.association;
      const auto traj = track_stream(sim.events, first.theta, first.t, tmpl, c.camera.make(), tc);
      const auto report = evaluate_trajectory(joints_of(tmpl, traj), gt, c.evaluation.match_tolerance);
      row.mean_mpjpe_mm += report.mpjpe.mean_mm / n;
      row.median_mpjpe_mm += report.mpjpe.median_mm / n;
      row.mean_auc += report.auc / n;
      if (progress) {
        *progress << "seed " << seed << "  " << std::left << std::setw(24) << row.label()
                  << std::fixed << std::setprecision(3) << report.mpjpe.mean_mm << " mm  AUC "
                  << report.auc << '\n'
                  << std::defaultfloat;
      }
    }
  }
  return rows;
}

void write_ablation_table(const std::vector<AblationRow>& rows, const std::string& csv_path,
                          std::ostream& text) {
  std::ofstream csv(csv_path);
  if (!csv) throw std::runtime_error("cannot write '" + csv_path + "'");
  csv << "variant,variant_e,variant_m,association,mpjpe_mean_mm,mpjpe_median_mm,auc,default\n";
  csv << std::setprecision(10);
  for (const auto& r : rows) {
    csv << r.label() << ',' << to_string(r.variant_e) << ',' << to_string(r.variant_m) << ','
        << to_string(r.association) << ',' << r.mean_mpjpe_mm << ',' << r.median_mpjpe_mm << ','
        << r.mean_auc << ',' << (r.is_default ? 1 : 0) << '\n';
  }
  text << std::left << std::setw(28) << "variant" << std::right << std::setw(14) << "MPJPE (mm)"
       << std::setw(14) << "median (mm)" << std::setw(10) << "AUC" << '\n';
  for (const auto& r : rows) {
    text << std::left << std::setw(28) << (r.label() + (r.is_default ? " (default)" : ""))
         << std::right << std::fixed << std::setprecision(3) << std::setw(14) << r.mean_mpjpe_mm
         << std::setw(14) << r.median_mpjpe_mm << std::setw(10) << r.mean_auc << '\n'
         << std::defaultfloat;
  }
}

int cmd_simulate(const std::string& config_path, const Overrides& o, std::ostream& out) {
  return guarded([&] {
    const RunConfig c = load_with_overrides(config_path, o);
    const KinematicTemplate tmpl = c.templ.load();
    const auto start = std::chrono::steady_clock::now();
    DumpSink sink;
    if (c.simulator.dump_every > 0) {
      auto writer = std::make_shared<DumpWriter>((fs::path(c.output_dir) / "dumps").string());
      sink.every = c.simulator.dump_every;
      sink.write = [writer](size_t k, double t, const FrameModalities& m) { (*writer)(k, t, m); };
    }
    const SimulationResult sim = simulate_run(c, tmpl, sink);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    fs::create_directories(c.output_dir);
    const std::string events_path = (fs::path(c.output_dir) / c.simulator.events_file).string();
    write_events(sim.events, events_path);
    write_ground_truth(sim.ground_truth, (fs::path(c.output_dir) / "gt.jsonl").string());

    const double duration = sim.ground_truth.back().t - sim.ground_truth.front().t;
    out << "events: " << sim.events.size() << '\n'
        << "duration: " << duration << " s (" << sim.ground_truth.size() << " samples)\n"
        << "max step displacement: " << sim.max_step_displacement << " px\n"
        << "wrote " << events_path << '\n';
    std::cerr << "simulated in " << wall << " s\n";
  });
}

int cmd_track(const std::string& config_path, const std::string& events_path,
              const std::string& gt_path, const Overrides& o, std::ostream& out) {
  return guarded([&] {
    const RunConfig c = load_with_overrides(config_path, o);
    const KinematicTemplate tmpl = c.templ.load();
    const auto events = read_events(events_path);
    const auto gt = read_ground_truth(gt_path);
    if (gt.empty()) throw std::invalid_argument(gt_path + ": no initial pose record");
    if (gt.front().theta.size() != tmpl.param_dim()) {
      throw std::invalid_argument(gt_path + ": initial pose has " +
                                  std::to_string(gt.front().theta.size()) +
                                  " parameters, template expects " +
                                  std::to_string(tmpl.param_dim()));
    }
    const PinholeCamera camera = c.camera.make();
    for (size_t i = 0; i < events.size(); ++i) {
      if (events[i].x >= camera.width() || events[i].y >= camera.height()) {
        throw std::invalid_argument(events_path + ": event " + std::to_string(i) +
                                    " lies outside the sensor");
      }
    }
    const auto traj = track_stream(events, gt.front().theta, gt.front().t, tmpl, camera,
                                   resolve_tracker(c, tmpl));
    fs::create_directories(c.output_dir);
    write_trajectory(traj, tmpl, (fs::path(c.output_dir) / "trajectory.jsonl").string());
    write_diagnostics(traj, (fs::path(c.output_dir) / "diagnostics.csv").string());
    out << "buffers: " << traj.size() << '\n'
        << "wrote " << (fs::path(c.output_dir) / "trajectory.jsonl").string() << '\n';
  });
}

int cmd_evaluate(const std::string& trajectory_path, const std::string& gt_path,
                 const std::string& out_dir, double tolerance, std::ostream& out) {
  return guarded([&] {
    if (!(tolerance > 0.0)) throw std::invalid_argument("evaluation.match_tolerance: must be > 0");
    const JointTrajectory est = read_trajectory_joints(trajectory_path);
    const JointTrajectory gt = joints_of(read_ground_truth(gt_path));
    const EvaluationReport r = evaluate_trajectory(est, gt, tolerance);

    fs::create_directories(out_dir);
    json report;
    report["mpjpe_mean_mm"] = r.mpjpe.mean_mm;
    report["mpjpe_median_mm"] = r.mpjpe.median_mm;
    report["auc"] = r.auc;
    report["pck_thresholds_mm"] = r.thresholds_mm;
    report["pck"] = r.pck;
    report["matched"] = r.matched;
    report["unmatched"] = r.unmatched;
    report["match_tolerance_s"] = r.tolerance;
    std::ofstream((fs::path(out_dir) / "metrics.json").string()) << report.dump(2) << '\n';
    std::ofstream pck((fs::path(out_dir) / "pck.csv").string());
    pck << "threshold_mm,pck\n";
    for (size_t k = 0; k < r.pck.size(); ++k) pck << r.thresholds_mm[k] << ',' << r.pck[k] << '\n';

    out << std::fixed << std::setprecision(4) << "MPJPE mean: " << r.mpjpe.mean_mm << " mm\n"
        << "MPJPE median: " << r.mpjpe.median_mm << " mm\n"
        << "AUC (0-50 mm): " << r.auc << '\n'
        << "matched " << r.matched << " estimates (" << r.unmatched << " beyond "
        << r.tolerance << " s)\n"
        << std::defaultfloat;
  });
}

int cmd_ablate(const std::string& config_path, const Overrides& o, bool sort, std::ostream& out) {
  return guarded([&] {
    const RunConfig c = load_with_overrides(config_path, o);
    auto rows = run_ablation(c, &std::cerr);
    if (sort) {
      std::stable_sort(rows.begin(), rows.end(), [](const AblationRow& a, const AblationRow& b) {
        return a.mean_mpjpe_mm < b.mean_mpjpe_mm;
      });
    }
    fs::create_directories(c.output_dir);
    std::ostringstream text;
    write_ablation_table(rows, (fs::path(c.output_dir) / "ablation.csv").string(), text);
    std::ofstream((fs::path(c.output_dir) / "ablation.txt").string()) << text.str();
    out << text.str();
  });
}

int cmd_template(const std::string& name, const std::string& path, std::ostream& out) {
  return guarded([&] {
    if (!is_builtin_template(name)) {
      throw std::invalid_argument("unknown built-in template '" + name + "' (finger3, hand5, armhand)");
    }
    const KinematicTemplate t = make_builtin_template(name);
    save_template_json(t, path);
    out << name << ": " << t.rest_vertices().size() << " vertices, " << t.faces().size()
        << " faces, " << t.bones().size() << " bones, " << t.param_dim() << " pose parameters, "
        << "bounding-box diagonal " << t.bounding_box_diagonal() << " m\n";
  });
}

}  // namespace evmesh
