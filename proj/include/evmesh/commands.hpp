#pragma once

#include "evmesh/config.hpp"
#include "evmesh/metrics.hpp"
#include "evmesh/simulator.hpp"
#include "evmesh/tracker.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace evmesh {

// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

/// Command-line overrides applied on top of a loaded RunConfig.
struct Overrides {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> association;
  std::optional<std::string> variant_e;
  std::optional<std::string> variant_m;
  std::optional<int> buffer_size;
};
void apply_overrides(RunConfig& config, const Overrides& o);

// Pipeline pieces shared by the commands and the acceptance suite.
SimulationResult simulate_run(const RunConfig& config, const KinematicTemplate& tmpl,
                              const DumpSink& dumps = {});
TrackerConfig resolve_tracker(const RunConfig& config, const KinematicTemplate& tmpl);
JointTrajectory joints_of(const KinematicTemplate& tmpl, const std::vector<TrajectorySample>& traj);
JointTrajectory joints_of(const std::vector<GroundTruthRecord>& gt);

struct EvaluationReport {
  MpjpeResult mpjpe;
  std::vector<double> thresholds_mm;
  std::vector<double> pck;
  double auc = 0.0;
  int matched = 0;
  int unmatched = 0;
  double tolerance = 0.0;
};
EvaluationReport evaluate_trajectory(const JointTrajectory& est, const JointTrajectory& gt,
                                     double tolerance);

void write_trajectory(const std::vector<TrajectorySample>& traj, const KinematicTemplate& tmpl,
                      const std::string& path);
// Reads `{"t", "theta", "joints"}` lines; joints are required.
JointTrajectory read_trajectory_joints(const std::string& path);
void write_diagnostics(const std::vector<TrajectorySample>& traj, const std::string& path);

struct AblationRow {
  VariantE variant_e;
  VariantM variant_m;
  Association association;
  double mean_mpjpe_mm = 0.0;    // mean over sequences of the per-sequence mean
  double median_mpjpe_mm = 0.0;  // mean over sequences of the per-sequence median
  double mean_auc = 0.0;
  bool is_default = false;

  std::string label() const;  // e.g. "E3M2/soft"
};
// 4 likelihood variants x {soft, hard} over the configured seeds.
std::vector<AblationRow> run_ablation(const RunConfig& config, std::ostream* progress = nullptr);
void write_ablation_table(const std::vector<AblationRow>& rows, const std::string& csv_path,
                          std::ostream& text);

int cmd_simulate(const std::string& config_path, const Overrides& o, std::ostream& out);
int cmd_track(const std::string& config_path, const std::string& events_path,
              const std::string& gt_path, const Overrides& o, std::ostream& out);
int cmd_evaluate(const std::string& trajectory_path, const std::string& gt_path,
                 const std::string& out_dir, double tolerance, std::ostream& out);
int cmd_ablate(const std::string& config_path, const Overrides& o, bool sort, std::ostream& out);
// Writes a built-in template as JSON (the documented template format).
int cmd_template(const std::string& name, const std::string& path, std::ostream& out);

}  // namespace evmesh
