// evmesh: simulate event streams of articulated meshes and track them back.
#include "evmesh/commands.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
  using namespace evmesh;
  CLI::App app{"Event-camera mesh simulator and EM contour tracker"};
  app.require_subcommand(1);

  std::string config, events, gt, trajectory, out_dir, template_name, template_out;
  Overrides o;
  bool sort = false;
  double tolerance = 0.005;

  auto add_overrides = [&](CLI::App* cmd, bool tracker_flags) {
    cmd->add_option("--config", config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out_dir, "Output directory (overrides output_dir)");
    cmd->add_option("--seed", o.seed, "Sequence seed (overrides seed)");
    if (tracker_flags) {
      cmd->add_option("--association", o.association, "soft or hard")
          ->check(CLI::IsMember({"soft", "hard"}));
      cmd->add_option("--variant", o.variant_e, "E-step likelihood variant")
          ->check(CLI::IsMember({"E3", "E2_normal", "E2_longitudinal"}));
      cmd->add_option("--variant-m", o.variant_m, "M-step likelihood variant")
          ->check(CLI::IsMember({"M2", "M1_lateral"}));
      cmd->add_option("--buffer-size", o.buffer_size, "Events per buffer")->check(CLI::PositiveNumber);
    }
  };

  auto* simulate = app.add_subcommand("simulate", "Synthesize an event stream and ground truth");
  add_overrides(simulate, false);

  auto* track = app.add_subcommand("track", "Reconstruct the pose trajectory from events");
  add_overrides(track, true);
  track->add_option("--events", events, "Event file (CSV or .bin)")->required();
  track->add_option("--gt", gt, "Ground truth or initial-pose JSON lines (first record is used)")->required();

  auto* evaluate = app.add_subcommand("evaluate", "Compare a trajectory against ground truth");
  evaluate->add_option("--trajectory", trajectory, "trajectory.jsonl from track")->required();
  evaluate->add_option("--gt", gt, "gt.jsonl from simulate")->required();
  evaluate->add_option("--out", out_dir, "Directory for metrics.json and pck.csv")->required();
  evaluate->add_option("--tolerance", tolerance, "Time matching tolerance (s)")->capture_default_str();

  auto* ablate = app.add_subcommand("ablate", "Likelihood variant and association ablation");
  add_overrides(ablate, true);
  ablate->add_flag("--sort", sort, "Sort rows by MPJPE ascending");

  auto* templ = app.add_subcommand("template", "Export a built-in template as JSON");
  templ->add_option("name", template_name, "finger3, hand5 or armhand")->required();
  templ->add_option("--out", template_out, "Output path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  if (*simulate) return cmd_simulate(config, o, std::cout);
  if (*track) return cmd_track(config, events, gt, o, std::cout);
  if (*evaluate) return cmd_evaluate(trajectory, gt, out_dir, tolerance, std::cout);
  if (*ablate) return cmd_ablate(config, o, sort, std::cout);
  if (*templ) return cmd_template(template_name, template_out, std::cout);
  return kExitValidation;
}
