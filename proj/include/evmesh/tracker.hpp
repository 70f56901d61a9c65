#pragma once

#include "evmesh/geometry.hpp"
#include "evmesh/model.hpp"
#include "evmesh/simulator.hpp"

#include <string>
#include <vector>

namespace evmesh {

enum class VariantE { E3, E2Normal, E2Longitudinal };
enum class VariantM { M2, M1Lateral };
enum class Association { Soft, Hard };
enum class GradMode { FiniteDifference, Analytic };

std::string to_string(VariantE v);
std::string to_string(VariantM v);
std::string to_string(Association a);
std::string to_string(GradMode g);
// Parsers accept the names produced by to_string; throw std::invalid_argument otherwise.
VariantE parse_variant_e(const std::string& s);
VariantM parse_variant_m(const std::string& s);
Association parse_association(const std::string& s);
GradMode parse_grad_mode(const std::string& s);

struct LikelihoodParams {
  double alpha = 4e-6;      // m^2
  double beta = 0.5;        // m
  double gamma = 0.6;
  double d_lat_max = 0.01;  // m

  void validate() const;
};

struct EmConfig {
  VariantE variant_e = VariantE::E3;
  VariantM variant_m = VariantM::M2;
  Association association = Association::Soft;
  int max_em_iters = 4;
  double expectation_update_tol = 0.02;
  double early_stop_tol = 1e-3;
  double step_size = 0.05;  // largest move per gradient step (theta units)
  int max_grad_iters = 10;
  GradMode grad_mode = GradMode::Analytic;
  double fd_step = 1e-8;  // central differences; the objective has edge-switch kinks
  // Association entries below this probability are left out of the M-step.
  double q_prune = 1e-4;
  // Skip faces in the E-step whose bounding sphere proves a negligible weight.
  bool cull_faces = true;
  // Precondition ascent directions with the vertex-displacement metric.
  bool precondition = true;

  void validate() const;
};

/// Constant-velocity prior state. The objective subtracts
/// k * |(theta - theta_prev) / dt - v_prev|^2.
struct MotionPriorState {
  VecX theta_prev;
  VecX v_prev;
  double dt = 1.0;
  double k = 0.0;
};

struct EventBuffer {
  std::vector<Event> events;
  double t_start = 0.0;
  double t_end = 0.0;

  double t_mid() const { return 0.5 * (t_start + t_end); }
  static EventBuffer from_events(std::vector<Event> events);
};

/// Soft event-to-face assignment; outlier rows are all zero.
struct AssociationMatrix {
  MatX q;  // N x F
  std::vector<bool> inlier_mask;

  int inlier_count() const;
};

double log_sigmoid(double x);

double e_likelihood(const FaceEventGeometry& geom, const LikelihoodParams& params, VariantE variant);
double m_likelihood_log(const FaceEventGeometry& geom, const LikelihoodParams& params,
                        VariantM variant);

AssociationMatrix e_step(const EventBuffer& buffer, const PosedMesh& mesh,
                         const PinholeCamera& camera, const LikelihoodParams& params,
                         VariantE variant, bool cull_faces = false);

double m_step_objective(const EventBuffer& buffer, const AssociationMatrix& q, const VecX& theta,
                        const KinematicTemplate& tmpl, const PinholeCamera& camera,
                        const LikelihoodParams& params, const MotionPriorState& prior,
                        VariantM variant, Association association, double q_prune = 0.0);

VecX m_step_gradient(const EventBuffer& buffer, const AssociationMatrix& q, const VecX& theta,
                     const KinematicTemplate& tmpl, const PinholeCamera& camera,
                     const LikelihoodParams& params, const MotionPriorState& prior,
                     VariantM variant, Association association, GradMode mode,
                     double fd_step = 1e-8, double q_prune = 0.0);

struct BufferDiagnostics {
  int em_iters = 0;
  int grad_iters = 0;
  int inliers = 0;
  double objective = 0.0;
  bool coasted = false;  // no inliers: returned the prior optimum
};

struct BufferResult {
  VecX theta;
  AssociationMatrix q;
  BufferDiagnostics diagnostics;
};

BufferResult optimize_buffer(const EventBuffer& buffer, const VecX& theta_init,
                             const MotionPriorState& prior, const KinematicTemplate& tmpl,
                             const PinholeCamera& camera, const LikelihoodParams& params,
                             const EmConfig& config);

VecX predict_init(const VecX& theta_prev, const VecX& v_prev, double dt);

struct TrackerConfig {
  LikelihoodParams likelihood;
  EmConfig em;
  int buffer_size = 300;
  double prior_weight = 1e-3;  // k
  double min_prior_dt = 1e-4;  // floor for the buffer-to-buffer interval (s)
};

struct TrajectorySample {
  double t = 0.0;
  VecX theta;
  BufferDiagnostics diagnostics;
};

// theta0 is the known pose at time t0.
std::vector<TrajectorySample> track_stream(const std::vector<Event>& events, const VecX& theta0,
                                           double t0, const KinematicTemplate& tmpl,
                                           const PinholeCamera& camera,
                                           const TrackerConfig& config);

}  // namespace evmesh
