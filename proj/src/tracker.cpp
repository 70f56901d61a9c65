#include "evmesh/tracker.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <stdexcept>

namespace evmesh {

namespace {

double m_log(const kernel::Geometry<double>& g, const LikelihoodParams& p, VariantM variant) {
  double r = log_sigmoid(g.sign * g.d_lat_sq / p.alpha);
  if (variant == VariantM::M2) r -= g.r_ang / p.gamma;
  return r;
}

/// M-step log-weight of one (ray, face) pair and its derivatives with
/// respect to the three face vertices.
struct FaceTerm {
  double value = 0.0;
  Vec3 grad[3];
  bool degenerate = false;
};

FaceTerm m_log_with_gradient(const Ray& ray, const Vec3& w0, const Vec3& w1, const Vec3& w2,
                             const LikelihoodParams& p, VariantM variant) {
  FaceTerm out;
  const Vec3& d = ray.direction;
  const Vec3 v[3] = {w0 - ray.origin, w1 - ray.origin, w2 - ray.origin};
  const Vec3 n = (v[1] - v[0]).cross(v[2] - v[0]);
  const double n2 = n.squaredNorm();
  if (n2 <= kDegenerateArea * kDegenerateArea) {
    out.degenerate = true;
    return out;
  }

  // Closest edge in the plane orthogonal to the ray, same tie order as the
  // value kernel (ab, bc, ca).
  const Vec3 proj[3] = {v[0] - v[0].dot(d) * d, v[1] - v[1].dot(d) * d, v[2] - v[2].dot(d) * d};
  double best = std::numeric_limits<double>::infinity();
  int ei = 0, ej = 1;
  double es = 0.0;
  Vec3 ec = Vec3::Zero();
  for (int e = 0; e < 3; ++e) {
    const int i = e, j = (e + 1) % 3;
    const Vec3 u = proj[j] - proj[i];
    const double uu = u.squaredNorm();
    double s = 0.0;
    if (uu > 1e-300) s = std::clamp(-proj[i].dot(u) / uu, 0.0, 1.0);
    const Vec3 c = proj[i] + s * u;
    const double dist2 = c.squaredNorm();
    if (e == 0 || dist2 < best) {
      best = dist2;
      ei = i;
      ej = j;
      es = s;
      ec = c;
    }
  }
  const double s0 = v[0].cross(v[1]).dot(d);
  const double s1 = v[1].cross(v[2]).dot(d);
  const double s2 = v[2].cross(v[0]).dot(d);
  const bool same = (s0 >= 0.0 && s1 >= 0.0 && s2 >= 0.0) || (s0 <= 0.0 && s1 <= 0.0 && s2 <= 0.0);
  const bool flat = s0 == 0.0 && s1 == 0.0 && s2 == 0.0;
  const int sign = (same && !flat) || best == 0.0 ? 1 : -1;

  const double x = sign * best / p.alpha;
  out.value = log_sigmoid(x);
  // d log(sigmoid(x)) / dx = sigmoid(-x); the closest point moves with the
  // edge endpoints as (1 - s) and s (s itself is stationary or clamped).
  const double dd2 = sign / p.alpha * std::exp(log_sigmoid(-x));
  out.grad[0].setZero();
  out.grad[1].setZero();
  out.grad[2].setZero();
  out.grad[ei] += (2.0 * (1.0 - es) * dd2) * ec;
  out.grad[ej] += (2.0 * es * dd2) * ec;

  if (variant == VariantM::M2) {
    const double nn = std::sqrt(n2);
    const double nd = n.dot(d);
    out.value -= std::abs(nd) / nn / p.gamma;
    // Gradient of -|n.d| / (|n| gamma) with respect to n, pushed through
    // n = (v1 - v0) x (v2 - v0).
    const double sg = nd >= 0.0 ? 1.0 : -1.0;
    const Vec3 gn = (-sg / p.gamma) * (d / nn - (nd / (n2 * nn)) * n);
    const Vec3 g1 = (v[2] - v[0]).cross(gn);
    const Vec3 g2 = gn.cross(v[1] - v[0]);
    out.grad[1] += g1;
    out.grad[2] += g2;
    out.grad[0] -= g1 + g2;
  }
  return out;
}

struct Entry {
  int event;
  int face;
  double weight;
};

/// Everything the M-step needs for one buffer and one fixed association.
class MStepProblem {
 public:
  MStepProblem(const EventBuffer& buffer, const AssociationMatrix& q, const KinematicTemplate& tmpl,
               const PinholeCamera& camera, const LikelihoodParams& params,
               const MotionPriorState& prior, VariantM variant, Association association,
               double q_prune)
      : tmpl_(tmpl), params_(params), prior_(prior), variant_(variant) {
    if (q.q.rows() != static_cast<Eigen::Index>(buffer.events.size()) ||
        q.q.cols() != static_cast<Eigen::Index>(tmpl.faces().size())) {
      throw std::invalid_argument("m-step: association matrix shape does not match buffer and mesh");
    }
    if (!(prior.dt > 0.0)) throw std::domain_error("m-step: prior dt must be > 0");
    if (prior.theta_prev.size() != tmpl.param_dim() || prior.v_prev.size() != tmpl.param_dim()) {
      throw std::domain_error("m-step: prior state dimension mismatch");
    }
    rays_.reserve(buffer.events.size());
    for (const auto& e : buffer.events) rays_.push_back(line_of_sight(camera, Vec2(e.x, e.y)));
    for (Eigen::Index i = 0; i < q.q.rows(); ++i) {
      if (!q.inlier_mask[i]) continue;
      if (association == Association::Hard) {
        Eigen::Index j = 0;
        q.q.row(i).maxCoeff(&j);
        entries_.push_back({static_cast<int>(i), static_cast<int>(j), 1.0});
        continue;
      }
      for (Eigen::Index j = 0; j < q.q.cols(); ++j) {
        const double w = q.q(i, j);
        if (w > q_prune && w > 0.0) entries_.push_back({static_cast<int>(i), static_cast<int>(j), w});
      }
    }
  }

  double prior_term(const VecX& theta) const {
    if (prior_.k == 0.0) return 0.0;
    return -prior_.k * ((theta - prior_.theta_prev) / prior_.dt - prior_.v_prev).squaredNorm();
  }

  VecX prior_gradient(const VecX& theta) const {
    if (prior_.k == 0.0) return VecX::Zero(theta.size());
    return (-2.0 * prior_.k / prior_.dt) * ((theta - prior_.theta_prev) / prior_.dt - prior_.v_prev);
  }

  double data_term(const PosedMesh& posed) const {
    const auto& faces = tmpl_.faces();
    double sum = 0.0;
    for (const auto& en : entries_) {
      const auto& fi = faces[en.face];
      const auto g = kernel::face_event_geometry<double>(rays_[en.event], lift(posed, fi[0]),
                                                         lift(posed, fi[1]), lift(posed, fi[2]));
      if (g.degenerate) continue;
      sum += en.weight * m_log(g, params_, variant_);
    }
    return sum;
  }

  double objective(const VecX& theta) const {
    return data_term(pose_mesh(tmpl_, theta)) + prior_term(theta);
  }

  VecX gradient_fd(const VecX& theta, double h) const {
    VecX g(theta.size());
    for (Eigen::Index d = 0; d < theta.size(); ++d) {
      VecX tp = theta, tm = theta;
      tp[d] += h;
      tm[d] -= h;
      g[d] = (objective(tp) - objective(tm)) / (2.0 * h);
    }
    return g;
  }

  VecX gradient_analytic(const VecX& theta) const {
    const PosedMesh posed = pose_mesh(tmpl_, theta);
    const auto& faces = tmpl_.faces();
    VecX vertex_grad = VecX::Zero(3 * static_cast<Eigen::Index>(posed.vertices.size()));
    for (const auto& en : entries_) {
      const auto& fi = faces[en.face];
      const FaceTerm t = m_log_with_gradient(rays_[en.event], posed.vertices[fi[0]],
                                             posed.vertices[fi[1]], posed.vertices[fi[2]],
                                             params_, variant_);
      if (t.degenerate) continue;
      for (int c = 0; c < 3; ++c) vertex_grad.segment<3>(3 * fi[c]) += en.weight * t.grad[c];
    }
    const MatX jac = vertex_jacobian(tmpl_, theta, posed);
    return jac.transpose() * vertex_grad + prior_gradient(theta);
  }

  VecX gradient(const VecX& theta, GradMode mode, double h) const {
    return mode == GradMode::Analytic ? gradient_analytic(theta) : gradient_fd(theta, h);
  }

  bool empty() const { return entries_.empty(); }

 private:
  static kernel::V3<double> lift(const PosedMesh& posed, int v) {
    const Vec3& p = posed.vertices[v];
    return {p.x(), p.y(), p.z()};
  }

  const KinematicTemplate& tmpl_;
  LikelihoodParams params_;
  MotionPriorState prior_;
  VariantM variant_;
  std::vector<Ray> rays_;
  std::vector<Entry> entries_;
};

void check_theta(const VecX& theta, const KinematicTemplate& tmpl, const char* what) {
  if (theta.size() != tmpl.param_dim()) {
    throw std::domain_error(std::string(what) + ": expected " + std::to_string(tmpl.param_dim()) +
                            " parameters, got " + std::to_string(theta.size()));
  }
  if (!theta.allFinite()) throw std::domain_error(std::string(what) + ": non-finite parameters");
}

}  // namespace

double m_step_objective(const EventBuffer& buffer, const AssociationMatrix& q, const VecX& theta,
                        const KinematicTemplate& tmpl, const PinholeCamera& camera,
                        const LikelihoodParams& params, const MotionPriorState& prior,
                        VariantM variant, Association association, double q_prune) {
  check_theta(theta, tmpl, "m_step_objective");
  return MStepProblem(buffer, q, tmpl, camera, params, prior, variant, association, q_prune)
      .objective(theta);
}

VecX m_step_gradient(const EventBuffer& buffer, const AssociationMatrix& q, const VecX& theta,
                     const KinematicTemplate& tmpl, const PinholeCamera& camera,
                     const LikelihoodParams& params, const MotionPriorState& prior,
                     VariantM variant, Association association, GradMode mode, double fd_step,
                     double q_prune) {
  check_theta(theta, tmpl, "m_step_gradient");
  return MStepProblem(buffer, q, tmpl, camera, params, prior, variant, association, q_prune)
      .gradient(theta, mode, fd_step);
}

VecX predict_init(const VecX& theta_prev, const VecX& v_prev, double dt) {
  if (!(dt > 0.0)) throw std::domain_error("predict_init: dt must be > 0");
  if (theta_prev.size() != v_prev.size()) throw std::domain_error("predict_init: size mismatch");
  return theta_prev + v_prev * dt;
}

BufferResult optimize_buffer(const EventBuffer& buffer, const VecX& theta_init,
                             const MotionPriorState& prior, const KinematicTemplate& tmpl,
                             const PinholeCamera& camera, const LikelihoodParams& params,
                             const EmConfig& config) {
  check_theta(theta_init, tmpl, "optimize_buffer");
  params.validate();
  config.validate();

  BufferResult result;
  result.theta = theta_init;
  VecX& theta = result.theta;

  // Ascent directions are taken in the metric of mean squared vertex
  // displacement, J^T J / V, so coordinates that barely move the surface are
  // not starved by the ones that move it a lot.
  const int dim = tmpl.param_dim();
  MatX metric = MatX::Identity(dim, dim);
  if (config.precondition) {
    const MatX jac = vertex_jacobian(tmpl, theta, pose_mesh(tmpl, theta));
    metric = jac.transpose() * jac / static_cast<double>(tmpl.rest_vertices().size());
    metric /= metric.trace() / dim;
    metric.diagonal().array() += 1e-6;
  }
  const Eigen::LDLT<MatX> precond(metric);

  for (int em = 0; em < config.max_em_iters; ++em) {
    result.diagnostics.em_iters = em + 1;
    result.q = e_step(buffer, pose_mesh(tmpl, theta), camera, params, config.variant_e,
                      config.cull_faces);
    result.diagnostics.inliers = result.q.inlier_count();
    const MStepProblem problem(buffer, result.q, tmpl, camera, params, prior, config.variant_m,
                               config.association, config.q_prune);
    if (problem.empty()) {
      // Nothing to align: the objective is the prior alone, maximized in closed form.
      theta = predict_init(prior.theta_prev, prior.v_prev, prior.dt);
      result.diagnostics.coasted = true;
      result.diagnostics.objective = problem.objective(theta);
      return result;
    }

    const VecX theta_e = theta;
    double f = problem.objective(theta);
    if (!std::isfinite(f)) throw std::runtime_error("optimize_buffer: non-finite objective");
    double rate = -1.0;  // step length per unit direction, initialized from the first direction
    for (int it = 0; it < config.max_grad_iters; ++it) {
      ++result.diagnostics.grad_iters;
      const VecX g = problem.gradient(theta, config.grad_mode, config.fd_step);
      const VecX dir = precond.solve(g);
      const double dnorm = dir.norm();
      if (!(dnorm > 0.0) || !dir.allFinite()) break;
      if (rate < 0.0) rate = config.step_size / dnorm;
      bool accepted = false;
      double moved = 0.0;
      while (true) {
        VecX step = rate * dir;
        const double len = step.norm();
        if (len > config.step_size) step *= config.step_size / len;
        moved = step.norm();
        if (moved < 1e-3 * config.early_stop_tol) break;
        const VecX cand = theta + step;
        const double fc = problem.objective(cand);
        if (fc > f) {
          theta = cand;
          f = fc;
          accepted = true;
          rate *= 1.5;
          break;
        }
        rate *= 0.5;
      }
      if (!accepted || moved < config.early_stop_tol) break;
      if ((theta - theta_e).norm() > config.expectation_update_tol) break;
    }
    result.diagnostics.objective = f;
    if ((theta - theta_e).norm() < config.early_stop_tol) break;
  }
  return result;
}

std::vector<TrajectorySample> track_stream(const std::vector<Event>& events, const VecX& theta0,
                                           double t0, const KinematicTemplate& tmpl,
                                           const PinholeCamera& camera,
                                           const TrackerConfig& config) {
  check_theta(theta0, tmpl, "track_stream");
  if (config.buffer_size <= 0) throw std::invalid_argument("tracker.buffer_size: must be > 0");
  if (!(config.prior_weight >= 0.0)) throw std::invalid_argument("tracker.prior_weight: must be >= 0");
  if (!(config.min_prior_dt > 0.0)) throw std::invalid_argument("tracker.min_prior_dt: must be > 0");
  config.likelihood.validate();
  config.em.validate();

  const size_t n = static_cast<size_t>(config.buffer_size);
  if (!events.empty() && events.size() < n) {
    std::cerr << "warning: stream has " << events.size() << " events, fewer than the buffer size "
              << n << "; using one truncated buffer\n";
  }

  std::vector<TrajectorySample> out;
  VecX theta_prev = theta0;
  VecX v_prev = VecX::Zero(theta0.size());
  double t_prev = t0;
  for (size_t start = 0; start < events.size(); start += n) {
    const size_t end = std::min(events.size(), start + n);
    const EventBuffer buffer = EventBuffer::from_events(
        std::vector<Event>(events.begin() + static_cast<std::ptrdiff_t>(start),
                           events.begin() + static_cast<std::ptrdiff_t>(end)));
    const double dt = std::max(buffer.t_mid() - t_prev, config.min_prior_dt);
    const MotionPriorState prior{theta_prev, v_prev, dt, config.prior_weight};
    BufferResult r = optimize_buffer(buffer, predict_init(theta_prev, v_prev, dt), prior, tmpl,
                                     camera, config.likelihood, config.em);
    v_prev = (r.theta - theta_prev) / dt;
    theta_prev = r.theta;
    t_prev = buffer.t_mid();
    out.push_back({buffer.t_mid(), std::move(r.theta), r.diagnostics});
  }
  return out;
}

}  // namespace evmesh
