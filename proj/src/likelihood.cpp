#include "evmesh/tracker.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace evmesh {

std::string to_string(VariantE v) {
  switch (v) {
    case VariantE::E3: return "E3";
    case VariantE::E2Normal: return "E2_normal";
    case VariantE::E2Longitudinal: return "E2_longitudinal";
  }
  return "?";
}

std::string to_string(VariantM v) { return v == VariantM::M2 ? "M2" : "M1_lateral"; }
std::string to_string(Association a) { return a == Association::Soft ? "soft" : "hard"; }
std::string to_string(GradMode g) {
  return g == GradMode::Analytic ? "analytic" : "finite_difference";
}

VariantE parse_variant_e(const std::string& s) {
  for (auto v : {VariantE::E3, VariantE::E2Normal, VariantE::E2Longitudinal}) {
    if (s == to_string(v)) return v;
  }
  throw std::invalid_argument("unknown E-step variant '" + s + "' (E3, E2_normal, E2_longitudinal)");
}

VariantM parse_variant_m(const std::string& s) {
  for (auto v : {VariantM::M2, VariantM::M1Lateral}) {
    if (s == to_string(v)) return v;
  }
  throw std::invalid_argument("unknown M-step variant '" + s + "' (M2, M1_lateral)");
}

Association parse_association(const std::string& s) {
  for (auto v : {Association::Soft, Association::Hard}) {
    if (s == to_string(v)) return v;
  }
  throw std::invalid_argument("unknown association '" + s + "' (soft, hard)");
}

GradMode parse_grad_mode(const std::string& s) {
  for (auto v : {GradMode::FiniteDifference, GradMode::Analytic}) {
    if (s == to_string(v)) return v;
  }
  throw std::invalid_argument("unknown gradient mode '" + s + "' (finite_difference, analytic)");
}

namespace {
void require(bool ok, const std::string& field, const std::string& rule) {
  if (!ok) throw std::invalid_argument(field + ": " + rule);
}
}  // namespace

void LikelihoodParams::validate() const {
  require(alpha > 0.0 && std::isfinite(alpha), "tracker.alpha", "must be > 0");
  require(beta > 0.0 && std::isfinite(beta), "tracker.beta", "must be > 0");
  require(gamma > 0.0 && std::isfinite(gamma), "tracker.gamma", "must be > 0");
  require(d_lat_max > 0.0 && std::isfinite(d_lat_max), "tracker.d_lat_max", "must be > 0");
}

void EmConfig::validate() const {
  require(max_em_iters > 0, "tracker.max_em_iters", "must be > 0");
  require(expectation_update_tol > 0.0, "tracker.expectation_update_tol", "must be > 0");
  require(early_stop_tol > 0.0, "tracker.early_stop_tol", "must be > 0");
  require(step_size > 0.0, "tracker.step_size", "must be > 0");
  require(max_grad_iters > 0, "tracker.max_grad_iters", "must be > 0");
  require(fd_step > 0.0, "tracker.fd_step", "must be > 0");
  require(q_prune >= 0.0 && q_prune < 1.0, "tracker.q_prune", "must lie in [0, 1)");
}

EventBuffer EventBuffer::from_events(std::vector<Event> events) {
  EventBuffer b;
  b.events = std::move(events);
  if (!b.events.empty()) {
    b.t_start = b.events.front().t;
    b.t_end = b.events.back().t;
  }
  return b;
}

int AssociationMatrix::inlier_count() const {
  return static_cast<int>(std::count(inlier_mask.begin(), inlier_mask.end(), true));
}

double log_sigmoid(double x) {
  return x >= 0.0 ? -std::log1p(std::exp(-x)) : x - std::log1p(std::exp(x));
}

namespace {

double e_log_weight(double d_lat_sq, int sign, double d_long, double r_ang,
                    const LikelihoodParams& p, VariantE variant) {
  double lw = log_sigmoid(sign * d_lat_sq / p.alpha);
  if (variant != VariantE::E2Normal) lw -= d_long / p.beta;
  if (variant != VariantE::E2Longitudinal) lw -= r_ang / p.gamma;
  return lw;
}

// A face whose log-weight is this far below the row maximum has relative
// probability below e^-40 and is skipped by the culled E-step.
constexpr double kCullMargin = 40.0;

}  // namespace

double e_likelihood(const FaceEventGeometry& g, const LikelihoodParams& params, VariantE variant) {
  return std::exp(e_log_weight(g.d_lat * g.d_lat, g.sign, g.d_long, g.r_ang, params, variant));
}

double m_likelihood_log(const FaceEventGeometry& g, const LikelihoodParams& params,
                        VariantM variant) {
  double lw = log_sigmoid(g.sign * g.d_lat * g.d_lat / params.alpha);
  if (variant == VariantM::M2) lw -= g.r_ang / params.gamma;
  return lw;
}

AssociationMatrix e_step(const EventBuffer& buffer, const PosedMesh& mesh,
                         const PinholeCamera& camera, const LikelihoodParams& params,
                         VariantE variant, bool cull_faces) {
  const int n = static_cast<int>(buffer.events.size());
  const int nf = static_cast<int>(mesh.faces.size());
  AssociationMatrix out{MatX::Zero(n, nf), std::vector<bool>(n, false)};

  // Bounding spheres: every edge point lies within radius[f] of the centroid.
  std::vector<double> radius(nf, 0.0);
  for (int f = 0; f < nf; ++f) {
    const TriFace& t = mesh.faces[f];
    radius[f] = std::sqrt(std::max({(t.v0 - t.centroid).squaredNorm(),
                                    (t.v1 - t.centroid).squaredNorm(),
                                    (t.v2 - t.centroid).squaredNorm()}));
  }

  std::vector<double> logw(nf);
  std::vector<int> far;
  for (int i = 0; i < n; ++i) {
    const Event& e = buffer.events[i];
    const Ray ray = line_of_sight(camera, Vec2(e.x, e.y));
    std::fill(logw.begin(), logw.end(), -std::numeric_limits<double>::infinity());
    far.clear();

    double best = -std::numeric_limits<double>::infinity();
    double min_dlat = std::numeric_limits<double>::infinity();
    auto evaluate = [&](int f) {
      const TriFace& t = mesh.faces[f];
      const auto g = kernel::face_event_geometry<double>(
          ray, {t.v0.x(), t.v0.y(), t.v0.z()}, {t.v1.x(), t.v1.y(), t.v1.z()},
          {t.v2.x(), t.v2.y(), t.v2.z()});
      if (g.degenerate || g.d_long <= 0.0) return;
      min_dlat = std::min(min_dlat, std::sqrt(g.d_lat_sq));
      logw[f] = e_log_weight(g.d_lat_sq, g.sign, g.d_long, g.r_ang, params, variant);
      best = std::max(best, logw[f]);
    };

    for (int f = 0; f < nf; ++f) {
      if (mesh.degenerate[f]) continue;
      if (!cull_faces) {
        evaluate(f);
        continue;
      }
      const Vec3 oc = mesh.faces[f].centroid - ray.origin;
      const double d_long = oc.dot(ray.direction);
      if (d_long <= 0.0) continue;
      const double h2 = oc.squaredNorm() - d_long * d_long;
      const double reach = radius[f] + params.d_lat_max;
      // Far faces cannot be pierced and cannot decide the outlier test.
      if (h2 > reach * reach) far.push_back(f);
      else evaluate(f);
    }
    if (!(min_dlat <= params.d_lat_max)) continue;  // outlier

    // A far face has d_lat >= h - radius and sign -1, so its log-weight is at
    // most -(h - radius)^2 / alpha.
    const double cutoff = params.alpha * (kCullMargin - best);
    for (int f : far) {
      const TriFace& t = mesh.faces[f];
      const Vec3 oc = t.centroid - ray.origin;
      const double d_long = oc.dot(ray.direction);
      const double lower = std::sqrt(std::max(0.0, oc.squaredNorm() - d_long * d_long)) - radius[f];
      if (lower * lower <= cutoff) evaluate(f);
    }

    double total = 0.0;
    for (int f = 0; f < nf; ++f) {
      if (logw[f] == -std::numeric_limits<double>::infinity()) continue;
      const double w = std::exp(logw[f] - best);
      out.q(i, f) = w;
      total += w;
    }
    out.q.row(i) /= total;
    out.inlier_mask[i] = true;
  }
  return out;
}

}  // namespace evmesh
