#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <optional>

namespace evmesh {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;

/// Pinhole intrinsics plus a rigid camera-to-world extrinsic (identity by
/// default: camera at the origin looking down +z, image y pointing down).
class PinholeCamera {
 public:
  PinholeCamera(double fx, double fy, double cx, double cy, int width, int height,
                const Eigen::Isometry3d& world_from_camera = Eigen::Isometry3d::Identity());

  double fx() const { return fx_; }
  double fy() const { return fy_; }
  double cx() const { return cx_; }
  double cy() const { return cy_; }
  int width() const { return width_; }
  int height() const { return height_; }
  const Eigen::Isometry3d& world_from_camera() const { return world_from_camera_; }
  const Eigen::Isometry3d& camera_from_world() const { return camera_from_world_; }
  Vec3 center() const { return world_from_camera_.translation(); }

  // Pixel (x, y) addresses the sample point at integer coordinates (x, y).
  bool in_bounds(const Vec2& pixel) const;

  Vec3 to_camera(const Vec3& p_world) const { return camera_from_world_ * p_world; }
  Vec2 project_camera(const Vec3& p_cam) const {
    return {fx_ * p_cam.x() / p_cam.z() + cx_, fy_ * p_cam.y() / p_cam.z() + cy_};
  }
  Vec2 project(const Vec3& p_world) const { return project_camera(to_camera(p_world)); }

  // Point at camera-frame depth `depth` along the pixel's line of sight.
  Vec3 unproject(const Vec2& pixel, double depth) const;

 private:
  double fx_, fy_, cx_, cy_;
  int width_, height_;
  Eigen::Isometry3d world_from_camera_;
  Eigen::Isometry3d camera_from_world_;
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
};

/// Triangle with cached unit normal and centroid.
struct TriFace {
  Vec3 v0, v1, v2;
  Vec3 normal;
  Vec3 centroid;

  // Throws std::domain_error for a degenerate triangle.
  static TriFace from_vertices(const Vec3& v0, const Vec3& v1, const Vec3& v2);
  // Same, but reports degeneracy instead of throwing (normal is then zero).
  static std::optional<TriFace> try_from_vertices(const Vec3& v0, const Vec3& v1,
                                                  const Vec3& v2);
};

/// Relation between one event's line of sight and one mesh face.
struct FaceEventGeometry {
  double d_lat = 0.0;   // distance from the ray to the closest face edge (m)
  int sign = -1;        // +1 if the ray pierces the face, -1 otherwise
  double d_long = 0.0;  // ray parameter of the centroid's projection (m)
  double r_ang = 0.0;   // |cos| between ray direction and face normal
};

Ray line_of_sight(const PinholeCamera& camera, const Vec2& pixel);

struct LateralResult {
  double d_lat;
  int sign;
};
LateralResult lateral_distance(const Ray& ray, const TriFace& face);
double longitudinal_distance(const Ray& ray, const TriFace& face);
double angular_error(const Ray& ray, const TriFace& face);
FaceEventGeometry face_event_geometry(const Ray& ray, const TriFace& face);

inline constexpr double kDegenerateArea = 1e-12;

namespace kernel {

// Minimal 3-vector over an arbitrary scalar (double or Dual<N>) used by the
// geometry kernels so the same code drives the value and gradient paths.
template <class T>
struct V3 {
  T x, y, z;
};

template <class T> V3<T> operator-(const V3<T>& a, const V3<T>& b) {
  return {a.x - b.x, a.y - b.y, a.z - b.z};
}
template <class T> V3<T> operator+(const V3<T>& a, const V3<T>& b) {
  return {a.x + b.x, a.y + b.y, a.z + b.z};
}
template <class T, class S> V3<T> scale(const V3<T>& a, const S& s) {
  return {a.x * s, a.y * s, a.z * s};
}
template <class T> T dot(const V3<T>& a, const V3<T>& b) {
  return a.x * b.x + a.y * b.y + a.z * b.z;
}
template <class T> T dot(const V3<T>& a, const Vec3& b) {
  return a.x * b.x() + a.y * b.y() + a.z * b.z();
}
template <class T> V3<T> cross(const V3<T>& a, const V3<T>& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
template <class T> V3<T> lift(const Vec3& v) { return {T(v.x()), T(v.y()), T(v.z())}; }

inline double val(double x) { return x; }
template <class T> auto val(const T& x) -> decltype(x.v) { return x.v; }

template <class T>
struct Geometry {
  T d_lat_sq;  // squared lateral distance (smooth at the edge, unlike d_lat)
  int sign;
  T d_long;
  T r_ang;
  bool degenerate;
};

// Squared distance between an infinite line through the origin with unit
// direction `dir` and the segment [a, b] (both relative to the line origin).
// Projecting onto the plane orthogonal to `dir` turns this into a
// point-to-segment distance.
template <class T>
T line_segment_distance_sq(const Vec3& dir, const V3<T>& a, const V3<T>& b) {
  const V3<T> pa = a - scale(lift<T>(dir), dot(a, dir));
  const V3<T> pb = b - scale(lift<T>(dir), dot(b, dir));
  const V3<T> u = pb - pa;
  const T uu = dot(u, u);
  T s(0.0);
  if (val(uu) > 1e-300) {
    s = -dot(pa, u) / uu;
    if (val(s) < 0.0) s = T(0.0);
    if (val(s) > 1.0) s = T(1.0);
  }
  const V3<T> c = pa + scale(u, s);
  return dot(c, c);
}

template <class T>
Geometry<T> face_event_geometry(const Ray& ray, const V3<T>& w0, const V3<T>& w1,
                                const V3<T>& w2) {
  using std::abs;
  using std::sqrt;
  const V3<T> o = lift<T>(ray.origin);
  const V3<T> a = w0 - o;
  const V3<T> b = w1 - o;
  const V3<T> c = w2 - o;
  const Vec3& dir = ray.direction;

  Geometry<T> g{T(0.0), -1, T(0.0), T(0.0), false};
  const V3<T> n = cross(b - a, c - a);
  const T area2 = dot(n, n);
  if (val(area2) <= kDegenerateArea * kDegenerateArea) {
    g.degenerate = true;
    return g;
  }

  const T dab = line_segment_distance_sq(dir, a, b);
  const T dbc = line_segment_distance_sq(dir, b, c);
  const T dca = line_segment_distance_sq(dir, c, a);
  g.d_lat_sq = dab;
  if (val(dbc) < val(g.d_lat_sq)) g.d_lat_sq = dbc;
  if (val(dca) < val(g.d_lat_sq)) g.d_lat_sq = dca;

  // Orientation of the origin relative to each projected edge.
  const double s0 = val(dot(cross(a, b), dir));
  const double s1 = val(dot(cross(b, c), dir));
  const double s2 = val(dot(cross(c, a), dir));
  const bool all_nonneg = s0 >= 0.0 && s1 >= 0.0 && s2 >= 0.0;
  const bool all_nonpos = s0 <= 0.0 && s1 <= 0.0 && s2 <= 0.0;
  const bool flat = s0 == 0.0 && s1 == 0.0 && s2 == 0.0;
  g.sign = ((all_nonneg || all_nonpos) && !flat) || val(g.d_lat_sq) == 0.0 ? 1 : -1;

  const V3<T> centroid = scale(a + b + c, 1.0 / 3.0);
  g.d_long = dot(centroid, dir);
  g.r_ang = abs(dot(n, dir) / sqrt(area2));
  return g;
}

}  // namespace kernel

}  // namespace evmesh
