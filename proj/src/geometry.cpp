#include "evmesh/geometry.hpp"

#include <stdexcept>
#include <string>

namespace evmesh {

PinholeCamera::PinholeCamera(double fx, double fy, double cx, double cy, int width, int height,
                             const Eigen::Isometry3d& world_from_camera)
    : fx_(fx),
      fy_(fy),
      cx_(cx),
      cy_(cy),
      width_(width),
      height_(height),
      world_from_camera_(world_from_camera),
      camera_from_world_(world_from_camera.inverse()) {
  if (!(fx > 0.0) || !(fy > 0.0)) throw std::domain_error("camera: focal lengths must be positive");
  if (width <= 0 || height <= 0) throw std::domain_error("camera: resolution must be positive");
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw std::domain_error("camera: principal point outside the sensor");
  }
}

bool PinholeCamera::in_bounds(const Vec2& pixel) const {
  return pixel.x() >= -0.5 && pixel.x() < width_ - 0.5 && pixel.y() >= -0.5 &&
         pixel.y() < height_ - 0.5;
}

Vec3 PinholeCamera::unproject(const Vec2& pixel, double depth) const {
  const Vec3 p_cam((pixel.x() - cx_) / fx_ * depth, (pixel.y() - cy_) / fy_ * depth, depth);
  return world_from_camera_ * p_cam;
}

Ray line_of_sight(const PinholeCamera& camera, const Vec2& pixel) {
  if (!camera.in_bounds(pixel)) {
    throw std::domain_error("line_of_sight: pixel (" + std::to_string(pixel.x()) + ", " +
                            std::to_string(pixel.y()) + ") outside the sensor");
  }
  const Vec3 d_cam((pixel.x() - camera.cx()) / camera.fx(),
                   (pixel.y() - camera.cy()) / camera.fy(), 1.0);
  return {camera.center(), (camera.world_from_camera().linear() * d_cam).normalized()};
}

std::optional<TriFace> TriFace::try_from_vertices(const Vec3& v0, const Vec3& v1,
                                                  const Vec3& v2) {
  const Vec3 n = (v1 - v0).cross(v2 - v0);
  const double len = n.norm();
  if (!(len > kDegenerateArea)) return std::nullopt;
  return TriFace{v0, v1, v2, n / len, (v0 + v1 + v2) / 3.0};
}

TriFace TriFace::from_vertices(const Vec3& v0, const Vec3& v1, const Vec3& v2) {
  auto face = try_from_vertices(v0, v1, v2);
  if (!face) throw std::domain_error("degenerate triangle");
  return *face;
}

namespace {

kernel::Geometry<double> evaluate(const Ray& ray, const TriFace& face) {
  const auto g = kernel::face_event_geometry<double>(ray, kernel::lift<double>(face.v0),
                                                     kernel::lift<double>(face.v1),
                                                     kernel::lift<double>(face.v2));
  if (g.degenerate) throw std::domain_error("degenerate triangle");
  return g;
}

}  // namespace

LateralResult lateral_distance(const Ray& ray, const TriFace& face) {
  const auto g = evaluate(ray, face);
  return {std::sqrt(g.d_lat_sq), g.sign};
}

double longitudinal_distance(const Ray& ray, const TriFace& face) {
  return (face.centroid - ray.origin).dot(ray.direction);
}

double angular_error(const Ray& ray, const TriFace& face) {
  return std::min(1.0, std::abs(ray.direction.dot(face.normal)));
}

FaceEventGeometry face_event_geometry(const Ray& ray, const TriFace& face) {
  const auto g = evaluate(ray, face);
  return {std::sqrt(g.d_lat_sq), g.sign, g.d_long, std::min(1.0, g.r_ang)};
}

}  // namespace evmesh
