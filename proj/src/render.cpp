#include "evmesh/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace evmesh {

Raster rasterize(const PosedMesh& mesh, const std::vector<FaceIndices>& faces,
                 const PinholeCamera& camera) {
  const int w = camera.width();
  const int h = camera.height();
  Raster r{Image<double>(w, h, std::numeric_limits<double>::infinity()), Image<int>(w, h, -1),
           Image<double>(w, h, 0.0), Image<double>(w, h, 0.0)};

  std::vector<Vec3> cam(mesh.vertices.size());
  for (size_t v = 0; v < cam.size(); ++v) cam[v] = camera.to_camera(mesh.vertices[v]);

  for (size_t f = 0; f < faces.size(); ++f) {
    if (mesh.degenerate[f]) continue;
    const Vec3& p0 = cam[faces[f][0]];
    const Vec3& p1 = cam[faces[f][1]];
    const Vec3& p2 = cam[faces[f][2]];
    // No clipping: faces crossing the near plane are dropped.
    if (p0.z() <= kNearPlane || p1.z() <= kNearPlane || p2.z() <= kNearPlane) continue;
    const Vec2 s0 = camera.project_camera(p0);
    const Vec2 s1 = camera.project_camera(p1);
    const Vec2 s2 = camera.project_camera(p2);
    const double area = (s1 - s0).x() * (s2 - s0).y() - (s1 - s0).y() * (s2 - s0).x();
    if (std::abs(area) < 1e-12) continue;

    const int x0 = std::max(0, static_cast<int>(std::ceil(std::min({s0.x(), s1.x(), s2.x()}))));
    const int x1 = std::min(w - 1, static_cast<int>(std::floor(std::max({s0.x(), s1.x(), s2.x()}))));
    const int y0 = std::max(0, static_cast<int>(std::ceil(std::min({s0.y(), s1.y(), s2.y()}))));
    const int y1 = std::min(h - 1, static_cast<int>(std::floor(std::max({s0.y(), s1.y(), s2.y()}))));
    if (x0 > x1 || y0 > y1) continue;

    const double inv_area = 1.0 / area;
    const double iz0 = 1.0 / p0.z(), iz1 = 1.0 / p1.z(), iz2 = 1.0 / p2.z();
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double px = x, py = y;
        const double l0 = ((s1.x() - px) * (s2.y() - py) - (s1.y() - py) * (s2.x() - px)) * inv_area;
        const double l1 = ((s2.x() - px) * (s0.y() - py) - (s2.y() - py) * (s0.x() - px)) * inv_area;
        const double l2 = 1.0 - l0 - l1;
        if (l0 < 0.0 || l1 < 0.0 || l2 < 0.0) continue;
        const double inv_z = l0 * iz0 + l1 * iz1 + l2 * iz2;
        const double z = 1.0 / inv_z;
        if (z >= r.depth(x, y)) continue;
        r.depth(x, y) = z;
        r.face(x, y) = static_cast<int>(f);
        r.bary1(x, y) = l1 * iz1 * z;
        r.bary2(x, y) = l2 * iz2 * z;
      }
    }
  }
  return r;
}

ImageD log_background(const ImageD& background) {
  ImageD out(background.width(), background.height());
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::log(background[i] + kLogEpsilon);
  return out;
}

ImageD shade_log_brightness_cached(const Raster& raster, const PosedMesh& mesh,
                                   const ImageD& log_bg, const ShadingConfig& shading) {
  ImageD out = log_bg;
  const Vec3 light = shading.light_direction.normalized();
  for (size_t i = 0; i < out.size(); ++i) {
    const int f = raster.face[i];
    if (f < 0) continue;
    // Two-sided Lambertian so winding order does not matter.
    const double lambert = std::abs(mesh.faces[f].normal.dot(light));
    const double intensity = shading.albedo * (shading.ambient + (1.0 - shading.ambient) * lambert);
    out[i] = std::log(intensity + kLogEpsilon);
  }
  return out;
}

ImageD shade_log_brightness(const Raster& raster, const PosedMesh& mesh,
                            const ImageD& background, const ShadingConfig& shading) {
  return shade_log_brightness_cached(raster, mesh, log_background(background), shading);
}

FrameModalities render(const PosedMesh& mesh, const std::vector<FaceIndices>& faces,
                       const PinholeCamera& camera, const ImageD& background,
                       const ShadingConfig& shading) {
  const Raster raster = rasterize(mesh, faces, camera);
  FrameModalities m;
  m.log_brightness = shade_log_brightness(raster, mesh, background, shading);
  m.depth = raster.depth;
  m.normals = Image<Vec3>(camera.width(), camera.height(), Vec3::Zero());
  m.motion_field = Image<Vec2>(camera.width(), camera.height(), Vec2::Zero());
  for (size_t i = 0; i < m.normals.size(); ++i) {
    if (raster.face[i] >= 0) m.normals[i] = mesh.faces[raster.face[i]].normal;
  }
  return m;
}

Image<Vec2> motion_field(const Raster& raster_a, const PosedMesh& b,
                         const std::vector<FaceIndices>& faces, double dt,
                         const PinholeCamera& camera) {
  const int w = raster_a.face.width();
  const int h = raster_a.face.height();
  Image<Vec2> field(w, h, Vec2::Zero());
  if (!(dt > 0.0)) return field;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const int f = raster_a.face(x, y);
      if (f < 0) continue;
      const double b1 = raster_a.bary1(x, y);
      const double b2 = raster_a.bary2(x, y);
      const Vec3 p = (1.0 - b1 - b2) * b.vertices[faces[f][0]] + b1 * b.vertices[faces[f][1]] +
                     b2 * b.vertices[faces[f][2]];
      const Vec3 pc = camera.to_camera(p);
      if (pc.z() <= kNearPlane) continue;
      field(x, y) = (camera.project_camera(pc) - Vec2(x, y)) / dt;
    }
  }
  return field;
}

Image<Vec2> motion_field(const KinematicTemplate& tmpl, const VecX& theta_a, const VecX& theta_b,
                         double dt, const PinholeCamera& camera) {
  const PosedMesh a = pose_mesh(tmpl, theta_a);
  const PosedMesh b = pose_mesh(tmpl, theta_b);
  return motion_field(rasterize(a, tmpl.faces(), camera), b, tmpl.faces(), dt, camera);
}

double adaptive_dt(const Image<Vec2>& field, double budget, double dt_min, double dt_max) {
  double max_speed = 0.0;
  for (size_t i = 0; i < field.size(); ++i) max_speed = std::max(max_speed, field[i].norm());
  if (max_speed <= 0.0) return dt_max;
  return std::clamp(budget / max_speed, dt_min, dt_max);
}

}  // namespace evmesh
