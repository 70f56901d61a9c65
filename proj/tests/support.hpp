#pragma once

#include "evmesh/geometry.hpp"
#include "evmesh/model.hpp"
#include "evmesh/simulator.hpp"

#include <cmath>
#include <random>
#include <vector>

namespace evtest {

using namespace evmesh;

inline Vec3 random_vec(std::mt19937_64& g, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  return {u(g), u(g), u(g)};
}

inline TriFace random_face(std::mt19937_64& g, const Vec3& center, double size) {
  while (true) {
    const Vec3 a = center + random_vec(g, -size, size);
    const Vec3 b = center + random_vec(g, -size, size);
    const Vec3 c = center + random_vec(g, -size, size);
    if ((b - a).cross(c - a).norm() > 1e-3 * size * size) return TriFace::from_vertices(a, b, c);
  }
}

inline Ray random_ray(std::mt19937_64& g) {
  return {random_vec(g, -0.2, 0.2), random_vec(g, -1.0, 1.0).normalized()};
}

// Brute-force line-to-segment distance: dense sampling of the segment, exact
// point-to-line distance per sample, then a local golden-section polish.
inline double sampled_edge_distance(const Ray& ray, const Vec3& a, const Vec3& b, int samples = 2000) {
  auto dist = [&](double s) {
    const Vec3 p = a + s * (b - a) - ray.origin;
    return (p - p.dot(ray.direction) * ray.direction).norm();
  };
  int best = 0;
  double best_d = dist(0.0);
  for (int i = 1; i <= samples; ++i) {
    const double d = dist(static_cast<double>(i) / samples);
    if (d < best_d) best_d = d, best = i;
  }
  double lo = std::max(0.0, (best - 1.0) / samples), hi = std::min(1.0, (best + 1.0) / samples);
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  for (int it = 0; it < 100; ++it) {
    const double m1 = hi - r * (hi - lo), m2 = lo + r * (hi - lo);
    if (dist(m1) < dist(m2)) hi = m2;
    else lo = m1;
  }
  return std::min(best_d, dist(0.5 * (lo + hi)));
}

inline double sampled_lateral_distance(const Ray& ray, const TriFace& f) {
  return std::min({sampled_edge_distance(ray, f.v0, f.v1), sampled_edge_distance(ray, f.v1, f.v2),
                   sampled_edge_distance(ray, f.v2, f.v0)});
}

// Two unit-length bones along +x. The root turns about +z, the child about
// `axis` in its own frame. Each bone rigidly owns one box of vertices.
inline KinematicTemplate two_bone_chain(const Vec3& axis = Vec3::UnitX(), bool with_identity_pca = false) {
  std::vector<Bone> bones(2);
  bones[0].name = "root";
  bones[0].parent = -1;
  bones[0].dof_axes = {Vec3::UnitZ()};
  bones[1].name = "child";
  bones[1].parent = 0;
  bones[1].rest_local = Eigen::Isometry3d(Eigen::Translation3d(1.0, 0.0, 0.0));
  bones[1].dof_axes = {axis};

  std::vector<Vec3> verts;
  std::vector<FaceIndices> faces;
  std::vector<std::vector<SkinInfluence>> skin;
  for (int b = 0; b < 2; ++b) {
    const int base = static_cast<int>(verts.size());
    const double x0 = b + 0.1, x1 = b + 0.9;
    for (double x : {x0, x1}) {
      verts.emplace_back(x, -0.1, 0.05);
      verts.emplace_back(x, 0.1, 0.05);
      verts.emplace_back(x, 0.1, -0.05);
      verts.emplace_back(x, -0.1, -0.05);
    }
    for (int k = 0; k < 4; ++k) {
      const int a0 = base + k, a1 = base + (k + 1) % 4, b0 = a0 + 4, b1 = a1 + 4;
      faces.push_back({a0, a1, b1});
      faces.push_back({a0, b1, b0});
    }
    for (int v = 0; v < 8; ++v) skin.push_back({{b, 1.0}});
  }
  std::vector<JointSite> joints = {{"base", 0, Vec3::Zero()}, {"knuckle", 1, Vec3::Zero()},
                                   {"tip", 1, Vec3(1.0, 0.0, 0.0)}};
  std::optional<PcaSubspace> pca;
  if (with_identity_pca) pca = PcaSubspace{MatX::Identity(2, 2), VecX::Zero(2)};
  return KinematicTemplate("chain2", verts, faces, bones, skin, joints, pca);
}

inline PinholeCamera hd_camera() { return PinholeCamera(1000, 1000, 640, 360, 1280, 720); }

inline PinholeCamera small_camera() { return PinholeCamera(200, 200, 80, 60, 160, 120); }

}  // namespace evtest
