#pragma once

#include "evmesh/geometry.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <optional>
#include <string>
#include <vector>

namespace evmesh {

using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;
using FaceIndices = std::array<int, 3>;

struct Bone {
  std::string name;
  int parent = -1;                    // -1 only for bone 0
  Eigen::Isometry3d rest_local = Eigen::Isometry3d::Identity();  // relative to parent
  std::vector<Vec3> dof_axes;         // rotation axes in the bone's local frame, applied in order
};

struct SkinInfluence {
  int bone;
  double weight;
};

struct JointSite {
  std::string name;
  int bone;
  Vec3 offset;  // in the bone frame
};

/// Linear map from low-dimensional coefficients to the full joint-angle vector.
struct PcaSubspace {
  MatX basis;  // dof_count x k
  VecX mean;   // dof_count
};

/// Skinned articulated triangle mesh. Immutable after construction.
class KinematicTemplate {
 public:
  KinematicTemplate(std::string name, std::vector<Vec3> rest_vertices,
                    std::vector<FaceIndices> faces, std::vector<Bone> bones,
                    std::vector<std::vector<SkinInfluence>> skinning,
                    std::vector<JointSite> joint_sites, std::optional<PcaSubspace> pca);

  const std::string& name() const { return name_; }
  const std::vector<Vec3>& rest_vertices() const { return rest_vertices_; }
  const std::vector<FaceIndices>& faces() const { return faces_; }
  const std::vector<Bone>& bones() const { return bones_; }
  const std::vector<std::vector<SkinInfluence>>& skinning() const { return skinning_; }
  const std::vector<JointSite>& joint_sites() const { return joint_sites_; }
  const std::optional<PcaSubspace>& pca() const { return pca_; }

  int dof_count() const { return dof_count_; }
  // Dimension of the pose vector theta: PCA dimension if a basis is present.
  int param_dim() const;
  // Index of the first dof of `bone` within the joint-angle vector.
  int dof_offset(int bone) const { return dof_offsets_[bone]; }

  VecX joint_angles(const VecX& theta) const;
  // d(joint angles)/d(theta).
  MatX angle_jacobian() const;

  const std::vector<Eigen::Isometry3d>& rest_globals() const { return rest_globals_; }
  // Axis-aligned extent of the rest mesh.
  double bounding_box_diagonal() const;

 private:
  std::string name_;
  std::vector<Vec3> rest_vertices_;
  std::vector<FaceIndices> faces_;
  std::vector<Bone> bones_;
  std::vector<std::vector<SkinInfluence>> skinning_;
  std::vector<JointSite> joint_sites_;
  std::optional<PcaSubspace> pca_;
  int dof_count_ = 0;
  std::vector<int> dof_offsets_;
  std::vector<Eigen::Isometry3d> rest_globals_;
};

/// Mesh and skeleton evaluated at one pose.
struct PosedMesh {
  std::vector<Vec3> vertices;
  std::vector<TriFace> faces;           // aligned with template faces
  std::vector<bool> degenerate;         // faces collapsed by the pose
  std::vector<Vec3> joints;
  std::vector<Eigen::Isometry3d> bone_globals;
  // Skinning transforms: bone_globals[b] * rest_globals[b]^-1.
  std::vector<Eigen::Isometry3d> skin_transforms;
};

PosedMesh pose_mesh(const KinematicTemplate& tmpl, const VecX& theta);
std::vector<Vec3> joint_positions(const KinematicTemplate& tmpl, const VecX& theta);

/// Derivatives of posed vertices with respect to theta, stacked as a
/// (3 * vertex_count) x param_dim matrix (rows 3v..3v+2 belong to vertex v).
MatX vertex_jacobian(const KinematicTemplate& tmpl, const VecX& theta, const PosedMesh& posed);

// Built-in templates: "finger3", "hand5", "armhand".
KinematicTemplate make_builtin_template(const std::string& name);
bool is_builtin_template(const std::string& name);

KinematicTemplate load_template_json(const std::string& path);
void save_template_json(const KinematicTemplate& tmpl, const std::string& path);

}  // namespace evmesh
