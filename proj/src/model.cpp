#include "evmesh/model.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace evmesh {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) throw std::domain_error("template: " + what);
}

}  // namespace

KinematicTemplate::KinematicTemplate(std::string name, std::vector<Vec3> rest_vertices,
                                     std::vector<FaceIndices> faces, std::vector<Bone> bones,
                                     std::vector<std::vector<SkinInfluence>> skinning,
                                     std::vector<JointSite> joint_sites,
                                     std::optional<PcaSubspace> pca)
    : name_(std::move(name)),
      rest_vertices_(std::move(rest_vertices)),
      faces_(std::move(faces)),
      bones_(std::move(bones)),
      skinning_(std::move(skinning)),
      joint_sites_(std::move(joint_sites)),
      pca_(std::move(pca)) {
  const int nv = static_cast<int>(rest_vertices_.size());
  const int nb = static_cast<int>(bones_.size());
  require(nb > 0, "at least one bone is required");
  require(bones_[0].parent == -1, "bone 0 must be the root (parent -1)");
  for (int b = 1; b < nb; ++b) {
    require(bones_[b].parent >= 0 && bones_[b].parent < b,
            "bone " + std::to_string(b) + " must have a parent with a smaller index");
  }
  for (const auto& bone : bones_) {
    for (const auto& axis : bone.dof_axes) {
      require(axis.norm() > 1e-12, "zero-length dof axis on bone '" + bone.name + "'");
    }
  }

  require(static_cast<int>(skinning_.size()) == nv, "one skinning entry per vertex required");
  for (int v = 0; v < nv; ++v) {
    double sum = 0.0;
    require(!skinning_[v].empty(), "vertex " + std::to_string(v) + " has no skinning weights");
    for (const auto& inf : skinning_[v]) {
      require(inf.bone >= 0 && inf.bone < nb, "skinning bone index out of range");
      require(inf.weight >= 0.0, "negative skinning weight at vertex " + std::to_string(v));
      sum += inf.weight;
    }
    require(std::abs(sum - 1.0) <= 1e-9,
            "skinning weights of vertex " + std::to_string(v) + " do not sum to 1");
  }

  for (const auto& f : faces_) {
    for (int idx : f) require(idx >= 0 && idx < nv, "face index out of range");
    require(TriFace::try_from_vertices(rest_vertices_[f[0]], rest_vertices_[f[1]],
                                       rest_vertices_[f[2]])
                .has_value(),
            "degenerate face in rest pose");
  }
  for (const auto& site : joint_sites_) {
    require(site.bone >= 0 && site.bone < nb, "joint site '" + site.name + "' has a bad bone");
  }

  dof_offsets_.resize(nb);
  for (int b = 0; b < nb; ++b) {
    dof_offsets_[b] = dof_count_;
    dof_count_ += static_cast<int>(bones_[b].dof_axes.size());
  }
  for (auto& bone : bones_) {
    for (auto& axis : bone.dof_axes) axis.normalize();
  }

  if (pca_) {
    require(pca_->basis.rows() == dof_count_, "PCA basis rows must equal the dof count");
    require(pca_->basis.cols() > 0, "PCA basis must have at least one column");
    require(pca_->mean.size() == dof_count_, "PCA mean size must equal the dof count");
    require(pca_->basis.allFinite() && pca_->mean.allFinite(), "PCA block is not finite");
  }

  rest_globals_.resize(nb);
  for (int b = 0; b < nb; ++b) {
    rest_globals_[b] = bones_[b].parent < 0 ? bones_[b].rest_local
                                            : rest_globals_[bones_[b].parent] * bones_[b].rest_local;
  }
}

int KinematicTemplate::param_dim() const {
  return pca_ ? static_cast<int>(pca_->basis.cols()) : dof_count_;
}

VecX KinematicTemplate::joint_angles(const VecX& theta) const {
  if (theta.size() != param_dim()) {
    throw std::domain_error("pose: expected " + std::to_string(param_dim()) +
                            " parameters, got " + std::to_string(theta.size()));
  }
  if (!theta.allFinite()) throw std::domain_error("pose: non-finite parameters");
  if (pca_) return pca_->mean + pca_->basis * theta;
  return theta;
}

MatX KinematicTemplate::angle_jacobian() const {
  if (pca_) return pca_->basis;
  return MatX::Identity(dof_count_, dof_count_);
}

double KinematicTemplate::bounding_box_diagonal() const {
  Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
  Vec3 hi = -lo;
  for (const auto& v : rest_vertices_) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  return (hi - lo).norm();
}

namespace {

std::vector<Eigen::Isometry3d> bone_globals(const KinematicTemplate& tmpl, const VecX& angles) {
  const auto& bones = tmpl.bones();
  std::vector<Eigen::Isometry3d> globals(bones.size());
  for (size_t b = 0; b < bones.size(); ++b) {
    Eigen::Isometry3d local = bones[b].rest_local;
    const int off = tmpl.dof_offset(static_cast<int>(b));
    for (size_t k = 0; k < bones[b].dof_axes.size(); ++k) {
      local.rotate(Eigen::AngleAxisd(angles[off + static_cast<int>(k)], bones[b].dof_axes[k]));
    }
    globals[b] = bones[b].parent < 0 ? local : globals[bones[b].parent] * local;
  }
  return globals;
}

}  // namespace

PosedMesh pose_mesh(const KinematicTemplate& tmpl, const VecX& theta) {
  const VecX angles = tmpl.joint_angles(theta);
  PosedMesh out;
  out.bone_globals = bone_globals(tmpl, angles);
  out.skin_transforms.resize(out.bone_globals.size());
  for (size_t b = 0; b < out.bone_globals.size(); ++b) {
    out.skin_transforms[b] = out.bone_globals[b] * tmpl.rest_globals()[b].inverse();
  }

  const auto& rest = tmpl.rest_vertices();
  out.vertices.resize(rest.size());
  for (size_t v = 0; v < rest.size(); ++v) {
    Vec3 p = Vec3::Zero();
    for (const auto& inf : tmpl.skinning()[v]) p += inf.weight * (out.skin_transforms[inf.bone] * rest[v]);
    out.vertices[v] = p;
  }

  const auto& faces = tmpl.faces();
  out.faces.resize(faces.size());
  out.degenerate.assign(faces.size(), false);
  for (size_t f = 0; f < faces.size(); ++f) {
    const Vec3& a = out.vertices[faces[f][0]];
    const Vec3& b = out.vertices[faces[f][1]];
    const Vec3& c = out.vertices[faces[f][2]];
    if (auto face = TriFace::try_from_vertices(a, b, c)) {
      out.faces[f] = *face;
    } else {
      out.faces[f] = TriFace{a, b, c, Vec3::Zero(), (a + b + c) / 3.0};
      out.degenerate[f] = true;
    }
  }

  out.joints.reserve(tmpl.joint_sites().size());
  for (const auto& site : tmpl.joint_sites()) out.joints.push_back(out.bone_globals[site.bone] * site.offset);
  return out;
}

std::vector<Vec3> joint_positions(const KinematicTemplate& tmpl, const VecX& theta) {
  const auto globals = bone_globals(tmpl, tmpl.joint_angles(theta));
  std::vector<Vec3> joints;
  joints.reserve(tmpl.joint_sites().size());
  for (const auto& site : tmpl.joint_sites()) joints.push_back(globals[site.bone] * site.offset);
  return joints;
}

MatX vertex_jacobian(const KinematicTemplate& tmpl, const VecX& theta, const PosedMesh& posed) {
  const auto& bones = tmpl.bones();
  const VecX angles = tmpl.joint_angles(theta);
  const MatX dangle = tmpl.angle_jacobian();
  const int nb = static_cast<int>(bones.size());

  // World axis and pivot of every dof at this pose.
  std::vector<Vec3> axis(tmpl.dof_count());
  std::vector<Vec3> pivot(tmpl.dof_count());
  for (int b = 0; b < nb; ++b) {
    Eigen::Isometry3d frame = bones[b].parent < 0
                                  ? bones[b].rest_local
                                  : posed.bone_globals[bones[b].parent] * bones[b].rest_local;
    const int off = tmpl.dof_offset(b);
    for (size_t k = 0; k < bones[b].dof_axes.size(); ++k) {
      axis[off + k] = frame.linear() * bones[b].dof_axes[k];
      pivot[off + k] = frame.translation();
      frame.rotate(Eigen::AngleAxisd(angles[off + static_cast<int>(k)], bones[b].dof_axes[k]));
    }
  }

  const auto& rest = tmpl.rest_vertices();
  const int dim = tmpl.param_dim();
  MatX jac = MatX::Zero(3 * static_cast<Eigen::Index>(rest.size()), dim);
  for (size_t v = 0; v < rest.size(); ++v) {
    auto block = jac.middleRows(3 * static_cast<Eigen::Index>(v), 3);
    for (const auto& inf : tmpl.skinning()[v]) {
      if (inf.weight == 0.0) continue;
      const Vec3 x = posed.skin_transforms[inf.bone] * rest[v];
      for (int b = inf.bone; b >= 0; b = bones[b].parent) {
        const int off = tmpl.dof_offset(b);
        for (size_t k = 0; k < bones[b].dof_axes.size(); ++k) {
          const int m = off + static_cast<int>(k);
          const Vec3 dv = inf.weight * axis[m].cross(x - pivot[m]);
          block.noalias() += dv * dangle.row(m);
        }
      }
    }
  }
  return jac;
}

}  // namespace evmesh
