// Procedurally built articulated templates standing in for licensed hand and
// body models: a single finger, a five-digit hand with a PCA pose subspace,
// and the same hand on a forearm with a 3-dof elbow.

#include "evmesh/model.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <stdexcept>

namespace evmesh {

namespace {

constexpr double kPi = std::numbers::pi;

const Vec3 kFlexAxis(-1.0, 0.0, 0.0);   // bends the digit toward the palm side (-z)
const Vec3 kAbductAxis(0.0, 0.0, 1.0);  // in-plane spread

struct MeshBuilder {
  std::vector<Vec3> vertices;
  std::vector<FaceIndices> faces;
  std::vector<std::vector<SkinInfluence>> skinning;

  int add_vertex(const Vec3& p, std::vector<SkinInfluence> skin) {
    vertices.push_back(p);
    skinning.push_back(std::move(skin));
    return static_cast<int>(vertices.size()) - 1;
  }
  void add_tri(int a, int b, int c) { faces.push_back({a, b, c}); }
};

double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * (3.0 - 2.0 * t);
}

Eigen::Isometry3d translation(double x, double y, double z) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.translate(Vec3(x, y, z));
  return t;
}

Eigen::Isometry3d placement(const Vec3& position, double yaw, double pitch, double roll) {
  Eigen::Isometry3d t = Eigen::Isometry3d::Identity();
  t.translate(position);
  t.rotate(Eigen::AngleAxisd(yaw, Vec3::UnitY()));
  t.rotate(Eigen::AngleAxisd(pitch, Vec3::UnitX()));
  t.rotate(Eigen::AngleAxisd(roll, Vec3::UnitZ()));
  return t;
}

struct ChainSpec {
  int parent_bone;             // bone the chain attaches to (-1: chain root is the template root)
  std::vector<int> bones;      // chain bones, proximal first
  std::vector<double> lengths;
  double radius_base;
  double radius_tip;
  int sides;
  int rings_per_segment;
  double base_overlap;         // tube starts this far before the first joint
};

// Tube following a straight (at rest) bone chain along each bone's +y axis.
// Skinning blends neighbouring bones over a band around each joint.
void add_chain_tube(MeshBuilder& mesh, const std::vector<Eigen::Isometry3d>& rest_globals,
                    const ChainSpec& spec) {
  const int nseg = static_cast<int>(spec.bones.size());
  std::vector<double> starts(nseg + 1, 0.0);
  for (int k = 0; k < nseg; ++k) starts[k + 1] = starts[k] + spec.lengths[k];
  const double total = starts[nseg];
  const double blend = 0.6 * spec.radius_base;

  auto skin_at = [&](double s) {
    std::vector<double> w(nseg + 1, 0.0);  // index 0 = parent bone, k+1 = chain bone k
    // Proximal blend from the parent (if any) into the first chain bone.
    double prev = spec.parent_bone >= 0 ? 1.0 - smoothstep((s + blend) / (2.0 * blend)) : 0.0;
    w[0] = prev;
    double remaining = 1.0 - prev;
    for (int k = 0; k < nseg; ++k) {
      double share = remaining;
      if (k + 1 < nseg) {
        const double j = starts[k + 1];
        share = remaining * (1.0 - smoothstep((s - (j - blend)) / (2.0 * blend)));
      }
      w[k + 1] = share;
      remaining -= share;
    }
    std::vector<SkinInfluence> skin;
    double sum = 0.0;
    for (int k = 0; k <= nseg; ++k) {
      const int bone = k == 0 ? spec.parent_bone : spec.bones[k - 1];
      if (bone < 0 || w[k] <= 1e-12) continue;
      skin.push_back({bone, w[k]});
      sum += w[k];
    }
    for (auto& inf : skin) inf.weight /= sum;
    return skin;
  };

  auto point_at = [&](double s, double radius, double phi) {
    int k = 0;
    while (k + 1 < nseg && s >= starts[k + 1]) ++k;
    const Vec3 local(radius * std::cos(phi), s - starts[k], radius * std::sin(phi));
    return Vec3(rest_globals[spec.bones[k]] * local);
  };

  const double s0 = -spec.base_overlap;
  const int rings = nseg * spec.rings_per_segment + 1;
  std::vector<std::vector<int>> ring_ids(rings);
  for (int r = 0; r < rings; ++r) {
    const double s = s0 + (total - s0) * r / (rings - 1);
    const double frac = std::clamp(s / total, 0.0, 1.0);
    const double radius = spec.radius_base + (spec.radius_tip - spec.radius_base) * frac;
    const auto skin = skin_at(s);
    for (int i = 0; i < spec.sides; ++i) {
      const double phi = 2.0 * kPi * i / spec.sides;
      ring_ids[r].push_back(mesh.add_vertex(point_at(s, radius, phi), skin));
    }
  }
  for (int r = 0; r + 1 < rings; ++r) {
    for (int i = 0; i < spec.sides; ++i) {
      const int j = (i + 1) % spec.sides;
      mesh.add_tri(ring_ids[r][i], ring_ids[r + 1][i], ring_ids[r + 1][j]);
      mesh.add_tri(ring_ids[r][i], ring_ids[r + 1][j], ring_ids[r][j]);
    }
  }
  const int base = mesh.add_vertex(point_at(s0, 0.0, 0.0), skin_at(s0));
  const int tip = mesh.add_vertex(point_at(total + 0.6 * spec.radius_tip, 0.0, 0.0), skin_at(total));
  for (int i = 0; i < spec.sides; ++i) {
    const int j = (i + 1) % spec.sides;
    mesh.add_tri(base, ring_ids[0][j], ring_ids[0][i]);
    mesh.add_tri(tip, ring_ids[rings - 1][i], ring_ids[rings - 1][j]);
  }
}

// Subdivided box in the frame of `bone`, fully skinned to that bone.
void add_box(MeshBuilder& mesh, const Eigen::Isometry3d& frame, int bone, const Vec3& lo,
             const Vec3& hi, const std::array<int, 3>& divisions) {
  const std::vector<SkinInfluence> skin{{bone, 1.0}};
  // Each box side: fixed axis, its value, and the two in-plane axes.
  for (int axis = 0; axis < 3; ++axis) {
    const int u = (axis + 1) % 3;
    const int v = (axis + 2) % 3;
    for (int side = 0; side < 2; ++side) {
      const double fixed = side == 0 ? lo[axis] : hi[axis];
      const int nu = divisions[u];
      const int nv = divisions[v];
      std::vector<int> ids;
      for (int i = 0; i <= nu; ++i) {
        for (int j = 0; j <= nv; ++j) {
          Vec3 p;
          p[axis] = fixed;
          p[u] = lo[u] + (hi[u] - lo[u]) * i / nu;
          p[v] = lo[v] + (hi[v] - lo[v]) * j / nv;
          ids.push_back(mesh.add_vertex(frame * p, skin));
        }
      }
      auto id = [&](int i, int j) { return ids[i * (nv + 1) + j]; };
      for (int i = 0; i < nu; ++i) {
        for (int j = 0; j < nv; ++j) {
          if (side == 1) {
            mesh.add_tri(id(i, j), id(i + 1, j), id(i + 1, j + 1));
            mesh.add_tri(id(i, j), id(i + 1, j + 1), id(i, j + 1));
          } else {
            mesh.add_tri(id(i, j), id(i + 1, j + 1), id(i + 1, j));
            mesh.add_tri(id(i, j), id(i, j + 1), id(i + 1, j + 1));
          }
        }
      }
    }
  }
}

std::vector<Eigen::Isometry3d> rest_globals_of(const std::vector<Bone>& bones) {
  std::vector<Eigen::Isometry3d> g(bones.size());
  for (size_t b = 0; b < bones.size(); ++b) {
    g[b] = bones[b].parent < 0 ? bones[b].rest_local : g[bones[b].parent] * bones[b].rest_local;
  }
  return g;
}

struct DigitSpec {
  const char* name;
  Vec3 base;              // MCP position in the palm frame
  double splay;           // rest in-plane rotation of the digit
  std::array<double, 3> lengths;
  double radius;
  // Sampling ranges for the plausible-grasp generator.
  double flex_lo, flex_hi;
  double abduct_sign;
};

const std::array<DigitSpec, 5>& digit_specs() {
  static const std::array<DigitSpec, 5> specs{{
      {"thumb", Vec3(-0.040, 0.030, -0.004), 0.85, {0.040, 0.032, 0.027}, 0.0105, -0.2, 0.9, -1.0},
      {"index", Vec3(-0.030, 0.090, 0.0), 0.06, {0.044, 0.026, 0.021}, 0.0090, -0.1, 1.3, 1.0},
      {"middle", Vec3(-0.010, 0.090, 0.0), 0.0, {0.049, 0.030, 0.022}, 0.0092, -0.1, 1.3, 0.3},
      {"ring", Vec3(0.010, 0.090, 0.0), -0.04, {0.046, 0.028, 0.021}, 0.0088, -0.1, 1.3, -0.3},
      {"pinky", Vec3(0.030, 0.085, 0.0), -0.10, {0.036, 0.021, 0.018}, 0.0078, -0.1, 1.3, -1.0},
  }};
  return specs;
}

// Appends palm + five digits below `palm_bone`. Returns the joint sites.
std::vector<JointSite> add_hand(std::vector<Bone>& bones, int palm_bone) {
  std::vector<JointSite> sites;
  for (const auto& d : digit_specs()) {
    const std::string n = d.name;
    Eigen::Isometry3d base = translation(d.base.x(), d.base.y(), d.base.z());
    base.rotate(Eigen::AngleAxisd(d.splay, Vec3::UnitZ()));
    const int b1 = static_cast<int>(bones.size());
    bones.push_back({n + "_1", palm_bone, base, {kFlexAxis, kAbductAxis}});
    bones.push_back({n + "_2", b1, translation(0.0, d.lengths[0], 0.0), {kFlexAxis}});
    bones.push_back({n + "_3", b1 + 1, translation(0.0, d.lengths[1], 0.0), {kFlexAxis}});
    sites.push_back({n + "_pip", b1, Vec3(0.0, d.lengths[0], 0.0)});
    sites.push_back({n + "_dip", b1 + 1, Vec3(0.0, d.lengths[1], 0.0)});
    sites.push_back({n + "_tip", b1 + 2, Vec3(0.0, d.lengths[2], 0.0)});
  }
  return sites;
}

void add_hand_mesh(MeshBuilder& mesh, const std::vector<Bone>& bones, int palm_bone) {
  const auto globals = rest_globals_of(bones);
  add_box(mesh, globals[palm_bone], palm_bone, Vec3(-0.042, 0.0, -0.012),
          Vec3(0.042, 0.092, 0.012), {4, 4, 1});
  int b = palm_bone + 1;
  for (const auto& d : digit_specs()) {
    ChainSpec chain{palm_bone,
                    {b, b + 1, b + 2},
                    {d.lengths[0], d.lengths[1], d.lengths[2]},
                    d.radius,
                    0.8 * d.radius,
                    8,
                    4,
                    0.012};
    add_chain_tube(mesh, globals, chain);
    b += 3;
  }
}

// Plausible grasp poses: a shared grasp level, per-digit curl jitter, and a
// shared spread for abduction.
MatX sample_grasp_angles(int samples, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  MatX out(samples, 20);
  for (int s = 0; s < samples; ++s) {
    const double grasp = unit(rng);
    const double spread = 2.0 * unit(rng) - 1.0;
    int col = 0;
    for (const auto& d : digit_specs()) {
      const double curl = std::clamp(grasp + 0.22 * noise(rng), 0.0, 1.0);
      const double span = d.flex_hi - d.flex_lo;
      out(s, col++) = d.flex_lo + curl * span + 0.06 * noise(rng);            // mcp flex
      out(s, col++) = d.abduct_sign * 0.22 * spread + 0.05 * noise(rng);       // mcp abduct
      out(s, col++) = curl * 1.1 * span + 0.06 * noise(rng);                   // pip flex
      out(s, col++) = curl * 0.8 * span + 0.06 * noise(rng);                   // dip flex
    }
  }
  return out;
}

// Top-k principal directions scaled by their standard deviation, so unit
// coefficients correspond to one standard deviation of the grasp set.
PcaSubspace grasp_pca(int k) {
  const MatX samples = sample_grasp_angles(500, 20221026u);
  const VecX mean = samples.colwise().mean();
  const MatX centered = samples.rowwise() - mean.transpose();
  const MatX cov = centered.transpose() * centered / static_cast<double>(samples.rows() - 1);
  Eigen::SelfAdjointEigenSolver<MatX> eig(cov);
  const int n = static_cast<int>(cov.rows());
  MatX basis(n, k);
  for (int c = 0; c < k; ++c) {
    const int idx = n - 1 - c;  // eigenvalues ascending
    VecX dir = eig.eigenvectors().col(idx);
    // Fix the sign so the largest component is positive (deterministic output).
    Eigen::Index arg;
    dir.cwiseAbs().maxCoeff(&arg);
    if (dir[arg] < 0.0) dir = -dir;
    basis.col(c) = dir * std::sqrt(std::max(eig.eigenvalues()[idx], 0.0));
  }
  return {basis, mean};
}

KinematicTemplate make_finger3() {
  std::vector<Bone> bones;
  bones.push_back({"proximal", -1, placement(Vec3(0.0, 0.045, 0.32), 0.7, 0.0, kPi),
                   {kFlexAxis, kAbductAxis}});
  bones.push_back({"middle", 0, translation(0.0, 0.045, 0.0), {kFlexAxis}});
  bones.push_back({"distal", 1, translation(0.0, 0.030, 0.0), {kFlexAxis}});
  MeshBuilder mesh;
  add_chain_tube(mesh, rest_globals_of(bones),
                 {-1, {0, 1, 2}, {0.045, 0.030, 0.025}, 0.010, 0.008, 8, 4, 0.0});
  std::vector<JointSite> sites{{"pip", 0, Vec3(0.0, 0.045, 0.0)},
                               {"dip", 1, Vec3(0.0, 0.030, 0.0)},
                               {"tip", 2, Vec3(0.0, 0.025, 0.0)}};
  return KinematicTemplate("finger3", mesh.vertices, mesh.faces, bones, mesh.skinning, sites,
                           std::nullopt);
}

KinematicTemplate make_hand5() {
  std::vector<Bone> bones;
  bones.push_back({"palm", -1, placement(Vec3(0.0, 0.085, 0.45), 0.65, 0.15, kPi), {}});
  auto sites = add_hand(bones, 0);
  MeshBuilder mesh;
  add_hand_mesh(mesh, bones, 0);
  return KinematicTemplate("hand5", mesh.vertices, mesh.faces, bones, mesh.skinning, sites,
                           grasp_pca(6));
}

KinematicTemplate make_armhand() {
  std::vector<Bone> bones;
  bones.push_back({"forearm", -1, placement(Vec3(0.02, 0.24, 0.78), 0.55, 0.25, kPi - 0.2),
                   {Vec3::UnitX(), Vec3::UnitY(), Vec3::UnitZ()}});
  bones.push_back({"palm", 0, translation(0.0, 0.24, 0.0), {}});
  auto hand_sites = add_hand(bones, 1);
  std::vector<JointSite> sites{{"wrist", 1, Vec3::Zero()}};
  sites.insert(sites.end(), hand_sites.begin(), hand_sites.end());

  MeshBuilder mesh;
  add_chain_tube(mesh, rest_globals_of(bones),
                 {-1, {0}, {0.24}, 0.030, 0.024, 12, 8, 0.0});
  add_hand_mesh(mesh, bones, 1);

  const PcaSubspace hand = grasp_pca(6);
  PcaSubspace pca{MatX::Zero(23, 9), VecX::Zero(23)};
  pca.basis.topLeftCorner(3, 3).setIdentity();
  pca.basis.bottomRightCorner(20, 6) = hand.basis;
  pca.mean.tail(20) = hand.mean;
  return KinematicTemplate("armhand", mesh.vertices, mesh.faces, bones, mesh.skinning, sites, pca);
}

}  // namespace

bool is_builtin_template(const std::string& name) {
  return name == "finger3" || name == "hand5" || name == "armhand";
}

KinematicTemplate make_builtin_template(const std::string& name) {
  if (name == "finger3") return make_finger3();
  if (name == "hand5") return make_hand5();
  if (name == "armhand") return make_armhand();
  throw std::invalid_argument("unknown built-in template '" + name + "'");
}

}  // namespace evmesh
