#include "support.hpp"

#include <doctest.h>

#include <filesystem>
#include <numbers>

using namespace evmesh;

namespace {

double surface_area(const PosedMesh& m) {
  double a = 0.0;
  for (const auto& f : m.faces) a += 0.5 * (f.v1 - f.v0).cross(f.v2 - f.v0).norm();
  return a;
}

Eigen::Matrix4d homogeneous(const Eigen::Matrix3d& r, const Vec3& t) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = r;
  m.topRightCorner<3, 1>() = t;
  return m;
}

}  // namespace

TEST_CASE("zero pose reproduces the rest mesh") {
  const auto t = evtest::two_bone_chain();
  const auto m = pose_mesh(t, VecX::Zero(2));
  REQUIRE(m.vertices.size() == t.rest_vertices().size());
  for (size_t v = 0; v < m.vertices.size(); ++v) {
    CHECK((m.vertices[v] - t.rest_vertices()[v]).norm() < 1e-15);
  }
  const auto j = joint_positions(t, VecX::Zero(2));
  CHECK((j[0] - Vec3(0, 0, 0)).norm() < 1e-15);
  CHECK((j[1] - Vec3(1, 0, 0)).norm() < 1e-15);
  CHECK((j[2] - Vec3(2, 0, 0)).norm() < 1e-15);
}

TEST_CASE("child rotation matches hand-composed transforms") {
  const auto t = evtest::two_bone_chain(Vec3::UnitX());
  VecX theta(2);
  theta << 0.3, std::numbers::pi / 2;
  const auto m = pose_mesh(t, theta);

  // Written out by hand rather than through Eigen's geometry module.
  const double c = std::cos(0.3), s = std::sin(0.3);
  Eigen::Matrix3d rz;
  rz << c, -s, 0, s, c, 0, 0, 0, 1;
  Eigen::Matrix3d rx;
  rx << 1, 0, 0, 0, 0, -1, 0, 1, 0;
  const Eigen::Matrix4d root = homogeneous(rz, Vec3::Zero());
  const Eigen::Matrix4d child = root * homogeneous(Eigen::Matrix3d::Identity(), Vec3(1, 0, 0)) *
                                homogeneous(rx, Vec3::Zero());
  const Eigen::Matrix4d child_rest_inv = homogeneous(Eigen::Matrix3d::Identity(), Vec3(-1, 0, 0));

  for (size_t v = 0; v < m.vertices.size(); ++v) {
    const Vec3& r = t.rest_vertices()[v];
    const Eigen::Vector4d h(r.x(), r.y(), r.z(), 1.0);
    const Eigen::Vector4d expect = v < 8 ? Eigen::Vector4d(root * h) : Eigen::Vector4d(child * child_rest_inv * h);
    CHECK((m.vertices[v] - expect.head<3>()).norm() < 1e-12);
  }
  const Eigen::Vector4d tip = child * Eigen::Vector4d(1, 0, 0, 1);
  CHECK((m.joints[2] - tip.head<3>()).norm() < 1e-12);
}

TEST_CASE("identity PCA basis matches raw angles") {
  const auto raw = evtest::two_bone_chain();
  const auto pca = evtest::two_bone_chain(Vec3::UnitX(), true);
  std::mt19937_64 g(1);
  for (int i = 0; i < 20; ++i) {
    const VecX th = VecX::Random(2) * 2.0;
    const auto a = pose_mesh(raw, th);
    const auto b = pose_mesh(pca, th);
    for (size_t v = 0; v < a.vertices.size(); ++v) CHECK((a.vertices[v] - b.vertices[v]).norm() == 0.0);
  }
}

TEST_CASE("joint_positions agrees with pose_mesh") {
  for (const char* name : {"finger3", "hand5", "armhand"}) {
    const auto t = make_builtin_template(name);
    for (int i = 0; i < 5; ++i) {
      const VecX th = VecX::Random(t.param_dim());
      const auto m = pose_mesh(t, th);
      const auto j = joint_positions(t, th);
      REQUIRE(j.size() == m.joints.size());
      for (size_t k = 0; k < j.size(); ++k) CHECK((j[k] - m.joints[k]).norm() < 1e-14);
    }
  }
}

TEST_CASE("bad pose vectors are rejected") {
  const auto t = evtest::two_bone_chain();
  CHECK_THROWS_AS(pose_mesh(t, VecX::Zero(3)), std::domain_error);
  VecX bad = VecX::Zero(2);
  bad[1] = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(pose_mesh(t, bad), std::domain_error);
  CHECK_THROWS_AS(joint_positions(t, VecX::Zero(1)), std::domain_error);
}

TEST_CASE("template validation") {
  const auto t = evtest::two_bone_chain();
  auto skin = t.skinning();
  skin[0] = {{0, 0.7}, {1, 0.2}};
  CHECK_THROWS_AS(KinematicTemplate("x", t.rest_vertices(), t.faces(), t.bones(), skin, t.joint_sites(), {}),
                  std::domain_error);
  auto bones = t.bones();
  bones[1].parent = 1;
  CHECK_THROWS_AS(KinematicTemplate("x", t.rest_vertices(), t.faces(), bones, t.skinning(), t.joint_sites(), {}),
                  std::domain_error);
  auto faces = t.faces();
  faces[0] = {0, 0, 1};
  CHECK_THROWS_AS(KinematicTemplate("x", t.rest_vertices(), faces, t.bones(), t.skinning(), t.joint_sites(), {}),
                  std::domain_error);
  faces[0] = {0, 1, 99};
  CHECK_THROWS_AS(KinematicTemplate("x", t.rest_vertices(), faces, t.bones(), t.skinning(), t.joint_sites(), {}),
                  std::domain_error);
}

TEST_CASE("built-in templates have the advertised structure") {
  const auto f3 = make_builtin_template("finger3");
  CHECK(f3.bones().size() >= 3);
  CHECK(f3.faces().size() >= 150);
  CHECK(f3.faces().size() <= 300);

  const auto h5 = make_builtin_template("hand5");
  CHECK(h5.faces().size() >= 1000);
  REQUIRE(h5.pca().has_value());
  CHECK(h5.param_dim() == 6);

  const auto ah = make_builtin_template("armhand");
  CHECK(ah.param_dim() == h5.param_dim() + 3);
  CHECK_THROWS(make_builtin_template("octopus"));

  for (const auto* t : {&f3, &h5, &ah}) {
    for (const auto& w : t->skinning()) {
      double s = 0.0;
      for (const auto& inf : w) {
        CHECK(inf.weight >= 0.0);
        s += inf.weight;
      }
      CHECK(std::abs(s - 1.0) <= 1e-9);
    }
  }
}

TEST_CASE("posing is Lipschitz in theta") {
  const auto t = make_builtin_template("hand5");
  std::mt19937_64 g(6);
  std::normal_distribution<double> n(0, 1);
  double worst = 0.0;
  for (int i = 0; i < 10; ++i) {
    VecX th(t.param_dim());
    for (int d = 0; d < th.size(); ++d) th[d] = n(g);
    const auto a = pose_mesh(t, th);
    for (double h : {1e-2, 1e-3, 1e-4}) {
      VecX dir(th.size());
      for (int d = 0; d < th.size(); ++d) dir[d] = n(g);
      dir *= h / dir.norm();
      const auto b = pose_mesh(t, th + dir);
      double m = 0.0;
      for (size_t v = 0; v < a.vertices.size(); ++v) m = std::max(m, (a.vertices[v] - b.vertices[v]).norm());
      worst = std::max(worst, m / h);
    }
  }
  CHECK(worst < 1.0);  // meters per unit theta, generous for a 27 cm hand
  CHECK(worst > 0.0);
}

TEST_CASE("single-bone skinning is rigid") {
  const auto t = evtest::two_bone_chain();
  VecX th(2);
  th << -0.8, 1.1;
  const auto m = pose_mesh(t, th);
  // Pairwise distances within each box survive posing.
  for (int b = 0; b < 2; ++b) {
    for (int i = 8 * b; i < 8 * b + 8; ++i) {
      for (int j = i + 1; j < 8 * b + 8; ++j) {
        const double rest = (t.rest_vertices()[i] - t.rest_vertices()[j]).norm();
        CHECK((m.vertices[i] - m.vertices[j]).norm() == doctest::Approx(rest).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("root rotation preserves surface area") {
  const auto t = evtest::two_bone_chain();
  const double rest = surface_area(pose_mesh(t, VecX::Zero(2)));
  for (double a : {0.3, 1.7, -2.5}) {
    VecX th(2);
    th << a, 0.0;
    CHECK(surface_area(pose_mesh(t, th)) == doctest::Approx(rest).epsilon(1e-12));
  }
}

TEST_CASE("vertex Jacobian matches central differences") {
  for (const char* name : {"finger3", "hand5", "armhand"}) {
    const auto t = make_builtin_template(name);
    const VecX th = VecX::Random(t.param_dim()) * 0.5;
    const auto m = pose_mesh(t, th);
    const MatX jac = vertex_jacobian(t, th, m);
    const double h = 1e-6;
    for (int d = 0; d < t.param_dim(); ++d) {
      VecX p = th, q = th;
      p[d] += h;
      q[d] -= h;
      const auto mp = pose_mesh(t, p), mq = pose_mesh(t, q);
      double err = 0.0, scale = 0.0;
      for (size_t v = 0; v < m.vertices.size(); ++v) {
        const Vec3 fd = (mp.vertices[v] - mq.vertices[v]) / (2 * h);
        err = std::max(err, (fd - jac.block<3, 1>(3 * v, d)).norm());
        scale = std::max(scale, fd.norm());
      }
      CHECK(err <= 1e-6 * std::max(scale, 1e-3));
    }
  }
}

TEST_CASE("template JSON round trip") {
  const auto t = make_builtin_template("hand5");
  const auto path = std::filesystem::temp_directory_path() / "evmesh_hand5_roundtrip.json";
  save_template_json(t, path.string());
  const auto u = load_template_json(path.string());
  CHECK(u.param_dim() == t.param_dim());
  CHECK(u.faces() == t.faces());
  const VecX th = VecX::Random(t.param_dim());
  const auto a = pose_mesh(t, th), b = pose_mesh(u, th);
  for (size_t v = 0; v < a.vertices.size(); ++v) CHECK((a.vertices[v] - b.vertices[v]).norm() < 1e-12);
  std::filesystem::remove(path);
}
