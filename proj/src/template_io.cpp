#include "evmesh/model.hpp"

#include <json.hpp>

#include <fstream>
#include <stdexcept>

namespace evmesh {

using nlohmann::json;

namespace {

Vec3 vec3_from(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw std::invalid_argument(what + ": expected [x, y, z]");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

json vec3_to(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

}  // namespace

KinematicTemplate load_template_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open template file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument("template '" + path + "': " + e.what());
  }

  try {
    std::vector<Vec3> vertices;
    for (const auto& v : doc.at("vertices")) vertices.push_back(vec3_from(v, "vertices"));

    std::vector<FaceIndices> faces;
    for (const auto& f : doc.at("faces")) {
      if (f.size() != 3) throw std::invalid_argument("faces: expected index triples");
      faces.push_back({f[0].get<int>(), f[1].get<int>(), f[2].get<int>()});
    }

    std::vector<Bone> bones;
    for (const auto& b : doc.at("bones")) {
      Bone bone;
      bone.name = b.value("name", "");
      bone.parent = b.at("parent").get<int>();
      Eigen::Isometry3d rest = Eigen::Isometry3d::Identity();
      if (b.contains("rest_translation")) rest.translate(vec3_from(b["rest_translation"], "rest_translation"));
      if (b.contains("rest_rotation")) {
        const auto& q = b["rest_rotation"];
        if (q.size() != 4) throw std::invalid_argument("rest_rotation: expected quaternion [w, x, y, z]");
        rest.rotate(Eigen::Quaterniond(q[0].get<double>(), q[1].get<double>(), q[2].get<double>(),
                                       q[3].get<double>())
                        .normalized());
      }
      bone.rest_local = rest;
      for (const auto& a : b.value("dof_axes", json::array())) bone.dof_axes.push_back(vec3_from(a, "dof_axes"));
      bones.push_back(std::move(bone));
    }

    std::vector<std::vector<SkinInfluence>> skinning;
    for (const auto& row : doc.at("skinning")) {
      std::vector<SkinInfluence> s;
      for (const auto& pair : row) s.push_back({pair.at(0).get<int>(), pair.at(1).get<double>()});
      skinning.push_back(std::move(s));
    }

    std::vector<JointSite> sites;
    for (const auto& s : doc.value("joint_sites", json::array())) {
      sites.push_back({s.value("name", ""), s.at("bone").get<int>(), vec3_from(s.at("offset"), "offset")});
    }

    std::optional<PcaSubspace> pca;
    if (doc.contains("pca") && !doc["pca"].is_null()) {
      const auto& p = doc["pca"];
      const auto& rows = p.at("basis");
      const auto& mean = p.at("mean");
      const Eigen::Index n = static_cast<Eigen::Index>(rows.size());
      const Eigen::Index k = n > 0 ? static_cast<Eigen::Index>(rows[0].size()) : 0;
      PcaSubspace sub{MatX(n, k), VecX(static_cast<Eigen::Index>(mean.size()))};
      for (Eigen::Index r = 0; r < n; ++r) {
        if (static_cast<Eigen::Index>(rows[r].size()) != k) throw std::invalid_argument("pca.basis: ragged rows");
        for (Eigen::Index c = 0; c < k; ++c) sub.basis(r, c) = rows[r][c].get<double>();
      }
      for (Eigen::Index i = 0; i < sub.mean.size(); ++i) sub.mean[i] = mean[i].get<double>();
      pca = std::move(sub);
    }

    return KinematicTemplate(doc.value("name", path), std::move(vertices), std::move(faces),
                             std::move(bones), std::move(skinning), std::move(sites), std::move(pca));
  } catch (const json::exception& e) {
    throw std::invalid_argument("template '" + path + "': " + e.what());
  }
}

void save_template_json(const KinematicTemplate& tmpl, const std::string& path) {
  json doc;
  doc["name"] = tmpl.name();
  doc["vertices"] = json::array();
  for (const auto& v : tmpl.rest_vertices()) doc["vertices"].push_back(vec3_to(v));
  doc["faces"] = json::array();
  for (const auto& f : tmpl.faces()) doc["faces"].push_back({f[0], f[1], f[2]});
  doc["bones"] = json::array();
  for (const auto& b : tmpl.bones()) {
    const Eigen::Quaterniond q(b.rest_local.linear());
    json axes = json::array();
    for (const auto& a : b.dof_axes) axes.push_back(vec3_to(a));
    doc["bones"].push_back({{"name", b.name},
                            {"parent", b.parent},
                            {"rest_translation", vec3_to(b.rest_local.translation())},
                            {"rest_rotation", {q.w(), q.x(), q.y(), q.z()}},
                            {"dof_axes", axes}});
  }
  doc["skinning"] = json::array();
  for (const auto& row : tmpl.skinning()) {
    json r = json::array();
    for (const auto& inf : row) r.push_back({inf.bone, inf.weight});
    doc["skinning"].push_back(r);
  }
  doc["joint_sites"] = json::array();
  for (const auto& s : tmpl.joint_sites()) {
    doc["joint_sites"].push_back({{"name", s.name}, {"bone", s.bone}, {"offset", vec3_to(s.offset)}});
  }
  if (tmpl.pca()) {
    json rows = json::array();
    for (Eigen::Index r = 0; r < tmpl.pca()->basis.rows(); ++r) {
      json row = json::array();
      for (Eigen::Index c = 0; c < tmpl.pca()->basis.cols(); ++c) row.push_back(tmpl.pca()->basis(r, c));
      rows.push_back(row);
    }
    json mean = json::array();
    for (Eigen::Index i = 0; i < tmpl.pca()->mean.size(); ++i) mean.push_back(tmpl.pca()->mean[i]);
    doc["pca"] = {{"basis", rows}, {"mean", mean}};
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write template file '" + path + "'");
  out << doc.dump() << '\n';
}

}  // namespace evmesh
