#include "support.hpp"

#include "evmesh/motion.hpp"
#include "evmesh/tracker.hpp"

#include <doctest.h>

#include <cmath>

using namespace evmesh;

namespace {

const PinholeCamera& cam() {
  static const PinholeCamera c(500, 500, 160, 120, 320, 240);
  return c;
}

LikelihoodParams finger_params() {
  const double diag = make_builtin_template("finger3").bounding_box_diagonal();
  LikelihoodParams p;
  p.alpha = std::pow(0.01 * diag, 2);
  p.beta = 0.25 * diag;
  p.gamma = 0.3;
  p.d_lat_max = 0.05 * diag;
  return p;
}

struct Sweep {
  KinematicTemplate tmpl = make_builtin_template("finger3");
  std::vector<Keyframe> keys;
  SimulationResult sim;
};

// One simulated finger sweep shared by the tests below.
const Sweep& sweep() {
  static const Sweep s = [] {
    Sweep out;
    out.keys = sweep_trajectory(VecX::Zero(4), 0, 0.5, 0.1);
    SimulatorConfig c;
    c.rng_seed = 3;
    const ImageD bg = procedural_texture(cam().width(), cam().height(), 4);
    out.sim = simulate_sequence(out.tmpl, out.keys, cam(), bg, ShadingConfig{}, c);
    return out;
  }();
  return s;
}

EventBuffer buffer_at(size_t start, size_t n) {
  const auto& ev = sweep().sim.events;
  return EventBuffer::from_events({ev.begin() + start, ev.begin() + std::min(ev.size(), start + n)});
}

MotionPriorState no_prior(int dim) { return {VecX::Zero(dim), VecX::Zero(dim), 1.0, 0.0}; }

// Reference objective from the public per-pair functions, written as a
// plain double loop.
double naive_objective(const EventBuffer& b, const AssociationMatrix& q, const VecX& theta,
                       const KinematicTemplate& tmpl, const LikelihoodParams& p,
                       const MotionPriorState& prior, VariantM vm) {
  const PosedMesh m = pose_mesh(tmpl, theta);
  double s = 0.0;
  for (size_t i = 0; i < b.events.size(); ++i) {
    if (!q.inlier_mask[i]) continue;
    const Ray r = line_of_sight(cam(), Vec2(b.events[i].x, b.events[i].y));
    for (size_t j = 0; j < m.faces.size(); ++j) {
      if (q.q(i, j) == 0.0 || m.degenerate[j]) continue;
      s += q.q(i, j) * m_likelihood_log(face_event_geometry(r, m.faces[j]), p, vm);
    }
  }
  const VecX v = (theta - prior.theta_prev) / prior.dt - prior.v_prev;
  return s - prior.k * v.squaredNorm();
}

// Rows of the brute-force association for one event against a face set.
std::vector<double> brute_row(const Ray& r, const std::vector<TriFace>& faces,
                              const LikelihoodParams& p, VariantE v, bool& inlier) {
  std::vector<double> w(faces.size(), 0.0);
  double min_dlat = std::numeric_limits<double>::infinity();
  double total = 0.0;
  for (size_t j = 0; j < faces.size(); ++j) {
    const auto g = face_event_geometry(r, faces[j]);
    if (g.d_long <= 0.0) continue;
    min_dlat = std::min(min_dlat, g.d_lat);
    w[j] = e_likelihood(g, p, v);
    total += w[j];
  }
  inlier = min_dlat <= p.d_lat_max;
  for (auto& x : w) x = inlier ? x / total : 0.0;
  return w;
}

PosedMesh face_soup(const std::vector<TriFace>& faces) {
  PosedMesh m;
  m.faces = faces;
  m.degenerate.assign(faces.size(), false);
  return m;
}

}  // namespace

TEST_CASE("variant names round trip") {
  for (auto v : {VariantE::E3, VariantE::E2Normal, VariantE::E2Longitudinal}) CHECK(parse_variant_e(to_string(v)) == v);
  for (auto v : {VariantM::M2, VariantM::M1Lateral}) CHECK(parse_variant_m(to_string(v)) == v);
  for (auto v : {Association::Soft, Association::Hard}) CHECK(parse_association(to_string(v)) == v);
  for (auto v : {GradMode::Analytic, GradMode::FiniteDifference}) CHECK(parse_grad_mode(to_string(v)) == v);
  CHECK_THROWS_AS(parse_variant_e("E4"), std::invalid_argument);
}

TEST_CASE("parameter validation") {
  LikelihoodParams p;
  CHECK_NOTHROW(p.validate());
  p.gamma = 0.0;
  CHECK_THROWS_AS(p.validate(), std::invalid_argument);
  EmConfig c;
  CHECK_NOTHROW(c.validate());
  c.step_size = -1;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = EmConfig{};
  c.early_stop_tol = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("E-step likelihood") {
  const LikelihoodParams p{1e-4, 0.5, 0.3, 0.01};
  FaceEventGeometry g{0.0, -1, 0.7, 0.2};
  CHECK(e_likelihood(g, p, VariantE::E3) == doctest::Approx(0.5 * std::exp(-0.7 / 0.5) * std::exp(-0.2 / 0.3)));

  g = {1.0, 1, 0.0, 0.0};
  CHECK(e_likelihood(g, p, VariantE::E3) == doctest::Approx(1.0));
  g.sign = -1;
  CHECK(e_likelihood(g, p, VariantE::E3) == 0.0);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 200; ++i) {
    const FaceEventGeometry h{0.02 * u(rng), u(rng) < 0.5 ? -1 : 1, 2.0 * u(rng), u(rng)};
    const double e3 = e_likelihood(h, p, VariantE::E3);
    CHECK(e3 > 0.0);
    CHECK(e3 <= 1.0);
    CHECK(e3 == doctest::Approx(e_likelihood(h, p, VariantE::E2Normal) * std::exp(-h.d_long / p.beta)).epsilon(1e-12));
    CHECK(e3 == doctest::Approx(e_likelihood(h, p, VariantE::E2Longitudinal) * std::exp(-h.r_ang / p.gamma)).epsilon(1e-12));
  }
}

TEST_CASE("M-step log-likelihood") {
  const LikelihoodParams p{1e-4, 0.5, 0.3, 0.01};
  CHECK(m_likelihood_log({0.0, 1, 1.0, 0.0}, p, VariantM::M2) == doctest::Approx(-0.6931471805599453).epsilon(1e-15));

  // sqrt(30 alpha) puts the sigmoid argument at -30.
  const FaceEventGeometry far{std::sqrt(30.0 * p.alpha), -1, 1.0, 0.0};
  const long double exact = -(30.0L + std::log1p(std::exp(-30.0L)));
  CHECK(m_likelihood_log(far, p, VariantM::M1Lateral) == doctest::Approx(static_cast<double>(exact)).epsilon(1e-14));
  const FaceEventGeometry very_far{1.0, -1, 1.0, 0.0};
  CHECK(std::isfinite(m_likelihood_log(very_far, p, VariantM::M1Lateral)));
  CHECK(m_likelihood_log(very_far, p, VariantM::M1Lateral) == doctest::Approx(-1e4));

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0, 1);
  for (int i = 0; i < 100; ++i) {
    const FaceEventGeometry h{0.02 * u(rng), u(rng) < 0.5 ? -1 : 1, u(rng), u(rng)};
    CHECK(m_likelihood_log(h, p, VariantM::M2) ==
          doctest::Approx(m_likelihood_log(h, p, VariantM::M1Lateral) - h.r_ang / p.gamma).epsilon(1e-14));
  }
}

TEST_CASE("E-step on constructed scenes") {
  const PinholeCamera c = evtest::small_camera();
  const LikelihoodParams p{1e-4, 0.5, 0.3, 0.05};
  const EventBuffer centre = EventBuffer::from_events({{0.0, 80, 60, 1}});

  SUBCASE("single face") {
    const auto q = e_step(centre, face_soup({TriFace::from_vertices({0.01, -0.05, 1}, {0.1, -0.05, 1}, {0.05, 0.05, 1})}),
                          c, p, VariantE::E3);
    REQUIRE(q.inlier_mask[0]);
    CHECK(q.q(0, 0) == 1.0);
  }
  SUBCASE("mirror-symmetric faces split evenly") {
    const TriFace a = TriFace::from_vertices({0.01, -0.05, 1}, {0.1, -0.05, 1.02}, {0.05, 0.05, 0.98});
    const TriFace b = TriFace::from_vertices({-0.01, -0.05, 1}, {-0.1, -0.05, 1.02}, {-0.05, 0.05, 0.98});
    for (bool cull : {false, true}) {
      const auto q = e_step(centre, face_soup({a, b}), c, p, VariantE::E3, cull);
      CHECK(q.q(0, 0) == doctest::Approx(0.5).epsilon(1e-9));
      CHECK(q.q(0, 1) == doctest::Approx(0.5).epsilon(1e-9));
    }
  }
  SUBCASE("all events far from the mesh are outliers") {
    const auto soup = face_soup({TriFace::from_vertices({0.3, 0.2, 1}, {0.35, 0.2, 1}, {0.3, 0.25, 1})});
    const auto q = e_step(centre, soup, c, p, VariantE::E3);
    CHECK(q.inlier_count() == 0);
    CHECK(q.q.isZero());
  }
  SUBCASE("faces behind the camera take no weight") {
    const TriFace front = TriFace::from_vertices({0.01, -0.05, 1}, {0.1, -0.05, 1}, {0.05, 0.05, 1});
    const TriFace behind = TriFace::from_vertices({-0.05, -0.05, -1}, {0.05, -0.05, -1}, {0, 0.05, -1});
    const auto q = e_step(centre, face_soup({front, behind}), c, p, VariantE::E3);
    CHECK(q.q(0, 0) == 1.0);
    CHECK(q.q(0, 1) == 0.0);
  }
}

TEST_CASE("E-step equals brute-force normalization on random scenes") {
  const PinholeCamera c = evtest::small_camera();
  const LikelihoodParams p{4e-4, 0.5, 0.3, 0.05};
  std::mt19937_64 g(21);
  std::uniform_int_distribution<int> px(0, 159), py(0, 119);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<TriFace> faces;
    for (int j = 0; j < 8; ++j) faces.push_back(evtest::random_face(g, evtest::random_vec(g, -0.2, 0.2) + Vec3(0, 0, 1), 0.08));
    std::vector<Event> ev;
    for (int i = 0; i < 16; ++i) ev.push_back({0.0, static_cast<std::uint16_t>(px(g)), static_cast<std::uint16_t>(py(g)), 1});
    const auto buf = EventBuffer::from_events(ev);
    for (auto v : {VariantE::E3, VariantE::E2Normal, VariantE::E2Longitudinal}) {
      for (bool cull : {false, true}) {
        const auto q = e_step(buf, face_soup(faces), c, p, v, cull);
        for (int i = 0; i < 16; ++i) {
          bool inlier = false;
          const auto row = brute_row(line_of_sight(c, Vec2(ev[i].x, ev[i].y)), faces, p, v, inlier);
          CHECK(q.inlier_mask[i] == inlier);
          for (int j = 0; j < 8; ++j) CHECK(std::abs(q.q(i, j) - row[j]) <= 1e-9);
          if (inlier) CHECK(std::abs(q.q.row(i).sum() - 1.0) <= 1e-9);
        }
      }
    }
  }
}

TEST_CASE("shrinking the outlier threshold never adds inliers") {
  const auto& s = sweep();
  const auto buf = buffer_at(0, 300);
  const PosedMesh m = pose_mesh(s.tmpl, VecX::Zero(4));
  auto p = finger_params();
  auto prev = e_step(buf, m, cam(), p, VariantE::E3, true).inlier_mask;
  for (double scale : {0.5, 0.25, 0.1, 0.01}) {
    p.d_lat_max = finger_params().d_lat_max * scale;
    const auto cur = e_step(buf, m, cam(), p, VariantE::E3, true).inlier_mask;
    for (size_t i = 0; i < cur.size(); ++i) CHECK((!cur[i] || prev[i]));
    prev = cur;
  }
}

TEST_CASE("M-step objective") {
  const auto& s = sweep();
  const auto buf = buffer_at(300, 300);
  const auto p = finger_params();
  const VecX theta = s.sim.ground_truth[s.sim.ground_truth.size() / 3].theta;
  const auto q = e_step(buf, pose_mesh(s.tmpl, theta), cam(), p, VariantE::E3);
  const MotionPriorState prior{theta * 0.9, VecX::Constant(4, 0.3), 0.004, 1e-4};

  SUBCASE("matches the naive double loop") {
    for (auto vm : {VariantM::M2, VariantM::M1Lateral}) {
      for (int k = 0; k < 5; ++k) {
        const VecX th = theta + 0.05 * VecX::Random(4);
        const double ours = m_step_objective(buf, q, th, s.tmpl, cam(), p, prior, vm, Association::Soft);
        const double ref = naive_objective(buf, q, th, s.tmpl, p, prior, vm);
        CHECK(ours == doctest::Approx(ref).epsilon(1e-12));
      }
    }
  }
  SUBCASE("no inliers leaves only the prior") {
    AssociationMatrix none{MatX::Zero(q.q.rows(), q.q.cols()), std::vector<bool>(q.q.rows(), false)};
    const VecX th = theta + VecX::Constant(4, 0.01);
    const double expect = -prior.k * ((th - prior.theta_prev) / prior.dt - prior.v_prev).squaredNorm();
    CHECK(m_step_objective(buf, none, th, s.tmpl, cam(), p, prior, VariantM::M2, Association::Soft) ==
          doctest::Approx(expect).epsilon(1e-14));
  }
  SUBCASE("one-hot rows make soft and hard identical") {
    AssociationMatrix hot{MatX::Zero(q.q.rows(), q.q.cols()), q.inlier_mask};
    for (Eigen::Index i = 0; i < q.q.rows(); ++i) {
      Eigen::Index j;
      q.q.row(i).maxCoeff(&j);
      if (q.inlier_mask[i]) hot.q(i, j) = 1.0;
    }
    const double soft = m_step_objective(buf, hot, theta, s.tmpl, cam(), p, prior, VariantM::M2, Association::Soft);
    const double hard = m_step_objective(buf, hot, theta, s.tmpl, cam(), p, prior, VariantM::M2, Association::Hard);
    CHECK(soft == hard);
    // Hard association on the original soft q uses those same argmax faces.
    CHECK(m_step_objective(buf, q, theta, s.tmpl, cam(), p, prior, VariantM::M2, Association::Hard) == hard);
  }
  SUBCASE("confident rows keep soft and hard close") {
    const double soft = m_step_objective(buf, q, theta, s.tmpl, cam(), p, no_prior(4), VariantM::M2, Association::Soft);
    const double hard = m_step_objective(buf, q, theta, s.tmpl, cam(), p, no_prior(4), VariantM::M2, Association::Hard);
    double spread = 0.0;
    const PosedMesh m = pose_mesh(s.tmpl, theta);
    for (Eigen::Index i = 0; i < q.q.rows(); ++i) {
      if (!q.inlier_mask[i]) continue;
      const Ray r = line_of_sight(cam(), Vec2(buf.events[i].x, buf.events[i].y));
      double lo = 0.0, hi = -1e300;
      for (Eigen::Index j = 0; j < q.q.cols(); ++j) {
        if (q.q(i, j) <= 0.0) continue;
        const double l = m_likelihood_log(face_event_geometry(r, m.faces[j]), p, VariantM::M2);
        lo = std::min(lo, l);
        hi = std::max(hi, l);
      }
      if (q.q.row(i).maxCoeff() < 0.99) spread += hi - lo;
      else spread += (1.0 - q.q.row(i).maxCoeff()) * (hi - lo);
    }
    CHECK(std::abs(soft - hard) <= 0.01 * std::abs(soft) + spread);
  }
  SUBCASE("orientation gaps shrink as gamma grows") {
    const VecX other = theta + VecX::Constant(4, 0.05);
    double last = std::numeric_limits<double>::infinity();
    for (double gamma : {0.1, 0.3, 1.0, 3.0}) {
      auto pg = p;
      pg.gamma = gamma;
      const double a = m_step_objective(buf, q, theta, s.tmpl, cam(), pg, no_prior(4), VariantM::M2, Association::Soft) -
                       m_step_objective(buf, q, theta, s.tmpl, cam(), pg, no_prior(4), VariantM::M1Lateral, Association::Soft);
      const double b = m_step_objective(buf, q, other, s.tmpl, cam(), pg, no_prior(4), VariantM::M2, Association::Soft) -
                       m_step_objective(buf, q, other, s.tmpl, cam(), pg, no_prior(4), VariantM::M1Lateral, Association::Soft);
      const double gap = std::abs(a - b);
      CHECK(gap < last);
      last = gap;
    }
  }
}

TEST_CASE("gradients") {
  const auto& s = sweep();
  const auto p = finger_params();
  std::mt19937_64 g(8);
  std::uniform_real_distribution<double> jitter(-1.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    const size_t start = 300 * static_cast<size_t>(trial % 4);
    const auto buf = buffer_at(start, 300);
    const VecX base = s.sim.ground_truth[std::min<size_t>(s.sim.ground_truth.size() - 1, 5 * trial)].theta;
    VecX theta = base;
    for (int d = 0; d < 4; ++d) theta[d] += 0.03 * jitter(g);
    const auto q = e_step(buf, pose_mesh(s.tmpl, base), cam(), p, VariantE::E3);
    const MotionPriorState prior{base, VecX::Constant(4, 0.5), 0.003, 1e-4};
    for (auto vm : {VariantM::M2, VariantM::M1Lateral}) {
      const VecX fd = m_step_gradient(buf, q, theta, s.tmpl, cam(), p, prior, vm, Association::Soft,
                                      GradMode::FiniteDifference, 1e-7);
      const VecX an = m_step_gradient(buf, q, theta, s.tmpl, cam(), p, prior, vm, Association::Soft,
                                      GradMode::Analytic);
      // Independent oracle: forward differences of the naive objective.
      VecX fwd(4);
      const double h = 1e-7;
      const double f0 = naive_objective(buf, q, theta, s.tmpl, p, prior, vm);
      for (int d = 0; d < 4; ++d) {
        VecX t = theta;
        t[d] += h;
        fwd[d] = (naive_objective(buf, q, t, s.tmpl, p, prior, vm) - f0) / h;
      }
      CHECK((fd - fwd).norm() <= 1e-3 * fwd.norm());
      // The lateral term bends on a micrometre scale, so coarser steps
      // carry truncation error well above this tolerance.
      CHECK((an - fd).norm() <= 1e-5 * fd.norm());
    }
  }
}

TEST_CASE("predict_init") {
  const VecX th = VecX::LinSpaced(3, 0.1, 0.3);
  CHECK(predict_init(th, VecX::Zero(3), 0.7) == th);
  VecX v = VecX::Zero(3);
  v[0] = 1.0;
  CHECK(predict_init(th, v, 0.5)[0] == doctest::Approx(0.6));
  const VecX th2 = VecX::LinSpaced(3, -1.0, 2.0);
  CHECK((predict_init(th, (th2 - th) / 0.25, 0.25) - th2).norm() < 1e-15);
  CHECK_THROWS_AS(predict_init(th, v, 0.0), std::domain_error);
}

TEST_CASE("optimize_buffer") {
  const auto& s = sweep();
  const auto p = finger_params();
  EmConfig cfg;

  SUBCASE("all-outlier buffer coasts to the prior optimum") {
    const auto buf = EventBuffer::from_events({{0.0, 0, 0, 1}, {0.001, 319, 239, -1}});
    VecX tp(4), vp(4);
    tp << 0.1, -0.2, 0.3, 0.0;
    vp << 1.0, 2.0, -0.5, 0.25;
    const MotionPriorState prior{tp, vp, 0.01, 1e-4};
    const auto r = optimize_buffer(buf, tp + VecX::Constant(4, 0.05), prior, s.tmpl, cam(), p, cfg);
    CHECK(r.diagnostics.coasted);
    CHECK((r.theta - (tp + vp * 0.01)).norm() <= 1e-6);
  }
  SUBCASE("ground-truth init stays close and does not lose objective") {
    // The two distal flexions trade off almost invisibly in this view, so the
    // check is in joint space rather than on theta itself.
    const auto buf = buffer_at(600, 300);
    size_t k = 0;
    while (k + 1 < s.sim.ground_truth.size() && s.sim.ground_truth[k].t < buf.t_mid()) ++k;
    const VecX gt = s.sim.ground_truth[k].theta;
    const MotionPriorState prior{gt, VecX::Zero(4), 0.01, 0.0};
    const auto r = optimize_buffer(buf, gt, prior, s.tmpl, cam(), p, cfg);
    const auto jg = joint_positions(s.tmpl, gt), je = joint_positions(s.tmpl, r.theta);
    double err = 0.0;
    for (size_t j = 0; j < jg.size(); ++j) err += (jg[j] - je[j]).norm() / jg.size();
    CHECK(err < 0.003);
    const auto q = e_step(buf, pose_mesh(s.tmpl, r.theta), cam(), p, VariantE::E3, true);
    CHECK(m_step_objective(buf, q, r.theta, s.tmpl, cam(), p, prior, VariantM::M2, Association::Soft) >=
          m_step_objective(buf, q, gt, s.tmpl, cam(), p, prior, VariantM::M2, Association::Soft));
  }
  SUBCASE("perturbed init improves the objective") {
    const auto buf = buffer_at(900, 300);
    size_t k = 0;
    while (k + 1 < s.sim.ground_truth.size() && s.sim.ground_truth[k].t < buf.t_mid()) ++k;
    VecX init = s.sim.ground_truth[k].theta;
    init[1] += 0.05;
    const auto prior = no_prior(4);
    const auto r = optimize_buffer(buf, init, prior, s.tmpl, cam(), p, cfg);
    const auto q0 = e_step(buf, pose_mesh(s.tmpl, init), cam(), p, VariantE::E3);
    const double before = m_step_objective(buf, q0, init, s.tmpl, cam(), p, prior, VariantM::M2, Association::Soft);
    const double after = m_step_objective(buf, q0, r.theta, s.tmpl, cam(), p, prior, VariantM::M2, Association::Soft);
    CHECK(after >= before);
    CHECK(r.diagnostics.em_iters >= 1);
  }
}

TEST_CASE("track_stream") {
  const auto& s = sweep();
  TrackerConfig cfg;
  cfg.likelihood = finger_params();

  SUBCASE("short stream gives one pose") {
    const auto buf = buffer_at(0, 120);
    const auto traj = track_stream(buf.events, VecX::Zero(4), 0.0, s.tmpl, cam(), cfg);
    CHECK(traj.size() == 1);
  }
  SUBCASE("buffer arithmetic") {
    const auto buf = buffer_at(0, 1000);
    const auto traj = track_stream(buf.events, VecX::Zero(4), 0.0, s.tmpl, cam(), cfg);
    CHECK(traj.size() == 4);
    for (size_t i = 1; i < traj.size(); ++i) CHECK(traj[i].t > traj[i - 1].t);
  }
  SUBCASE("the whole sweep is followed") {
    // A buffer spans a few milliseconds here, so single-buffer velocities are
    // noise; the net advance over the sweep is not.
    const auto traj = track_stream(s.sim.events, VecX::Zero(4), 0.0, s.tmpl, cam(), cfg);
    REQUIRE(traj.size() > 10);
    const double advance = traj.back().theta[0] - traj.front().theta[0];
    const double truth = s.keys.back().theta[0] - s.keys.front().theta[0];
    CHECK(advance > 0.7 * truth);
    CHECK(advance < 1.3 * truth);
    const auto jg = joint_positions(s.tmpl, s.keys.back().theta);
    const auto je = joint_positions(s.tmpl, traj.back().theta);
    for (size_t j = 0; j < jg.size(); ++j) CHECK((jg[j] - je[j]).norm() < 0.015);
  }
  SUBCASE("noise-only stream: most events are rejected") {
    SimulatorConfig c;
    c.sp_rate = 2e-3;
    c.rng_seed = 5;
    const std::vector<Keyframe> still = {{0.0, VecX::Zero(4)}, {0.1, VecX::Zero(4)}};
    const auto noise = simulate_sequence(s.tmpl, still, cam(), procedural_texture(320, 240, 1), ShadingConfig{}, c);
    REQUIRE(noise.events.size() >= 300);
    const auto traj = track_stream(noise.events, VecX::Zero(4), 0.0, s.tmpl, cam(), cfg);
    for (const auto& smp : traj) CHECK(smp.diagnostics.inliers <= 60);
    // Nothing anchors the pose across buffers once it starts to move, so
    // only the first buffer is bounded.
    const auto j0 = joint_positions(s.tmpl, VecX::Zero(4)), j1 = joint_positions(s.tmpl, traj.front().theta);
    for (size_t j = 0; j < j0.size(); ++j) CHECK((j0[j] - j1[j]).norm() < 0.01);
  }
  SUBCASE("deterministic") {
    const auto buf = buffer_at(0, 600);
    const auto a = track_stream(buf.events, VecX::Zero(4), 0.0, s.tmpl, cam(), cfg);
    const auto b = track_stream(buf.events, VecX::Zero(4), 0.0, s.tmpl, cam(), cfg);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) CHECK(a[i].theta == b[i].theta);
  }
}
