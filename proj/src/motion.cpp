#include "evmesh/motion.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

namespace evmesh {

std::vector<Keyframe> sweep_trajectory(const VecX& base, int index, double delta, double duration) {
  if (index < 0 || index >= base.size()) throw std::invalid_argument("sweep: index out of range");
  if (!(duration > 0.0)) throw std::invalid_argument("sweep: duration must be > 0");
  VecX end = base;
  end[index] += delta;
  return {{0.0, base}, {duration, end}};
}

std::vector<Keyframe> random_trajectory(const VecX& start, const VecX& range,
                                        const RandomMotionSpec& spec) {
  if (start.size() != range.size()) throw std::invalid_argument("random motion: range size mismatch");
  if (!(spec.duration > 0.0)) throw std::invalid_argument("random motion: duration must be > 0");
  if (!(spec.key_interval > 0.0)) throw std::invalid_argument("random motion: key_interval must be > 0");
  if (!(spec.sample_dt > 0.0)) throw std::invalid_argument("random motion: sample_dt must be > 0");

  std::mt19937_64 gen(spec.seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  const int keys = static_cast<int>(std::ceil(spec.duration / spec.key_interval)) + 1;
  std::vector<VecX> ctrl;
  ctrl.push_back(start);
  for (int k = 1; k < keys; ++k) {
    VecX p(start.size());
    for (Eigen::Index d = 0; d < p.size(); ++d) p[d] = range[d] * unit(gen);
    ctrl.push_back(p);
  }
  auto at = [&](int k) -> const VecX& { return ctrl[std::clamp(k, 0, keys - 1)]; };

  std::vector<Keyframe> out;
  const int samples = static_cast<int>(std::ceil(spec.duration / spec.sample_dt));
  for (int s = 0; s <= samples; ++s) {
    const double t = std::min(s * spec.sample_dt, spec.duration);
    const double u = t / spec.key_interval;
    const int k = std::min(static_cast<int>(u), keys - 2);
    const double f = u - k;
    const VecX& p0 = at(k - 1);
    const VecX& p1 = at(k);
    const VecX& p2 = at(k + 1);
    const VecX& p3 = at(k + 2);
    // Uniform Catmull-Rom.
    const double f2 = f * f, f3 = f2 * f;
    VecX p = 0.5 * ((2.0 * p1) + (-p0 + p2) * f + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * f2 +
                    (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * f3);
    if (!out.empty() && t <= out.back().t) break;
    out.push_back({t, std::move(p)});
  }
  return out;
}

std::vector<Keyframe> pca_random_trajectory(const KinematicTemplate& tmpl, double range,
                                            const RandomMotionSpec& spec) {
  const int dim = tmpl.param_dim();
  return random_trajectory(VecX::Zero(dim), VecX::Constant(dim, range), spec);
}

std::vector<Keyframe> arm_hand_trajectory(const KinematicTemplate& tmpl, double elbow_range,
                                          double hand_range, const RandomMotionSpec& spec) {
  const int dim = tmpl.param_dim();
  if (dim < 4) throw std::invalid_argument("arm_hand motion needs a template with elbow and hand parameters");
  VecX range = VecX::Constant(dim, hand_range);
  range.head(3).setConstant(elbow_range);
  return random_trajectory(VecX::Zero(dim), range, spec);
}

}  // namespace evmesh
