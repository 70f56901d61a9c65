#include "evmesh/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace evmesh {

std::vector<int> match_nearest(const JointTrajectory& est, const JointTrajectory& gt,
                               double tolerance) {
  std::vector<int> out(est.size(), -1);
  for (size_t i = 0; i < est.size(); ++i) {
    const double t = est[i].t;
    auto it = std::lower_bound(gt.begin(), gt.end(), t,
                               [](const JointSample& s, double v) { return s.t < v; });
    int best = -1;
    double best_gap = tolerance;
    for (auto c : {it, it == gt.begin() ? gt.end() : it - 1}) {
      if (c == gt.end()) continue;
      const double gap = std::abs(c->t - t);
      if (gap <= best_gap && (best < 0 || gap < best_gap)) {
        best = static_cast<int>(c - gt.begin());
        best_gap = gap;
      }
    }
    out[i] = best;
  }
  return out;
}

MatchedPair pair_by_time(const JointTrajectory& est, const JointTrajectory& gt, double tolerance) {
  MatchedPair p;
  const auto idx = match_nearest(est, gt, tolerance);
  for (size_t i = 0; i < est.size(); ++i) {
    if (idx[i] < 0) {
      ++p.unmatched;
      continue;
    }
    p.est.push_back(est[i]);
    p.gt.push_back(gt[idx[i]]);
  }
  return p;
}

std::vector<std::vector<double>> joint_errors_mm(const JointTrajectory& est,
                                                 const JointTrajectory& gt) {
  if (est.size() != gt.size()) {
    throw std::domain_error("metrics: " + std::to_string(est.size()) + " estimates vs " +
                            std::to_string(gt.size()) + " ground-truth samples");
  }
  std::vector<std::vector<double>> err(est.size());
  for (size_t s = 0; s < est.size(); ++s) {
    if (est[s].joints.size() != gt[s].joints.size()) {
      throw std::domain_error("metrics: joint count mismatch (" +
                              std::to_string(est[s].joints.size()) + " vs " +
                              std::to_string(gt[s].joints.size()) + ")");
    }
    err[s].reserve(est[s].joints.size());
    for (size_t j = 0; j < est[s].joints.size(); ++j) {
      err[s].push_back(1000.0 * (est[s].joints[j] - gt[s].joints[j]).norm());
    }
  }
  return err;
}

MpjpeResult mpjpe(const JointTrajectory& est, const JointTrajectory& gt) {
  const auto err = joint_errors_mm(est, gt);
  MpjpeResult r;
  r.samples = static_cast<int>(err.size());
  double total = 0.0;
  size_t count = 0;
  std::vector<double> per_sample;
  for (const auto& row : err) {
    double s = 0.0;
    for (double e : row) s += e;
    total += s;
    count += row.size();
    if (!row.empty()) per_sample.push_back(s / row.size());
  }
  if (count == 0) return r;
  r.mean_mm = total / count;
  std::sort(per_sample.begin(), per_sample.end());
  const size_t m = per_sample.size();
  r.median_mm = m % 2 ? per_sample[m / 2] : 0.5 * (per_sample[m / 2 - 1] + per_sample[m / 2]);
  return r;
}

std::vector<double> pck_curve(const JointTrajectory& est, const JointTrajectory& gt,
                              const std::vector<double>& thresholds_mm) {
  const auto err = joint_errors_mm(est, gt);
  std::vector<double> flat;
  for (const auto& row : err) flat.insert(flat.end(), row.begin(), row.end());
  std::sort(flat.begin(), flat.end());
  std::vector<double> out;
  out.reserve(thresholds_mm.size());
  for (double tau : thresholds_mm) {
    if (flat.empty()) {
      out.push_back(0.0);
      continue;
    }
    const auto n = std::upper_bound(flat.begin(), flat.end(), tau) - flat.begin();
    out.push_back(static_cast<double>(n) / flat.size());
  }
  return out;
}

std::vector<double> default_pck_thresholds() {
  std::vector<double> t(51);
  for (int i = 0; i <= 50; ++i) t[i] = i;
  return t;
}

double auc(const std::vector<double>& pck, const std::vector<double>& thresholds_mm) {
  if (pck.size() != thresholds_mm.size() || pck.size() < 2) {
    throw std::domain_error("auc: need at least two thresholds matching the curve");
  }
  const double span = thresholds_mm.back() - thresholds_mm.front();
  const double step = span / (thresholds_mm.size() - 1);
  if (!(step > 0.0)) throw std::domain_error("auc: thresholds must be increasing");
  for (size_t i = 1; i < thresholds_mm.size(); ++i) {
    if (std::abs(thresholds_mm[i] - thresholds_mm[i - 1] - step) > 1e-9 * std::max(1.0, span)) {
      throw std::domain_error("auc: thresholds must be uniformly spaced");
    }
  }
  double area = 0.0;
  for (size_t i = 1; i < pck.size(); ++i) area += 0.5 * (pck[i] + pck[i - 1]) * step;
  return area / span;
}

}  // namespace evmesh
