#include "reloc/registration.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "reloc/kdtree.hpp"

namespace reloc {

CorrespondenceSet match_keypoints(const std::vector<LocalKeypoint>& query,
                                  const std::vector<LocalKeypoint>& candidate,
                                  double lowe_ratio) {
  if (query.empty() || candidate.empty())
    throw InvalidArgument("match_keypoints: empty keypoint set");
  if (!(lowe_ratio > 0.0))
    throw InvalidArgument("match_keypoints: ratio must be positive");

  const auto usable = [](const LocalKeypoint& kp) {
    return kp.descriptor.size() == LocalKeypoint::kDim &&
           kp.descriptor.norm() > 0.0f;
  };

  const int nq = static_cast<int>(query.size());
  const int nc = static_cast<int>(candidate.size());
  const double inf = std::numeric_limits<double>::infinity();

  // Best and second-best candidate per query, and best query per candidate.
  std::vector<int> best_c(static_cast<std::size_t>(nq), -1);
  std::vector<double> best_d(static_cast<std::size_t>(nq), inf);
  std::vector<double> second_d(static_cast<std::size_t>(nq), inf);
  std::vector<int> best_q(static_cast<std::size_t>(nc), -1);
  std::vector<double> best_qd(static_cast<std::size_t>(nc), inf);

  for (int qi = 0; qi < nq; ++qi) {
    if (!usable(query[static_cast<std::size_t>(qi)])) continue;
    const auto& qd = query[static_cast<std::size_t>(qi)].descriptor;
    for (int ci = 0; ci < nc; ++ci) {
      if (!usable(candidate[static_cast<std::size_t>(ci)])) continue;
      const double d =
          (qd - candidate[static_cast<std::size_t>(ci)].descriptor).norm();
      auto& bd = best_d[static_cast<std::size_t>(qi)];
      auto& sd = second_d[static_cast<std::size_t>(qi)];
      if (d < bd || (d == bd && best_c[static_cast<std::size_t>(qi)] > ci)) {
        sd = bd;
        bd = d;
        best_c[static_cast<std::size_t>(qi)] = ci;
      } else if (d < sd) {
        sd = d;
      }
      if (d < best_qd[static_cast<std::size_t>(ci)]) {
        best_qd[static_cast<std::size_t>(ci)] = d;
        best_q[static_cast<std::size_t>(ci)] = qi;
      }
    }
  }

  CorrespondenceSet out;
  for (int qi = 0; qi < nq; ++qi) {
    const int ci = best_c[static_cast<std::size_t>(qi)];
    if (ci < 0 || best_q[static_cast<std::size_t>(ci)] != qi) continue;
    const double bd = best_d[static_cast<std::size_t>(qi)];
    const double sd = second_d[static_cast<std::size_t>(qi)];
    if (sd != inf && bd > lowe_ratio * sd) continue;
    out.pairs.push_back({qi, ci, bd});
  }
  std::sort(out.pairs.begin(), out.pairs.end(),
            [](const Correspondence& a, const Correspondence& b) {
              if (a.distance != b.distance) return a.distance < b.distance;
              return a.query_index < b.query_index;
            });
  return out;
}

namespace {

// Bounded uniform draw from raw engine output, bias-free by rejection.
std::uint64_t draw_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit =
      std::numeric_limits<std::uint64_t>::max() -
      std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % bound;
}

struct InlierStats {
  int count = 0;
  double rms = 0.0;
  std::vector<int> indices;
};

InlierStats count_inliers(
    const RigidTransform& t, const CorrespondenceSet& corr,
    const std::vector<Eigen::Vector3d,
                      Eigen::aligned_allocator<Eigen::Vector3d>>& query_pts,
    const std::vector<Eigen::Vector3d,
                      Eigen::aligned_allocator<Eigen::Vector3d>>& cand_pts,
    double threshold) {
  InlierStats s;
  double acc = 0.0;
  for (std::size_t i = 0; i < corr.pairs.size(); ++i) {
    const auto& pair = corr.pairs[i];
    const double d2 =
        (t.apply(query_pts[static_cast<std::size_t>(pair.query_index)]) -
         cand_pts[static_cast<std::size_t>(pair.candidate_index)])
            .squaredNorm();
    if (d2 < threshold * threshold) {
      s.indices.push_back(static_cast<int>(i));
      acc += d2;
    }
  }
  s.count = static_cast<int>(s.indices.size());
  s.rms = s.count > 0 ? std::sqrt(acc / s.count) : 0.0;
  return s;
}

RigidTransform fit_on(
    const CorrespondenceSet& corr, const std::vector<int>& subset,
    const std::vector<Eigen::Vector3d,
                      Eigen::aligned_allocator<Eigen::Vector3d>>& query_pts,
    const std::vector<Eigen::Vector3d,
                      Eigen::aligned_allocator<Eigen::Vector3d>>& cand_pts) {
  std::vector<Eigen::Vector3d, Eigen::aligned_allocator<Eigen::Vector3d>> src,
      dst;
  src.reserve(subset.size());
  dst.reserve(subset.size());
  for (int i : subset) {
    const auto& pair = corr.pairs[static_cast<std::size_t>(i)];
    src.push_back(query_pts[static_cast<std::size_t>(pair.query_index)]);
    dst.push_back(cand_pts[static_cast<std::size_t>(pair.candidate_index)]);
  }
  return kabsch_fit(src, dst);
}

}  // namespace

RegistrationResult ransac_register(
    const CorrespondenceSet& corr,
    const std::vector<Eigen::Vector3d,
                      Eigen::aligned_allocator<Eigen::Vector3d>>& query_pts,
    const std::vector<Eigen::Vector3d,
                      Eigen::aligned_allocator<Eigen::Vector3d>>& cand_pts,
    double inlier_threshold, int max_iters, std::uint64_t seed) {
  if (corr.pairs.size() < 3)
    throw InsufficientData("need at least 3 correspondences, got " +
                           std::to_string(corr.pairs.size()));
  if (!(inlier_threshold > 0.0))
    throw InvalidArgument("inlier threshold must be positive");
  if (max_iters < 1) throw InvalidArgument("max_iters must be >= 1");
  for (const auto& pair : corr.pairs) {
    if (pair.query_index < 0 ||
        static_cast<std::size_t>(pair.query_index) >= query_pts.size() ||
        pair.candidate_index < 0 ||
        static_cast<std::size_t>(pair.candidate_index) >= cand_pts.size())
      throw InvalidArgument("correspondence index out of range");
  }

  std::mt19937_64 rng(seed);
  const std::uint64_t n = corr.pairs.size();
  InlierStats best;
  RigidTransform best_model;
  double needed = max_iters;

  for (int iter = 0; iter < max_iters && iter < needed; ++iter) {
    std::vector<int> sample;
    while (sample.size() < 3) {
      const int idx = static_cast<int>(draw_below(rng, n));
      if (std::find(sample.begin(), sample.end(), idx) == sample.end())
        sample.push_back(idx);
    }
    RigidTransform model;
    try {
      model = fit_on(corr, sample, query_pts, cand_pts);
    } catch (const DegenerateConfiguration&) {
      continue;
    }
    InlierStats stats =
        count_inliers(model, corr, query_pts, cand_pts, inlier_threshold);
    if (stats.count > best.count ||
        (stats.count == best.count && stats.rms < best.rms)) {
      best = std::move(stats);
      best_model = model;
      // Standard adaptive stopping: enough iterations that a pure-inlier
      // 3-sample was drawn with 99% confidence.
      const double w =
          static_cast<double>(best.count) / static_cast<double>(n);
      const double p_good = w * w * w;
      if (p_good >= 1.0 - 1e-12) {
        needed = iter + 1.0;
      } else if (p_good > 0.0) {
        needed = std::ceil(std::log(0.01) / std::log(1.0 - p_good));
      }
    }
  }

  if (best.count < 3)
    throw NoConsensus("no model reached 3 inliers over " +
                      std::to_string(corr.pairs.size()) + " correspondences");

  RegistrationResult result;
  try {
    result.transform = fit_on(corr, best.indices, query_pts, cand_pts);
  } catch (const DegenerateConfiguration&) {
    result.transform = best_model;
  }
  const InlierStats final_stats = count_inliers(
      result.transform, corr, query_pts, cand_pts, inlier_threshold);
  // Keep the refit only when it does not lose support.
  if (final_stats.count >= best.count) {
    result.inlier_count = final_stats.count;
    result.inlier_rms = final_stats.rms;
  } else {
    result.transform = best_model;
    result.inlier_count = best.count;
    result.inlier_rms = best.rms;
  }
  result.converged = true;
  return result;
}

RegistrationResult icp_refine(const PointCloud& query,
                              const PointCloud& candidate,
                              const RigidTransform& initial, double resolution,
                              double max_corr_dist, int max_iters) {
  if (query.empty() || candidate.empty())
    throw InvalidArgument("icp_refine: empty cloud");
  if (!(max_corr_dist > 0.0))
    throw InvalidArgument("icp_refine: max_corr_dist must be positive");
  if (max_iters < 1) throw InvalidArgument("icp_refine: max_iters must be >= 1");

  const PointCloud src = voxel_downsample(query, resolution);
  const PointCloud dst = voxel_downsample(candidate, resolution);
  const KdTree tree = KdTree::from_points(dst.points);

  RegistrationResult result;
  RigidTransform t = initial;
  RigidTransform t_prev = initial;
  double prev_mse = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < max_iters; ++iter) {
    std::vector<Eigen::Vector3d, Eigen::aligned_allocator<Eigen::Vector3d>> s,
        d;
    double acc = 0.0;
    for (const auto& p : src.points) {
      const auto [id, dist] = tree.nearest(t.apply(p));
      if (dist > max_corr_dist) continue;
      s.push_back(p);
      d.push_back(dst.points[static_cast<std::size_t>(id)]);
      acc += dist * dist;
    }
    if (s.empty()) {
      if (iter == 0)
        throw NoOverlap("no correspondences within " +
                        std::to_string(max_corr_dist) +
                        " m at the initial pose");
      break;
    }
    const double mse = acc / static_cast<double>(s.size());
    if (mse > prev_mse) {
      // The correspondence swap raised the objective: undo and stop.
      t = t_prev;
      result.converged = true;
      break;
    }
    result.error_history.push_back(mse);
    result.inlier_count = static_cast<int>(s.size());
    result.inlier_rms = std::sqrt(mse);
    result.icp_iterations = iter + 1;
    if (prev_mse - mse < 1e-6) {
      result.converged = true;
      break;
    }
    prev_mse = mse;
    t_prev = t;
    try {
      t = kabsch_fit(s, d);
    } catch (const DegenerateConfiguration&) {
      result.converged = true;
      break;
    }
  }

  result.transform = t;
  return result;
}

bool registration_success(const RigidTransform& estimate,
                          const RigidTransform& truth, double rot_tol_deg,
                          double trans_tol_m) {
  if (!(rot_tol_deg > 0.0) || !(trans_tol_m > 0.0))
    throw InvalidArgument("registration_success: tolerances must be positive");
  const double rot_deg = rotation_error(estimate, truth) * 180.0 / M_PI;
  return rot_deg <= rot_tol_deg &&
         translation_error(estimate, truth) <= trans_tol_m;
}

}  // namespace reloc
