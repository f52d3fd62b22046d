#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <sys/wait.h>
#include <unistd.h>
#include <vector>

#include "reloc/camera.hpp"
#include "reloc/descriptors.hpp"
#include "reloc/errors.hpp"
#include "reloc/geometry.hpp"
#include "reloc/io.hpp"
#include "reloc/kdtree.hpp"
#include "reloc/pipeline.hpp"
#include "reloc/pose_graph.hpp"
#include "reloc/provider.hpp"
#include "reloc/registration.hpp"
#include "reloc/svc.hpp"
#include "reloc/verify.hpp"
#include "sim.hpp"

using namespace reloc;
using namespace relocsim;

namespace {

constexpr double kPi = 3.14159265358979323846;
constexpr double kDeg = kPi / 180.0;

double now_seconds() {
  return std::chrono::duration<double>(
             std::chrono::steady_clock::now().time_since_epoch())
      .count();
}

Eigen::Quaterniond random_quat(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double u1 = u(rng);
  const double u2 = 2.0 * kPi * u(rng);
  const double u3 = 2.0 * kPi * u(rng);
  const double a = std::sqrt(1.0 - u1), b = std::sqrt(u1);
  return Eigen::Quaterniond(a * std::sin(u2), a * std::cos(u2),
                            b * std::sin(u3), b * std::cos(u3));
}

Eigen::Vector3d random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Eigen::Vector3d v(g(rng), g(rng), g(rng));
  while (v.norm() < 1e-6) v = Eigen::Vector3d(g(rng), g(rng), g(rng));
  return v.normalized();
}

SvcModel passthrough_model() {
  BinarySvm svm;
  svm.positive = Verdict::matched;
  svm.negative = Verdict::unmatched;
  svm.support_vectors.push_back(Eigen::Vector2d::Zero());
  svm.coeffs.push_back(0.0);
  SvcModel m;
  m.classifiers.push_back(svm);
  return m;
}

VerifyParams tuned_verify_params() {
  VerifyParams p;
  p.target_superpixels = 150;
  p.top_k = 12;
  return p;
}

PipelineConfig tuned_config() {
  PipelineConfig cfg;
  cfg.inlier_threshold = 0.7;
  cfg.icp_resolution = 0.1;
  cfg.target_superpixels = 150;
  cfg.top_k = 12;
  return cfg;
}

struct Criterion {
  int id = 0;
  std::string label;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

// ---------------------------------------------------------------- criterion 1

Criterion criterion_geometry_oracles() {
  Criterion c{1, "Kabsch and k-NN oracles", false, "", 0.0};
  const double t0 = now_seconds();
  std::mt19937_64 rng(101);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  double worst_rot = 0.0, worst_trans = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const RigidTransform truth(random_quat(rng),
                               Eigen::Vector3d(10 * u(rng), 10 * u(rng),
                                               10 * u(rng)));
    std::vector<Eigen::Vector3d, Eigen::aligned_allocator<Eigen::Vector3d>>
        source(20), target(20);
    for (int i = 0; i < 20; ++i) {
      source[i] = Eigen::Vector3d(5 * u(rng), 5 * u(rng), 5 * u(rng));
      target[i] = truth.apply(source[i]);
    }
    const RigidTransform fit = kabsch_fit(source, target);
    worst_rot = std::max(worst_rot, rotation_error(fit, truth));
    worst_trans = std::max(worst_trans, translation_error(fit, truth));
  }

  int knn_mismatches = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int dim = 2 + trial % 7;
    const int n = 30 + static_cast<int>(rng() % 400);
    Eigen::MatrixXd pts(n, dim);
    for (int i = 0; i < n; ++i)
      for (int d = 0; d < dim; ++d) pts(i, d) = 10 * u(rng);
    const KdTree tree(pts);
    for (int q = 0; q < 5; ++q) {
      Eigen::VectorXd query(dim);
      for (int d = 0; d < dim; ++d) query[d] = 12 * u(rng);
      const int k = 1 + static_cast<int>(rng() % 20);
      const auto got = tree.knn(query, k);

      std::vector<std::pair<double, int>> brute(n);
      for (int i = 0; i < n; ++i)
        brute[i] = {(pts.row(i).transpose() - query).norm(), i};
      std::sort(brute.begin(), brute.end());
      const std::size_t expect = std::min<std::size_t>(k, n);
      if (got.size() != expect) ++knn_mismatches;
      for (std::size_t i = 0; i < std::min(expect, got.size()); ++i)
        if (got[i].first != brute[i].second ||
            std::abs(got[i].second - brute[i].first) > 1e-12)
          ++knn_mismatches;
    }
  }

  c.seconds = now_seconds() - t0;
  c.pass = worst_rot <= 1e-9 && worst_trans <= 1e-9 && knn_mismatches == 0 &&
           c.seconds < 10.0;
  std::ostringstream d;
  d << "kabsch worst " << worst_rot << " rad / " << worst_trans
    << " m over 1000, knn mismatches " << knn_mismatches << " over 500 queries";
  c.detail = d.str();
  return c;
}

// ---------------------------------------------------------------- criterion 2

Criterion criterion_similarity_fidelity(const SimWorld& world) {
  Criterion c{2, "similarity matrix and alignment-ratio identities", false, "",
              0.0};
  const double t0 = now_seconds();
  std::mt19937_64 rng(202);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  double worst_gap = 0.0;
  bool flags_clean = true;
  for (int trial = 0; trial < 100; ++trial) {
    const int count = 5 + static_cast<int>(rng() % 36);
    const int dim = 4 + static_cast<int>(rng() % 29);

    SuperpixelSet pixels;
    pixels.count = count;
    pixels.features.resize(count, dim);
    for (int i = 0; i < count; ++i)
      for (int d = 0; d < dim; ++d)
        pixels.features(i, d) = static_cast<float>(u(rng));
    if (count > 2) pixels.features.row(1).setZero();

    SuperpointSet points;
    points.feature_dim = dim;
    for (int label = 0; label < count; ++label) {
      if (rng() % 4 == 0) continue;
      Superpoint group;
      group.label = label;
      group.feature.resize(dim);
      for (int d = 0; d < dim; ++d)
        group.feature[d] = static_cast<float>(u(rng));
      if (rng() % 7 == 0) group.feature.setZero();
      points.groups.push_back(std::move(group));
    }
    if (points.groups.empty()) continue;

    const SimilarityMatrix m = similarity_matrix(pixels, points);
    const int n = m.size();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        double dot = 0.0, fa = 0.0, fb = 0.0;
        for (int d = 0; d < dim; ++d) {
          const double a =
              static_cast<double>(pixels.features(m.labels[i], d));
          const double b = static_cast<double>(points.groups[j].feature[d]);
          dot += a * b;
          fa += a * a;
          fb += b * b;
        }
        if (std::sqrt(fa) <= 1e-30 || std::sqrt(fb) <= 1e-30) {
          if (!m.flagged(i, j) || m.cs(i, j) != 0.0) flags_clean = false;
          continue;
        }
        const double direct =
            std::clamp(dot / (std::sqrt(fa) * std::sqrt(fb)), -1.0, 1.0);
        worst_gap = std::max(worst_gap, std::abs(direct - m.cs(i, j)));
      }
  }

  // The reported ratio must be exactly the one its integer counts define.
  bool ratio_exact = true;
  int runs = 0;
  const auto provider = make_color_embedding_provider(64);
  const SvcModel stub = passthrough_model();
  for (int i = 0; i < 6; ++i) {
    const PointCloud cand =
        sample_cloud(world.scenes[i], world.capture_poses[i]);
    for (int variant = 0; variant < 2; ++variant) {
      const QueryKind kind =
          variant == 0 ? QueryKind::genuine : QueryKind::corrupted;
      const SimQuery q = make_query(world, kind, i, 4100 + 7 * i + variant);
      const RigidTransform pose = variant == 0 ? q.true_relative.inverse()
                                               : q.cloud_relative.inverse();
      const auto vf = verify(q.image, cand, pose, sim_camera(), *provider,
                             stub, tuned_verify_params())
                          .features;
      ++runs;
      const double recomputed =
          1.0 - static_cast<double>(vf.mismatch_count) /
                    static_cast<double>(vf.pair_count);
      if (vf.alignment_ratio != recomputed) ratio_exact = false;
      if (std::llround(vf.alignment_ratio * vf.pair_count) +
              vf.mismatch_count !=
          vf.pair_count)
        ratio_exact = false;
      if ((vf.pair_count - vf.mismatch_count) + vf.mismatch_count !=
          vf.pair_count)
        ratio_exact = false;
    }
  }

  c.seconds = now_seconds() - t0;
  c.pass = worst_gap <= 1e-12 && flags_clean && ratio_exact && runs == 12;
  std::ostringstream d;
  d << "cosine worst gap " << worst_gap << ", zero-norm flags "
    << (flags_clean ? "clean" : "wrong") << ", ratio identity "
    << (ratio_exact ? "exact" : "broken") << " over " << runs << " runs";
  c.detail = d.str();
  return c;
}

// ---------------------------------------------------------------- criterion 3

Criterion criterion_icp_convergence() {
  Criterion c{3, "ICP monotonicity and convergence", false, "", 0.0};
  const double t0 = now_seconds();
  std::mt19937_64 rng(303);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  int monotone_breaks = 0;
  int successes = 0;
  const int trials = 100;
  for (int t = 0; t < trials; ++t) {
    const Scene scene = make_scene(3000 + t);
    const PointCloud query = sample_cloud(scene, sensor_pose(0, 0, kPi * u(rng)));
    const RigidTransform truth(
        Eigen::Quaterniond(Eigen::AngleAxisd(kPi * u(rng),
                                             Eigen::Vector3d::UnitZ())),
        Eigen::Vector3d(2 * u(rng), 2 * u(rng), 0.2 * u(rng)));
    const PointCloud candidate = apply(truth, query);

    const RigidTransform wobble(
        Eigen::Quaterniond(
            Eigen::AngleAxisd(3.0 * kDeg * u01(rng), random_unit(rng))),
        random_unit(rng) * 0.3 * u01(rng));
    const RigidTransform initial = compose(truth, wobble);

    const RegistrationResult icp =
        icp_refine(query, candidate, initial, 0.1, 1.0, 50);
    for (std::size_t i = 1; i < icp.error_history.size(); ++i)
      if (icp.error_history[i] > icp.error_history[i - 1]) ++monotone_breaks;
    if (rotation_error(icp.transform, truth) <= 0.5 * kDeg &&
        translation_error(icp.transform, truth) <= 0.05)
      ++successes;
  }

  c.seconds = now_seconds() - t0;
  c.pass = monotone_breaks == 0 && successes >= 95;
  std::ostringstream d;
  d << successes << "/" << trials << " converged to 0.05 m / 0.5 deg, "
    << monotone_breaks << " error-history increases";
  c.detail = d.str();
  return c;
}

// ---------------------------------------------------------------- criterion 4

Criterion criterion_ransac_gap() {
  Criterion c{4, "RANSAC robustness and the value of refinement", false, "",
              0.0};
  const double t0 = now_seconds();
  std::mt19937_64 rng(404);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.45);

  const int trials = 100;
  int ransac_ok = 0, refined_ok = 0;
  for (int t = 0; t < trials; ++t) {
    const Scene scene = make_scene(6000 + t);
    const PointCloud query = sample_cloud(scene, sensor_pose(0, 0, kPi * u(rng)));
    const RigidTransform truth(
        Eigen::Quaterniond(Eigen::AngleAxisd(kPi * u(rng),
                                             Eigen::Vector3d::UnitZ())),
        Eigen::Vector3d(3 * u(rng), 3 * u(rng), 0.0));
    const PointCloud candidate = apply(truth, query);

    const int pairs = 40;
    CorrespondenceSet corr;
    std::vector<Eigen::Vector3d, Eigen::aligned_allocator<Eigen::Vector3d>>
        q_pts(pairs), c_pts(pairs);
    for (int i = 0; i < pairs; ++i) {
      const std::size_t idx = rng() % query.size();
      q_pts[i] = query.points[idx];
      if (i % 2 == 0) {
        c_pts[i] = truth.apply(q_pts[i]) +
                   Eigen::Vector3d(noise(rng), noise(rng), noise(rng));
      } else {
        c_pts[i] =
            truth.apply(q_pts[i]) + random_unit(rng) * (1.0 + 2.0 * u01(rng));
      }
      corr.pairs.push_back({i, i, 0.0});
    }

    const RegistrationResult coarse = ransac_register(
        corr, q_pts, c_pts, 1.0, 500, 4040 + static_cast<std::uint64_t>(t));
    const RegistrationResult refined =
        icp_refine(query, candidate, coarse.transform, 0.1, 1.0, 50);
    if (registration_success(coarse.transform, truth, 5.0, 2.0)) ++ransac_ok;
    if (registration_success(refined.transform, truth, 5.0, 2.0)) ++refined_ok;
  }

  c.seconds = now_seconds() - t0;
  c.pass = refined_ok >= 95 && ransac_ok < refined_ok;
  std::ostringstream d;
  d << "RANSAC alone " << ransac_ok << "/" << trials << ", with ICP "
    << refined_ok << "/" << trials << " at 50% outliers";
  c.detail = d.str();
  return c;
}

// ---------------------------------------------------------------- criterion 5

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n == 0 ? 0.0
                : (n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]));
}

Criterion criterion_verification_separability(const SimWorld& world,
                                              std::vector<SvcSample>& out_train) {
  Criterion c{5, "verification separability and classifier accuracy", false,
              "", 0.0};
  const double t0 = now_seconds();

  const std::vector<SvcSample> samples =
      collect_svc_samples(world, 4, tuned_verify_params());

  std::vector<double> mcs_matched, mcs_unmatched, nu_matched, nu_mismatched;
  for (const auto& s : samples) {
    if (s.label == Verdict::matched) {
      mcs_matched.push_back(s.x.x());
      nu_matched.push_back(s.x.y());
    } else if (s.label == Verdict::mismatched) {
      nu_mismatched.push_back(s.x.y());
    } else {
      mcs_unmatched.push_back(s.x.x());
    }
  }

  // Per scene and class: variants 0,1 train, variants 2,3 held out.
  std::vector<SvcSample> train, held;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const std::size_t variant = (i / 3) % 4;
    (variant < 2 ? train : held).push_back(samples[i]);
  }
  const SvcModel model = svc_train(train);
  int correct = 0;
  for (const auto& s : held)
    if (svc_predict(model, s.x) == s.label) ++correct;
  const double held_accuracy =
      static_cast<double>(correct) / static_cast<double>(held.size());

  const double med_mcs_matched = median_of(mcs_matched);
  const double med_mcs_unmatched = median_of(mcs_unmatched);
  const double med_nu_matched = median_of(nu_matched);
  const double med_nu_mismatched = median_of(nu_mismatched);

  c.seconds = now_seconds() - t0;
  c.pass = med_mcs_unmatched < med_mcs_matched &&
           med_nu_mismatched < med_nu_matched && held_accuracy >= 0.95 &&
           c.seconds < 120.0;
  std::ostringstream d;
  d << "median MCS unmatched " << med_mcs_unmatched << " < matched "
    << med_mcs_matched << ", median nu mismatched " << med_nu_mismatched
    << " < matched " << med_nu_matched << ", held-out accuracy "
    << held_accuracy << " on " << held.size() << " samples";
  c.detail = d.str();
  out_train = train;
  return c;
}

// ---------------------------------------------------------------- criterion 6

Criterion criterion_yaw_degradation(const SimWorld& world) {
  Criterion c{6, "alignment ratio degrades with yaw corruption", false, "",
              0.0};
  const double t0 = now_seconds();
  const auto provider = make_color_embedding_provider(64);
  const SvcModel stub = passthrough_model();
  const double yaws[4] = {0.0, 10.0 * kDeg, 30.0 * kDeg, 90.0 * kDeg};

  std::vector<std::vector<double>> nu(4);
  for (int t = 0; t < 20; ++t) {
    const PointCloud cloud =
        sample_cloud(world.scenes[t], world.capture_poses[t]);
    const Image image = render_view(world.scenes[t], world.capture_poses[t]);
    for (int k = 0; k < 4; ++k) {
      const auto vf = verify(image, cloud, RigidTransform::yaw(yaws[k]),
                             sim_camera(), *provider, stub,
                             tuned_verify_params())
                          .features;
      nu[k].push_back(vf.alignment_ratio);
    }
  }

  double med[4];
  for (int k = 0; k < 4; ++k) med[k] = median_of(nu[k]);
  c.seconds = now_seconds() - t0;
  c.pass = med[0] >= med[1] && med[1] >= med[2] && med[2] >= med[3];
  std::ostringstream d;
  d << "median nu at 0/10/30/90 deg: " << med[0] << " / " << med[1] << " / "
    << med[2] << " / " << med[3];
  c.detail = d.str();
  return c;
}

// ---------------------------------------------------------------- criterion 7

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

RunResult run_cli(const std::filesystem::path& scratch,
                  const std::string& args) {
  static int counter = 0;
  const auto out_file = scratch / ("out_" + std::to_string(counter));
  const auto err_file = scratch / ("err_" + std::to_string(counter));
  ++counter;
  const std::string cmd = std::string("\"") + RELOC_BIN + "\" " + args +
                          " > " + out_file.string() + " 2> " +
                          err_file.string();
  const int status = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  r.out = read_text_file(out_file);
  r.err = read_text_file(err_file);
  return r;
}

std::map<std::string, std::string> parse_kv(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto colon = line.find(": ");
    if (colon != std::string::npos)
      kv[line.substr(0, colon)] = line.substr(colon + 2);
  }
  return kv;
}

struct WakeUpOutcome {
  Criterion criterion;
  std::vector<std::pair<std::string, std::pair<double, double>>> stage_stats;
};

WakeUpOutcome criterion_wake_up(const SimWorld& world,
                                const std::filesystem::path& scratch,
                                const std::vector<SvcSample>& train_samples) {
  WakeUpOutcome outcome;
  Criterion& c = outcome.criterion;
  c = {7, "end-to-end wake-up over a 20-submap prior", false, "", 0.0};
  const double t0 = now_seconds();

  const auto input = scratch / "wake_input";
  const auto db = scratch / "wake_db";
  const auto qdir = scratch / "wake_queries";
  std::filesystem::create_directories(input);
  std::filesystem::create_directories(qdir);
  write_database_inputs(world, input);
  save_camera_calibration(scratch / "calib.txt", sim_camera());
  save_svc_samples(scratch / "samples.txt", train_samples);
  write_text_file(scratch / "pipeline.conf",
                  "registration.inlier_threshold = 0.7\n"
                  "registration.icp_resolution = 0.1\n"
                  "verification.target_superpixels = 150\n"
                  "verification.top_k = 12\n");
  const std::string conf = " --config " + (scratch / "pipeline.conf").string();

  const RunResult built = run_cli(
      scratch, "build-db --input " + input.string() + " --db " + db.string() +
                   conf);
  const RunResult trained = run_cli(
      scratch, "train-svc --samples " + (scratch / "samples.txt").string() +
                   " --out " + (scratch / "model.svc").string());
  if (built.exit_code != 0 || trained.exit_code != 0) {
    c.detail = "database build or classifier training failed";
    c.seconds = now_seconds() - t0;
    return outcome;
  }

  struct Planted {
    SimQuery query;
    std::string stem;
    Verdict expected;
  };
  std::vector<Planted> planted;
  for (int i = 0; i < 14; ++i)
    planted.push_back({make_query(world, QueryKind::genuine, i, 5000 + i),
                       "genuine_" + std::to_string(i), Verdict::matched});
  for (int i = 14; i < 17; ++i)
    planted.push_back({make_query(world, QueryKind::corrupted, i, 6000 + i),
                       "corrupted_" + std::to_string(i), Verdict::mismatched});
  for (int i = 0; i < 3; ++i)
    planted.push_back({make_query(world, QueryKind::unrelated, -1, 7000 + i),
                       "unrelated_" + std::to_string(i), Verdict::unmatched});

  const char* stage_names[7] = {"description",         "localisation",
                                "superpixel",          "feature_description",
                                "mcs",                 "verification",
                                "total"};
  std::vector<std::vector<double>> stage_samples(7);

  int failures = 0;
  std::ostringstream why;
  for (std::size_t i = 0; i < planted.size(); ++i) {
    const auto& p = planted[i];
    save_cloud(qdir / (p.stem + ".r3pc"), p.query.cloud);
    save_ppm(qdir / (p.stem + ".ppm"), p.query.image);
    const RunResult r = run_cli(
        scratch,
        "relocalise --db " + db.string() + " --cloud " +
            (qdir / (p.stem + ".r3pc")).string() + " --image " +
            (qdir / (p.stem + ".ppm")).string() + " --calib " +
            (scratch / "calib.txt").string() + " --svc " +
            (scratch / "model.svc").string() + " --query-id " +
            std::to_string(200 + i) + conf);
    const auto kv = parse_kv(r.out);
    const std::string verdict =
        kv.count("verdict") ? kv.at("verdict") : "(missing)";

    bool ok = verdict == verdict_name(p.expected);
    const int expected_exit = p.expected == Verdict::matched ? 0 : 1;
    if (r.exit_code != expected_exit) ok = false;

    if (p.expected == Verdict::matched) {
      std::string edge_line;
      std::istringstream lines(r.out);
      for (std::string line; std::getline(lines, line);)
        if (line.rfind("edge ", 0) == 0) edge_line = line;
      if (edge_line.empty()) {
        ok = false;
      } else {
        const auto tokens = split_tokens(edge_line);
        const RigidTransform estimate = parse_transform(tokens, 3);
        if (rotation_error(estimate, p.query.true_relative) > 0.5 * kDeg ||
            translation_error(estimate, p.query.true_relative) > 0.05)
          ok = false;
        if (tokens[1] != std::to_string(p.query.target_submap)) ok = false;
      }
    } else if (r.out.find("edge") != std::string::npos) {
      ok = false;
    }

    for (int s = 0; s < 7; ++s) {
      const std::string key = std::string("time.") + stage_names[s];
      if (kv.count(key)) stage_samples[s].push_back(std::stod(kv.at(key)));
    }
    if (!ok) {
      ++failures;
      why << " " << p.stem << "(verdict " << verdict << ", exit "
          << r.exit_code << ")";
    }
  }

  for (int s = 0; s < 7; ++s) {
    const auto& v = stage_samples[s];
    const double n = static_cast<double>(v.size());
    const double mean =
        v.empty() ? 0.0 : std::accumulate(v.begin(), v.end(), 0.0) / n;
    double var = 0.0;
    for (const double x : v) var += (x - mean) * (x - mean);
    outcome.stage_stats.push_back(
        {stage_names[s], {mean, v.empty() ? 0.0 : std::sqrt(var / n)}});
  }

  c.seconds = now_seconds() - t0;
  c.pass = failures == 0 && c.seconds < 300.0;
  std::ostringstream d;
  d << (20 - failures) << "/20 queries handled correctly";
  if (failures > 0) d << ";" << why.str();
  c.detail = d.str();
  return outcome;
}

// ---------------------------------------------------------------- criterion 8

Criterion criterion_merge_consistency(const SimWorld& world) {
  Criterion c{8, "pose-graph merge keeps sessions rigid", false, "", 0.0};
  const double t0 = now_seconds();

  PoseGraph prior;
  prior.session = "prior";
  for (std::size_t i = 0; i < world.root_world.size(); ++i) {
    GraphNode node;
    node.id = static_cast<std::int64_t>(i);
    node.kind = NodeKind::root;
    node.pose = world.root_world[i];
    node.submap_id = static_cast<std::int64_t>(i);
    prior = add_node(std::move(prior), node);
  }
  for (std::size_t i = 0; i + 1 < world.root_world.size(); ++i) {
    GraphEdge e;
    e.from = static_cast<std::int64_t>(i);
    e.to = static_cast<std::int64_t>(i + 1);
    e.relative = compose(world.root_world[i].inverse(), world.root_world[i + 1]);
    prior = add_edge(std::move(prior), e);
  }

  PoseGraph revisit;
  revisit.session = "wake";
  GraphNode wake_root;
  wake_root.id = 0;
  wake_root.kind = NodeKind::root;
  wake_root.pose = RigidTransform::identity();
  wake_root.submap_id = 0;
  revisit = add_node(std::move(revisit), wake_root);
  GraphNode wake_child;
  wake_child.id = 1;
  wake_child.kind = NodeKind::child;
  wake_child.pose = sensor_pose(0.4, -0.2, 0.15, 0.0);
  revisit = add_node(std::move(revisit), wake_child);
  GraphEdge odo;
  odo.from = 0;
  odo.to = 1;
  odo.relative = wake_child.pose;
  revisit = add_edge(std::move(revisit), odo);

  // The verified revisit edge, straight from the pipeline.
  const int target = 3;
  const SimQuery q = make_query(world, QueryKind::genuine, target, 8800);
  const auto input = std::filesystem::temp_directory_path() /
                     ("reloc_acc_merge_" + std::to_string(::getpid()));
  std::filesystem::remove_all(input);
  std::filesystem::create_directories(input / "in");
  write_database_inputs(world, input / "in");
  build_database(input / "in", input / "db", tuned_config());
  const SubmapDatabase db = SubmapDatabase::load(input / "db");
  const auto provider = make_color_embedding_provider(64);
  const SvcModel stub = passthrough_model();
  const RelocalisationReport report =
      relocalise(q.cloud, q.image, db, sim_camera(), stub, *provider,
                 tuned_config(), 42, 0);
  std::filesystem::remove_all(input);
  if (!report.registration_ok || report.candidates.front().id != target) {
    c.detail = "pipeline did not register the revisit";
    c.seconds = now_seconds() - t0;
    return c;
  }

  GraphEdge verified;
  verified.from = target;
  verified.to = 0;
  verified.relative = report.icp.transform;
  const PoseGraph merged = merge(prior, revisit, verified);

  double worst_prior = 0.0, worst_wake = 0.0;
  for (std::size_t i = 0; i + 1 < world.root_world.size(); ++i) {
    const RigidTransform before =
        compose(prior.node(static_cast<std::int64_t>(i)).pose.inverse(),
                prior.node(static_cast<std::int64_t>(i + 1)).pose);
    const RigidTransform after =
        compose(merged.node(static_cast<std::int64_t>(i)).pose.inverse(),
                merged.node(static_cast<std::int64_t>(i + 1)).pose);
    worst_prior = std::max(
        {worst_prior, rotation_error(before, after),
         translation_error(before, after)});
  }
  const std::int64_t offset = prior.max_node_id() + 1;
  const RigidTransform wake_before = wake_child.pose;
  const RigidTransform wake_after = compose(
      merged.node(offset + 0).pose.inverse(), merged.node(offset + 1).pose);
  worst_wake = std::max(rotation_error(wake_before, wake_after),
                        translation_error(wake_before, wake_after));

  const RigidTransform truth_root =
      compose(world.root_world[target], q.true_relative);
  const double root_rot =
      rotation_error(merged.node(offset + 0).pose, truth_root);
  const double root_trans =
      translation_error(merged.node(offset + 0).pose, truth_root);

  c.seconds = now_seconds() - t0;
  c.pass = worst_prior <= 1e-9 && worst_wake <= 1e-9 &&
           root_rot <= 0.5 * kDeg && root_trans <= 0.05;
  std::ostringstream d;
  d << "intra-session drift prior " << worst_prior << ", wake " << worst_wake
    << "; revisit root off truth by " << root_rot / kDeg << " deg / "
    << root_trans << " m";
  c.detail = d.str();
  return c;
}

// ---------------------------------------------------------------- criterion 9

Criterion criterion_scan_context(const SimWorld& world) {
  Criterion c{9, "scan-context yaw invariance and retrieval", false, "", 0.0};
  const double t0 = now_seconds();
  std::mt19937_64 rng(909);
  std::uniform_real_distribution<double> u(-1.0, 1.0);

  double worst_invariance = 0.0;
  for (int t = 0; t < 20; ++t) {
    PointCloud cloud;
    const int n = 400 + static_cast<int>(rng() % 400);
    cloud.points.reserve(n);
    for (int i = 0; i < n; ++i)
      cloud.points.push_back(
          Eigen::Vector3d(12 * u(rng), 12 * u(rng), 2.0 + u(rng)));
    const int sectors = 60;
    const int shift = 1 + static_cast<int>(rng() % (sectors - 1));
    const PointCloud rotated =
        apply(RigidTransform::yaw(2.0 * kPi * shift / sectors), cloud);
    worst_invariance = std::max(
        worst_invariance,
        scan_context_distance(extract_scan_context(cloud, 15.0),
                              extract_scan_context(rotated, 15.0)));
  }

  int hits = 0;
  std::vector<ScanContextDescriptor> database;
  for (std::size_t i = 0; i < world.scenes.size(); ++i)
    database.push_back(extract_scan_context(
        sample_cloud(world.scenes[i], world.capture_poses[i]), 15.0));
  for (std::size_t i = 0; i < world.scenes.size(); ++i) {
    const RigidTransform yawed =
        compose(world.capture_poses[i], RigidTransform::yaw(kPi * u(rng)));
    const ScanContextDescriptor probe =
        extract_scan_context(sample_cloud(world.scenes[i], yawed), 15.0);
    int best = -1;
    double best_distance = std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < database.size(); ++j) {
      const double dist = scan_context_distance(probe, database[j]);
      if (dist < best_distance) {
        best_distance = dist;
        best = static_cast<int>(j);
      }
    }
    if (best == static_cast<int>(i)) ++hits;
  }
  const double recall =
      static_cast<double>(hits) / static_cast<double>(world.scenes.size());

  c.seconds = now_seconds() - t0;
  c.pass = worst_invariance <= 1e-9 && recall >= 0.9;
  std::ostringstream d;
  d << "pure-yaw distance worst " << worst_invariance << ", recall@1 "
    << recall << " over " << world.scenes.size() << " yaw-rotated revisits";
  c.detail = d.str();
  return c;
}

// --------------------------------------------------------------- criterion 10

Criterion criterion_smo_correctness() {
  Criterion c{10, "SMO optimality and order invariance", false, "", 0.0};
  const double t0 = now_seconds();
  std::mt19937_64 rng(1010);
  std::normal_distribution<double> g(0.0, 1.0);

  const auto cluster = [&](double mx, double my, double sx, double sy, int n,
                           Verdict label, std::vector<SvcSample>& out) {
    for (int i = 0; i < n; ++i) {
      const double x = std::clamp(mx + sx * g(rng), 0.0, 1.0);
      const double y = std::clamp(my + sy * g(rng), 0.0, 1.0);
      out.push_back({Eigen::Vector2d(x, y), label});
    }
  };
  std::vector<SvcSample> samples;
  cluster(0.82, 0.90, 0.05, 0.04, 240, Verdict::matched, samples);
  cluster(0.65, 0.40, 0.06, 0.07, 230, Verdict::mismatched, samples);
  cluster(0.25, 0.15, 0.07, 0.08, 230, Verdict::unmatched, samples);

  const SvcModel model = svc_train(samples);

  int kkt_violations = 0;
  int checked = 0;
  for (const auto& svm : model.classifiers) {
    std::map<std::pair<double, double>, double> sv_alpha;
    for (std::size_t i = 0; i < svm.support_vectors.size(); ++i) {
      const auto key = std::make_pair(svm.support_vectors[i].x(),
                                      svm.support_vectors[i].y());
      sv_alpha[key] += svm.coeffs[i];
    }
    for (const auto& s : samples) {
      if (s.label != svm.positive && s.label != svm.negative) continue;
      const double y = s.label == svm.positive ? 1.0 : -1.0;
      const auto it = sv_alpha.find({s.x.x(), s.x.y()});
      const double alpha =
          it == sv_alpha.end() ? 0.0 : it->second * y;  // coeff = alpha * y
      const double margin =
          y * svm.decision(s.x, model.gamma, model.coef0, model.degree);
      ++checked;
      if (alpha <= 1e-9) {
        if (margin < 1.0 - 1e-3) ++kkt_violations;
      } else if (alpha >= model.c - 1e-9) {
        if (margin > 1.0 + 1e-3) ++kkt_violations;
      } else {
        if (std::abs(margin - 1.0) > 1e-3) ++kkt_violations;
      }
    }
  }

  std::vector<SvcSample> shuffled = samples;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const SvcModel remodel = svc_train(shuffled);
  int prediction_diffs = 0;
  for (int ix = 0; ix <= 40; ++ix)
    for (int iy = 0; iy <= 40; ++iy) {
      const Eigen::Vector2d x(ix / 40.0, iy / 40.0);
      if (svc_predict(model, x) != svc_predict(remodel, x)) ++prediction_diffs;
    }

  c.seconds = now_seconds() - t0;
  c.pass = kkt_violations == 0 && checked > 0 && prediction_diffs == 0;
  std::ostringstream d;
  d << "KKT violations " << kkt_violations << " over " << checked
    << " sample conditions, shuffled-retrain prediction differences "
    << prediction_diffs << " over 1681 probes";
  c.detail = d.str();
  return c;
}

}  // namespace

int main() {
  const auto scratch = std::filesystem::temp_directory_path() /
                       ("reloc_acceptance_" + std::to_string(::getpid()));
  std::filesystem::remove_all(scratch);
  std::filesystem::create_directories(scratch);

  const SimWorld world = make_world(20, 777);

  std::vector<Criterion> results;
  std::vector<std::pair<std::string, std::pair<double, double>>> stage_stats;
  std::vector<SvcSample> train_samples;

  const auto run = [&](Criterion (*fn)()) { results.push_back(fn()); };
  run(criterion_geometry_oracles);
  results.push_back(criterion_similarity_fidelity(world));
  run(criterion_icp_convergence);
  run(criterion_ransac_gap);
  results.push_back(criterion_verification_separability(world, train_samples));
  results.push_back(criterion_yaw_degradation(world));
  {
    WakeUpOutcome wake = criterion_wake_up(world, scratch, train_samples);
    results.push_back(wake.criterion);
    stage_stats = wake.stage_stats;
  }
  results.push_back(criterion_merge_consistency(world));
  results.push_back(criterion_scan_context(world));
  run(criterion_smo_correctness);

  bool all_pass = true;
  for (const auto& r : results) {
    std::printf("criterion %d: %s | %s | %s (%.1f s)\n", r.id,
                r.pass ? "PASS" : "FAIL", r.label.c_str(), r.detail.c_str(),
                r.seconds);
    all_pass = all_pass && r.pass;
  }
  if (!stage_stats.empty()) {
    std::printf("runtime per re-localisation request (seconds):\n");
    for (const auto& [name, stat] : stage_stats)
      std::printf("  %-20s %.4f +/- %.4f\n", name.c_str(), stat.first,
                  stat.second);
  }
  std::printf("acceptance: %d/%d criteria passed\n",
              static_cast<int>(std::count_if(results.begin(), results.end(),
                                             [](const Criterion& r) {
                                               return r.pass;
                                             })),
              static_cast<int>(results.size()));

  std::filesystem::remove_all(scratch);
  return all_pass ? 0 : 1;
}
