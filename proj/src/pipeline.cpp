#include "reloc/pipeline.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <map>
#include <sstream>

#include "reloc/descriptors.hpp"
#include "reloc/errors.hpp"
#include "reloc/io.hpp"

namespace reloc {
namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::int64_t parse_id(const std::string& token, std::size_t line) {
  try {
    std::size_t used = 0;
    const std::int64_t v = std::stoll(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return v;
  } catch (const std::exception&) {
    throw FormatError::at_line("bad id '" + token + "'", line);
  }
}

double parse_number(const std::string& token, std::size_t line) {
  const char* begin = token.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (token.empty() || end != begin + token.size() || !std::isfinite(v))
    throw FormatError::at_line("bad number '" + token + "'", line);
  return v;
}

std::array<double, 7> as_array(const StageTimes& t) {
  return {t.description, t.localisation,      t.superpixel, t.feature_description,
          t.mcs,         t.verification, t.total};
}

StageTimes from_array(const std::array<double, 7>& a) {
  StageTimes t;
  t.description = a[0];
  t.localisation = a[1];
  t.superpixel = a[2];
  t.feature_description = a[3];
  t.mcs = a[4];
  t.verification = a[5];
  t.total = a[6];
  return t;
}

}  // namespace

std::vector<std::pair<std::string, double>> StageTimes::rows() const {
  return {{"description", description},
          {"localisation", localisation},
          {"superpixel", superpixel},
          {"feature_description", feature_description},
          {"mcs", mcs},
          {"verification", verification},
          {"total", total}};
}

BuildDbStats build_database(const std::filesystem::path& input_dir,
                            const std::filesystem::path& db_dir,
                            const PipelineConfig& config) {
  validate_config(config);
  BuildDbStats stats;
  SubmapDatabase db;

  const std::filesystem::path manifest = input_dir / "poses.txt";
  std::string session;
  std::map<std::int64_t, RigidTransform> poses;
  if (!std::filesystem::exists(manifest)) {
    stats.warnings.push_back("no poses.txt in " + input_dir.string() +
                             "; wrote an empty database");
  } else {
    std::istringstream lines(read_text_file(manifest));
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(lines, line)) {
      ++line_no;
      const auto tokens = split_tokens(line);
      if (tokens.empty() || tokens[0][0] == '#') continue;
      if (tokens[0] == "session") {
        if (tokens.size() != 2)
          throw FormatError::at_line("session line needs one tag", line_no);
        session = tokens[1];
        continue;
      }
      if (tokens[0] != "submap" || tokens.size() != 9)
        throw FormatError::at_line(
            "expected 'submap <id> <7 pose floats>'", line_no);
      const std::int64_t id = parse_id(tokens[1], line_no);
      if (poses.count(id))
        throw FormatError::at_line(
            "duplicate submap id " + std::to_string(id), line_no);
      poses[id] = parse_transform(tokens, 2, line_no);
    }
    if (poses.empty())
      stats.warnings.push_back("poses.txt lists no submaps; wrote an empty database");
  }

  std::vector<std::string> failures;
  for (const auto& [id, pose] : poses) {
    const std::filesystem::path cloud_path =
        input_dir / ("submap_" + std::to_string(id) + ".r3pc");
    try {
      const PointCloud cloud = load_cloud(cloud_path);
      SubmapRecord rec;
      rec.id = id;
      rec.session = session;
      rec.root_pose = pose;
      rec.keypoints = extract_local_keypoints(cloud, config.keypoint_budget,
                                              config.keypoint_radius);
      rec.global = compute_global_descriptor(cloud, rec.keypoints, config.gem_power);
      rec.cloud_ref = std::filesystem::weakly_canonical(cloud_path).string();
      db.insert(std::move(rec));
    } catch (const Error& e) {
      failures.push_back(cloud_path.string() + ": " + e.what());
    } catch (const std::exception& e) {
      failures.push_back(cloud_path.string() + ": " + e.what());
    }
  }
  if (!failures.empty()) {
    std::string msg = "failed to ingest " + std::to_string(failures.size()) +
                      " submap(s):";
    for (const auto& f : failures) msg += "\n  " + f;
    throw Error(msg);
  }

  db.save(db_dir);
  stats.record_count = static_cast<int>(db.size());
  return stats;
}

RelocalisationReport relocalise(const PointCloud& query_cloud,
                                const Image& query_image,
                                const SubmapDatabase& db,
                                const CameraModel& camera, const SvcModel& svc,
                                const FeatureProvider& provider,
                                const PipelineConfig& config,
                                std::uint64_t seed, std::int64_t query_id) {
  validate_config(config);
  if (db.empty()) throw EmptyDatabase("re-localisation against an empty database");

  RelocalisationReport report;
  report.query_id = query_id;
  const auto t_total = Clock::now();

  auto stage = Clock::now();
  const auto query_kps = extract_local_keypoints(
      query_cloud, config.keypoint_budget, config.keypoint_radius);
  const GlobalDescriptor query_global =
      compute_global_descriptor(query_cloud, query_kps, config.gem_power);
  report.times.description = seconds_since(stage);

  stage = Clock::now();
  const auto ranked =
      db.retrieve_topk(query_global, std::max(1, config.retrieval_k));
  report.candidates.reserve(ranked.size());
  for (const auto& [id, dist] : ranked) report.candidates.push_back({id, dist});

  const SubmapRecord* top = db.find(ranked.front().first);
  if (top->cloud_ref.empty())
    throw Error("candidate record " + std::to_string(top->id) +
                " has no cloud reference");
  const PointCloud candidate_cloud = load_cloud(top->cloud_ref);

  std::vector<Eigen::Vector3d, Eigen::aligned_allocator<Eigen::Vector3d>> q_pts,
      c_pts;
  q_pts.reserve(query_kps.size());
  for (const auto& kp : query_kps) q_pts.push_back(kp.position);
  c_pts.reserve(top->keypoints.size());
  for (const auto& kp : top->keypoints) c_pts.push_back(kp.position);

  try {
    const CorrespondenceSet corr =
        match_keypoints(query_kps, top->keypoints, config.lowe_ratio);
    report.ransac =
        ransac_register(corr, q_pts, c_pts, config.inlier_threshold,
                        config.ransac_max_iterations, seed);
    report.icp = icp_refine(query_cloud, candidate_cloud,
                            report.ransac.transform, config.icp_resolution,
                            config.icp_max_corr_dist, config.icp_max_iterations);
    report.registration_ok = true;
  } catch (const InsufficientData&) {
  } catch (const NoConsensus&) {
  } catch (const DegenerateConfiguration&) {
  } catch (const NoOverlap&) {
  }
  report.times.localisation = seconds_since(stage);

  if (report.registration_ok) {
    VerifyParams params;
    params.target_superpixels = config.target_superpixels;
    params.compactness = config.compactness;
    params.min_depth = config.min_depth;
    params.top_k = config.top_k;
    VerifyTimings vt;
    const VerifyResult vr =
        verify(query_image, candidate_cloud, report.icp.transform.inverse(),
               camera, provider, svc, params, &vt);
    report.verdict = vr.verdict;
    report.features = vr.features;
    report.times.superpixel = vt.superpixel;
    report.times.feature_description = vt.feature_description;
    report.times.mcs = vt.mcs;
    report.times.verification = vt.verification;
  }

  report.accepted = report.verdict == Verdict::matched;
  report.times.total = seconds_since(t_total);
  return report;
}

std::string accepted_edge_line(const RelocalisationReport& report) {
  if (!report.accepted)
    throw InvalidArgument("no edge for a rejected request");
  std::ostringstream out;
  out << "edge " << report.candidates.front().id << ' ' << report.query_id
      << ' ' << format_transform(report.icp.transform);
  return out.str();
}

std::vector<SvcSample> load_svc_samples(const std::filesystem::path& path) {
  std::vector<SvcSample> samples;
  std::istringstream lines(read_text_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const auto tokens = split_tokens(line);
    if (tokens.empty() || tokens[0][0] == '#') continue;
    if (tokens.size() != 3)
      throw FormatError::at_line("expected '<mcs> <nu> <label>'", line_no);
    SvcSample s;
    s.x = Eigen::Vector2d(parse_number(tokens[0], line_no),
                          parse_number(tokens[1], line_no));
    try {
      s.label = verdict_from_name(tokens[2]);
    } catch (const Error&) {
      throw FormatError::at_line("unknown label '" + tokens[2] + "'", line_no);
    }
    samples.push_back(std::move(s));
  }
  return samples;
}

void save_svc_samples(const std::filesystem::path& path,
                      const std::vector<SvcSample>& samples) {
  std::ostringstream out;
  for (const auto& s : samples)
    out << to_hex(s.x.x()) << ' ' << to_hex(s.x.y()) << ' '
        << verdict_name(s.label) << '\n';
  write_text_file(path, out.str());
}

TrainSvcResult train_svc_from_samples(const std::vector<SvcSample>& samples) {
  TrainSvcResult result;
  result.model = svc_train(samples);
  result.sample_count = static_cast<int>(samples.size());
  int correct = 0;
  for (const auto& s : samples)
    if (svc_predict(result.model, s.x) == s.label) ++correct;
  result.training_accuracy =
      samples.empty() ? 0.0 : static_cast<double>(correct) / samples.size();
  return result;
}

std::vector<QuerySpec> load_query_manifest(const std::filesystem::path& path) {
  std::vector<QuerySpec> queries;
  std::istringstream lines(read_text_file(path));
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const auto tokens = split_tokens(line);
    if (tokens.empty() || tokens[0][0] == '#') continue;
    if (tokens[0] != "query" || tokens.size() != 12)
      throw FormatError::at_line(
          "expected 'query <id> <verdict> <7 pose floats> <cloud> <image>'",
          line_no);
    QuerySpec q;
    q.id = parse_id(tokens[1], line_no);
    try {
      q.expected = verdict_from_name(tokens[2]);
    } catch (const Error&) {
      throw FormatError::at_line("unknown verdict '" + tokens[2] + "'", line_no);
    }
    q.true_pose = parse_transform(tokens, 3, line_no);
    q.cloud_file = tokens[10];
    q.image_file = tokens[11];
    queries.push_back(std::move(q));
  }
  return queries;
}

void save_query_manifest(const std::filesystem::path& path,
                         const std::vector<QuerySpec>& queries) {
  std::ostringstream out;
  for (const auto& q : queries)
    out << "query " << q.id << ' ' << verdict_name(q.expected) << ' '
        << format_transform(q.true_pose) << ' ' << q.cloud_file << ' '
        << q.image_file << '\n';
  write_text_file(path, out.str());
}

EvaluationReport evaluate(const SubmapDatabase& db,
                          const std::filesystem::path& queries_dir,
                          const CameraModel& camera, const SvcModel& svc,
                          const FeatureProvider& provider,
                          const PipelineConfig& config, std::uint64_t seed) {
  const auto queries = load_query_manifest(queries_dir / "queries.txt");
  if (queries.empty())
    throw InvalidArgument("query manifest lists no queries");

  PipelineConfig cfg = config;
  cfg.retrieval_k = std::max(cfg.retrieval_k, cfg.recall_k_max);

  EvaluationReport report;
  report.queries = queries;
  report.query_count = static_cast<int>(queries.size());

  for (const auto& q : queries) {
    const PointCloud cloud = load_cloud(queries_dir / q.cloud_file);
    const Image image = load_ppm(queries_dir / q.image_file);
    report.reports.push_back(
        relocalise(cloud, image, db, camera, svc, provider, cfg, seed, q.id));
  }

  std::vector<std::vector<std::int64_t>> predictions;
  std::vector<Eigen::Vector3d, Eigen::aligned_allocator<Eigen::Vector3d>>
      query_positions;
  std::map<std::int64_t, Eigen::Vector3d> submap_positions;
  for (const auto& rec : db.records())
    submap_positions[rec.id] = rec.root_pose.translation;

  int revisit_total = 0;
  int success_total = 0;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    const auto& q = queries[i];
    const auto& r = report.reports[i];
    report.confusion[static_cast<int>(q.expected)][static_cast<int>(r.verdict)]++;
    if (q.expected == Verdict::unmatched) continue;
    ++revisit_total;
    std::vector<std::int64_t> ids;
    for (const auto& c : r.candidates) ids.push_back(c.id);
    predictions.push_back(std::move(ids));
    query_positions.push_back(q.true_pose.translation);
    if (r.registration_ok && !r.candidates.empty()) {
      const SubmapRecord* cand = db.find(r.candidates.front().id);
      const RigidTransform truth =
          compose(cand->root_pose.inverse(), q.true_pose);
      if (registration_success(r.icp.transform, truth,
                               cfg.success_rot_tol_deg,
                               cfg.success_trans_tol_m))
        ++success_total;
    }
  }

  if (revisit_total > 0) {
    report.recall = recall_at_k(predictions, query_positions, submap_positions,
                                cfg.recall_k_max, cfg.revisit_radius);
    report.success_rate =
        static_cast<double>(success_total) / revisit_total;
  } else {
    report.recall.assign(cfg.recall_k_max, 0.0);
  }

  for (int c = 0; c < 3; ++c) {
    int col = 0, row = 0;
    for (int e = 0; e < 3; ++e) {
      col += report.confusion[e][c];
      row += report.confusion[c][e];
    }
    report.precision[c] =
        col == 0 ? 1.0 : static_cast<double>(report.confusion[c][c]) / col;
    report.class_recall[c] =
        row == 0 ? 1.0 : static_cast<double>(report.confusion[c][c]) / row;
  }

  std::array<double, 7> mean{}, var{};
  for (const auto& r : report.reports) {
    const auto v = as_array(r.times);
    for (int i = 0; i < 7; ++i) mean[i] += v[i];
  }
  for (int i = 0; i < 7; ++i) mean[i] /= report.reports.size();
  for (const auto& r : report.reports) {
    const auto v = as_array(r.times);
    for (int i = 0; i < 7; ++i) var[i] += (v[i] - mean[i]) * (v[i] - mean[i]);
  }
  std::array<double, 7> stdev{};
  for (int i = 0; i < 7; ++i)
    stdev[i] = std::sqrt(var[i] / report.reports.size());
  report.mean_times = from_array(mean);
  report.std_times = from_array(stdev);
  return report;
}

void write_recall_csv(const EvaluationReport& report,
                      const std::filesystem::path& path) {
  std::ostringstream out;
  out << "k,recall\n";
  for (std::size_t k = 0; k < report.recall.size(); ++k)
    out << (k + 1) << ',' << report.recall[k] << '\n';
  write_text_file(path, out.str());
}

void write_scatter_csv(const EvaluationReport& report,
                       const std::filesystem::path& path) {
  std::ostringstream out;
  out << "query,mcs,alignment_ratio,expected,predicted\n";
  for (std::size_t i = 0; i < report.reports.size(); ++i) {
    const auto& r = report.reports[i];
    out << r.query_id << ',' << r.features.mcs << ','
        << r.features.alignment_ratio << ','
        << verdict_name(report.queries[i].expected) << ','
        << verdict_name(r.verdict) << '\n';
  }
  write_text_file(path, out.str());
}

}  // namespace reloc
