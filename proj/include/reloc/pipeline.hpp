#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "reloc/camera.hpp"
#include "reloc/config.hpp"
#include "reloc/database.hpp"
#include "reloc/geometry.hpp"
#include "reloc/image.hpp"
#include "reloc/provider.hpp"
#include "reloc/registration.hpp"
#include "reloc/svc.hpp"
#include "reloc/verify.hpp"

namespace reloc {

/// Per-stage wall-clock seconds for one re-localisation request, in the
/// layout of the runtime table: retrieval-side description and localisation,
/// then the four verification stages, then the total.
struct StageTimes {
  double description = 0.0;          // query keypoints + global descriptor
  double localisation = 0.0;         // retrieval + matching + RANSAC + ICP
  double superpixel = 0.0;
  double feature_description = 0.0;
  double mcs = 0.0;
  double verification = 0.0;
  double total = 0.0;

  /// (name, seconds) rows in report order, total last.
  std::vector<std::pair<std::string, double>> rows() const;
};

struct RankedCandidate {
  std::int64_t id = -1;
  double distance = 0.0;
};

struct RelocalisationReport {
  std::int64_t query_id = 0;
  std::vector<RankedCandidate> candidates;  // ascending distance
  bool registration_ok = false;  // RANSAC+ICP produced a pose estimate
  RegistrationResult ransac;
  RegistrationResult icp;
  VerificationFeatures features;
  Verdict verdict = Verdict::unmatched;
  bool accepted = false;  // verdict == matched
  StageTimes times;
};

struct BuildDbStats {
  int record_count = 0;
  std::vector<std::string> warnings;
};

/// Reads `poses.txt` (`session <tag>` once, then `submap <id> <7 floats>`
/// per record) and one `submap_<id>.r3pc` cloud per listed id from
/// `input_dir`, computes descriptors with the configured provider settings,
/// and writes the database to `db_dir`. Missing manifest or zero entries
/// produce an empty database plus a warning. Unreadable or corrupt inputs
/// are collected into one error listing every offending file.
BuildDbStats build_database(const std::filesystem::path& input_dir,
                            const std::filesystem::path& db_dir,
                            const PipelineConfig& config);

/// One re-localisation request: retrieval, keypoint matching, RANSAC, ICP,
/// then cross-modal verification of the top candidate against the query
/// image. Registration failure (no consensus, no overlap, too few matches)
/// downgrades the request to an unverified rejection instead of an error.
/// Throws EmptyDatabase when the database has no records.
RelocalisationReport relocalise(const PointCloud& query_cloud,
                                const Image& query_image,
                                const SubmapDatabase& db,
                                const CameraModel& camera, const SvcModel& svc,
                                const FeatureProvider& provider,
                                const PipelineConfig& config,
                                std::uint64_t seed, std::int64_t query_id);

/// The accepted-edge line for a report: `edge <candidate> <query> <pose>`,
/// pose-graph syntax, hex floats. Only valid when report.accepted.
std::string accepted_edge_line(const RelocalisationReport& report);

struct TrainSvcResult {
  SvcModel model;
  double training_accuracy = 0.0;
  int sample_count = 0;
};

/// `<mcs> <nu> <label>` per line, `#` comments; labels by name.
std::vector<SvcSample> load_svc_samples(const std::filesystem::path& path);
void save_svc_samples(const std::filesystem::path& path,
                      const std::vector<SvcSample>& samples);

TrainSvcResult train_svc_from_samples(const std::vector<SvcSample>& samples);

/// Ground truth for one evaluation query.
struct QuerySpec {
  std::int64_t id = 0;
  Verdict expected = Verdict::unmatched;
  RigidTransform true_pose;  // world frame of the query submap root
  std::string cloud_file;
  std::string image_file;
};

/// `query <id> <expected verdict> <7 pose floats> <cloud> <image>` lines.
std::vector<QuerySpec> load_query_manifest(const std::filesystem::path& path);
void save_query_manifest(const std::filesystem::path& path,
                         const std::vector<QuerySpec>& queries);

struct EvaluationReport {
  int query_count = 0;
  std::vector<double> recall;  // index k-1 = Recall@k over revisit queries
  double success_rate = 0.0;   // pose within tolerances, revisit queries
  int confusion[3][3] = {};    // [expected][predicted], verdict order
  double precision[3] = {};    // per predicted class; empty class = 1
  double class_recall[3] = {};
  StageTimes mean_times;
  StageTimes std_times;
  std::vector<RelocalisationReport> reports;  // per query, manifest order
  std::vector<QuerySpec> queries;
};

/// Runs every manifest query through relocalise and scores the outcome.
/// Recall@K and the success rate are computed over queries whose expected
/// verdict is not `unmatched` (the place genuinely exists in the database);
/// verification precision/recall cover all queries.
EvaluationReport evaluate(const SubmapDatabase& db,
                          const std::filesystem::path& queries_dir,
                          const CameraModel& camera, const SvcModel& svc,
                          const FeatureProvider& provider,
                          const PipelineConfig& config, std::uint64_t seed);

/// `k,recall` rows.
void write_recall_csv(const EvaluationReport& report,
                      const std::filesystem::path& path);
/// `query,mcs,alignment_ratio,expected,predicted` rows.
void write_scatter_csv(const EvaluationReport& report,
                       const std::filesystem::path& path);

}  // namespace reloc
