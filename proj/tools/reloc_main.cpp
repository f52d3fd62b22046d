#include <CLI11.hpp>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <json.hpp>
#include <string>

#include "reloc/camera.hpp"
#include "reloc/config.hpp"
#include "reloc/database.hpp"
#include "reloc/errors.hpp"
#include "reloc/image.hpp"
#include "reloc/io.hpp"
#include "reloc/pipeline.hpp"
#include "reloc/provider.hpp"
#include "reloc/svc.hpp"

namespace {

using reloc::PipelineConfig;

/// Collects report rows once and renders them either as `key: value` lines
/// or as one JSON body with the same keys.
class Emitter {
 public:
  explicit Emitter(bool as_json) : json_(as_json) {}

  void kv(const std::string& key, std::int64_t v) {
    if (json_)
      body_[key] = v;
    else
      std::cout << key << ": " << v << "\n";
  }
  void kv(const std::string& key, int v) { kv(key, static_cast<std::int64_t>(v)); }
  void kv(const std::string& key, double v) {
    if (json_) {
      body_[key] = v;
    } else {
      char buf[64];
      std::snprintf(buf, sizeof buf, "%.10g", v);
      std::cout << key << ": " << buf << "\n";
    }
  }
  void kv(const std::string& key, bool v) {
    if (json_)
      body_[key] = v;
    else
      std::cout << key << ": " << (v ? "true" : "false") << "\n";
  }
  void kv(const std::string& key, const std::string& v) {
    if (json_)
      body_[key] = v;
    else
      std::cout << key << ": " << v << "\n";
  }

  /// A line reproduced verbatim in text mode (pose-graph edge syntax).
  void raw(const std::string& key, const std::string& line) {
    if (json_)
      body_[key] = line;
    else
      std::cout << line << "\n";
  }

  void flush() {
    if (json_) std::cout << body_.dump(2) << "\n";
  }

 private:
  bool json_;
  nlohmann::ordered_json body_ = nlohmann::ordered_json::object();
};

PipelineConfig read_config(const std::string& path) {
  PipelineConfig cfg;
  if (!path.empty()) cfg = reloc::load_config(path);
  reloc::validate_config(cfg);
  return cfg;
}

std::shared_ptr<reloc::FeatureProvider> make_provider(const PipelineConfig& cfg) {
  return reloc::make_color_embedding_provider(cfg.provider_dim);
}

void emit_times(Emitter& out, const reloc::StageTimes& times) {
  for (const auto& [name, seconds] : times.rows())
    out.kv("time." + name, seconds);
}

int run_build_db(const std::string& input, const std::string& db,
                 const std::string& config, Emitter& out) {
  const PipelineConfig cfg = read_config(config);
  const reloc::BuildDbStats stats = reloc::build_database(input, db, cfg);
  out.kv("records", stats.record_count);
  out.kv("database", db);
  for (std::size_t i = 0; i < stats.warnings.size(); ++i)
    out.kv("warning." + std::to_string(i), stats.warnings[i]);
  out.flush();
  return 0;
}

int run_relocalise(const std::string& db_path, const std::string& cloud_path,
                   const std::string& image_path, const std::string& calib,
                   const std::string& svc_path, const std::string& config,
                   std::uint64_t seed, std::int64_t query_id, Emitter& out) {
  const PipelineConfig cfg = read_config(config);
  const reloc::SubmapDatabase db = reloc::SubmapDatabase::load(db_path);
  const reloc::PointCloud cloud = reloc::load_cloud(cloud_path);
  const reloc::Image image = reloc::load_ppm(image_path);
  const reloc::CameraModel camera = reloc::load_camera_calibration(calib);
  const reloc::SvcModel svc = reloc::load_svc(svc_path);
  const auto provider = make_provider(cfg);

  const reloc::RelocalisationReport report = reloc::relocalise(
      cloud, image, db, camera, svc, *provider, cfg, seed, query_id);

  out.kv("query", report.query_id);
  out.kv("candidates", static_cast<std::int64_t>(report.candidates.size()));
  for (std::size_t i = 0; i < report.candidates.size(); ++i) {
    const std::string prefix = "candidate." + std::to_string(i);
    out.kv(prefix + ".id", report.candidates[i].id);
    out.kv(prefix + ".distance", report.candidates[i].distance);
  }
  out.kv("registration", std::string(report.registration_ok ? "ok" : "failed"));
  if (report.registration_ok) {
    out.kv("ransac.inliers", report.ransac.inlier_count);
    out.kv("ransac.rms", report.ransac.inlier_rms);
    out.kv("icp.iterations", report.icp.icp_iterations);
    out.kv("icp.converged", report.icp.converged);
    out.kv("icp.rms", report.icp.inlier_rms);
    out.kv("mcs", report.features.mcs);
    out.kv("alignment_ratio", report.features.alignment_ratio);
    out.kv("pairs", report.features.pair_count);
    out.kv("mismatches", report.features.mismatch_count);
  }
  out.kv("verdict", reloc::verdict_name(report.verdict));
  out.kv("accepted", report.accepted);
  emit_times(out, report.times);
  if (report.accepted) out.raw("edge", reloc::accepted_edge_line(report));
  out.flush();
  return report.accepted ? 0 : 1;
}

int run_train_svc(const std::string& samples_path, const std::string& out_path,
                  Emitter& out) {
  const auto samples = reloc::load_svc_samples(samples_path);
  const reloc::TrainSvcResult result = reloc::train_svc_from_samples(samples);
  reloc::save_svc(out_path, result.model);
  out.kv("samples", result.sample_count);
  out.kv("accuracy", result.training_accuracy);
  out.kv("model", out_path);
  out.flush();
  return 0;
}

int run_evaluate(const std::string& db_path, const std::string& queries,
                 const std::string& calib, const std::string& svc_path,
                 const std::string& config, std::uint64_t seed,
                 const std::string& csv_dir, Emitter& out) {
  const PipelineConfig cfg = read_config(config);
  const reloc::SubmapDatabase db = reloc::SubmapDatabase::load(db_path);
  const reloc::CameraModel camera = reloc::load_camera_calibration(calib);
  const reloc::SvcModel svc = reloc::load_svc(svc_path);
  const auto provider = make_provider(cfg);

  const reloc::EvaluationReport report =
      reloc::evaluate(db, queries, camera, svc, *provider, cfg, seed);

  out.kv("queries", report.query_count);
  for (std::size_t k = 0; k < report.recall.size(); ++k)
    out.kv("recall." + std::to_string(k + 1), report.recall[k]);
  out.kv("success_rate", report.success_rate);

  const char* names[3] = {"matched", "mismatched", "unmatched"};
  for (int e = 0; e < 3; ++e)
    for (int p = 0; p < 3; ++p)
      out.kv("confusion." + std::string(names[e]) + "." + names[p],
             report.confusion[e][p]);
  for (int c = 0; c < 3; ++c) {
    out.kv("precision." + std::string(names[c]), report.precision[c]);
    out.kv("class_recall." + std::string(names[c]), report.class_recall[c]);
  }
  for (const auto& [name, seconds] : report.mean_times.rows())
    out.kv("time." + name + ".mean", seconds);
  for (const auto& [name, seconds] : report.std_times.rows())
    out.kv("time." + name + ".std", seconds);

  for (std::size_t i = 0; i < report.queries.size(); ++i) {
    const std::string prefix =
        "query." + std::to_string(report.queries[i].id);
    out.kv(prefix + ".expected", reloc::verdict_name(report.queries[i].expected));
    out.kv(prefix + ".predicted",
           reloc::verdict_name(report.reports[i].verdict));
    out.kv(prefix + ".accepted", report.reports[i].accepted);
  }

  if (!csv_dir.empty()) {
    std::filesystem::create_directories(csv_dir);
    const auto recall_path = std::filesystem::path(csv_dir) / "recall.csv";
    const auto scatter_path = std::filesystem::path(csv_dir) / "scatter.csv";
    reloc::write_recall_csv(report, recall_path);
    reloc::write_scatter_csv(report, scatter_path);
    out.kv("csv.recall", recall_path.string());
    out.kv("csv.scatter", scatter_path.string());
  }
  out.flush();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Lidar re-localisation against a prior submap database"};
  app.require_subcommand(1);

  std::string config_path, db_path, input_dir, cloud_path, image_path;
  std::string calib_path, svc_path, samples_path, model_out, queries_dir;
  std::string csv_dir;
  std::uint64_t seed = 42;
  std::int64_t query_id = 0;
  bool as_json = false;

  const auto add_common = [&](CLI::App* cmd) {
    cmd->add_option("--config", config_path, "pipeline configuration file")
        ->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "random seed (default 42)");
    cmd->add_flag("--json", as_json, "emit one JSON body instead of key: value lines");
  };

  CLI::App* build = app.add_subcommand(
      "build-db", "ingest submap clouds and poses into a database");
  add_common(build);
  build->add_option("--input", input_dir, "directory with poses.txt and submap_<id>.r3pc")
      ->required()
      ->check(CLI::ExistingDirectory);
  build->add_option("--db", db_path, "database output directory")->required();

  CLI::App* reloc_cmd = app.add_subcommand(
      "relocalise", "match one query cloud+image against the database");
  add_common(reloc_cmd);
  reloc_cmd->add_option("--db", db_path, "database directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  reloc_cmd->add_option("--cloud", cloud_path, "query point cloud (.r3pc)")
      ->required()
      ->check(CLI::ExistingFile);
  reloc_cmd->add_option("--image", image_path, "query camera image (.ppm)")
      ->required()
      ->check(CLI::ExistingFile);
  reloc_cmd->add_option("--calib", calib_path, "camera calibration file")
      ->required()
      ->check(CLI::ExistingFile);
  reloc_cmd->add_option("--svc", svc_path, "verification classifier model")
      ->required()
      ->check(CLI::ExistingFile);
  reloc_cmd->add_option("--query-id", query_id,
                        "node id assigned to the query submap root");

  CLI::App* train = app.add_subcommand(
      "train-svc", "fit the verification classifier from labeled samples");
  add_common(train);
  train->add_option("--samples", samples_path, "labeled `mcs nu label` lines")
      ->required()
      ->check(CLI::ExistingFile);
  train->add_option("--out", model_out, "model output file")->required();

  CLI::App* eval = app.add_subcommand(
      "evaluate", "score a query set with ground truth against the database");
  add_common(eval);
  eval->add_option("--db", db_path, "database directory")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval->add_option("--queries", queries_dir,
                   "directory with queries.txt and the query files")
      ->required()
      ->check(CLI::ExistingDirectory);
  eval->add_option("--calib", calib_path, "camera calibration file")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--svc", svc_path, "verification classifier model")
      ->required()
      ->check(CLI::ExistingFile);
  eval->add_option("--csv-dir", csv_dir, "directory for recall.csv and scatter.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  Emitter out(as_json);
  try {
    if (app.got_subcommand(build))
      return run_build_db(input_dir, db_path, config_path, out);
    if (app.got_subcommand(reloc_cmd))
      return run_relocalise(db_path, cloud_path, image_path, calib_path,
                            svc_path, config_path, seed, query_id, out);
    if (app.got_subcommand(train))
      return run_train_svc(samples_path, model_out, out);
    if (app.got_subcommand(eval))
      return run_evaluate(db_path, queries_dir, calib_path, svc_path,
                          config_path, seed, csv_dir, out);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
