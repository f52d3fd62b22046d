#pragma once

#include <filesystem>
#include <string>

namespace reloc {

/// Tunables for the end-to-end pipeline, grouped the way the sectioned
/// key-value file spells them (`registration.inlier_threshold = 0.5`).
/// Defaults mirror the per-module defaults.
struct PipelineConfig {
  // provider.*
  std::string provider_name = "color";
  int provider_dim = 64;

  // descriptor.*
  int keypoint_budget = 256;
  double keypoint_radius = 2.0;
  double gem_power = 3.0;

  // retrieval.*
  int retrieval_k = 5;  // candidates listed in reports; rank 1 drives the rest

  // registration.*
  double lowe_ratio = 0.95;
  double inlier_threshold = 0.5;  // meters
  int ransac_max_iterations = 10000;
  double icp_resolution = 0.4;
  double icp_max_corr_dist = 1.0;
  int icp_max_iterations = 50;
  double success_rot_tol_deg = 5.0;
  double success_trans_tol_m = 2.0;

  // verification.*
  int target_superpixels = 250;
  double compactness = 10.0;
  double min_depth = 0.1;
  int top_k = 5;

  // evaluation.*
  int recall_k_max = 5;
  double revisit_radius = 3.0;

  // paths.*
  std::string calibration_path;
  std::string svc_model_path;
};

/// Parses `section.key = value` lines. `#` starts a comment, blank lines are
/// skipped. Unknown or repeated keys and malformed values raise a
/// format-error with the line number; out-of-range values raise an
/// invalid-argument error naming the key.
PipelineConfig parse_config(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);

/// Range checks applied after parsing; also usable on hand-built configs.
void validate_config(const PipelineConfig& config);

}  // namespace reloc
