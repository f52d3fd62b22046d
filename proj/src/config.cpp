#include "reloc/config.hpp"

#include <climits>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "reloc/errors.hpp"
#include "reloc/io.hpp"

namespace reloc {
namespace {

std::string strip(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& token, std::size_t line) {
  const char* begin = token.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end != begin + token.size() || token.empty())
    throw FormatError::at_line("bad numeric value '" + token + "'", line);
  if (!std::isfinite(v))
    throw FormatError::at_line("non-finite value '" + token + "'", line);
  return v;
}

int parse_int(const std::string& token, std::size_t line) {
  const char* begin = token.c_str();
  char* end = nullptr;
  const long v = std::strtol(begin, &end, 10);
  if (end != begin + token.size() || token.empty())
    throw FormatError::at_line("bad integer value '" + token + "'", line);
  if (v < INT_MIN || v > INT_MAX)
    throw FormatError::at_line("integer out of range '" + token + "'", line);
  return static_cast<int>(v);
}

void require(bool ok, const std::string& key, const std::string& range) {
  if (!ok) throw InvalidArgument(key + " must be " + range);
}

}  // namespace

PipelineConfig parse_config(const std::string& text) {
  PipelineConfig cfg;
  using Setter = std::function<void(PipelineConfig&, const std::string&, std::size_t)>;
  const std::map<std::string, Setter> setters = {
      {"provider.name",
       [](PipelineConfig& c, const std::string& v, std::size_t) { c.provider_name = v; }},
      {"provider.dim",
       [](PipelineConfig& c, const std::string& v, std::size_t n) { c.provider_dim = parse_int(v, n); }},
      {"descriptor.keypoint_budget",
       [](PipelineConfig& c, const std::string& v, std::size_t n) { c.keypoint_budget = parse_int(v, n); }},
      {"descriptor.keypoint_radius",
       [](PipelineConfig& c, const std::string& v, std::size_t n) { c.keypoint_radius = parse_double(v, n); }},
      {"descriptor.gem_power",
       [](PipelineConfig& c, const std::string& v, std::size_t n) { c.gem_power = parse_double(v, n); }},
      {"retrieval.k",
       [](PipelineConfig& c, const std::string& v, std::size_t n) { c.retrieval_k = parse_int(v, n); }},
      {"registration.lowe_ratio",
       [](PipelineConfig& c, const std::string& v, std::size_t n) { c.lowe_ratio = parse_double(v, n); }},
      {"registration.inlier_threshold",
       [](PipelineConfig& c, const std::string& v, std::size_t n) { c.inlier_threshold = parse_double(v, n); }},
      {"registration.ransac_max_iterations",
       [](PipelineConfig& c, const std::string& v, std::size_t n) { c.ransac_max_iterations = parse_int(v, n); }},
      {"registration.icp_resolution",
       [](PipelineConfig& c, const std::string& v, std::size_t n) { c.icp_resolution = parse_double(v, n); }},
      {"registration.icp_max_corr_dist",
       [](PipelineConfig& c, const std::string& v, std::size_t n) { c.icp_max_corr_dist = parse_double(v, n); }},
      {"registration.icp_max_iterations",
       [](PipelineConfig& c, const std::string& v, std::size_t n) { c.icp_max_iterations = parse_int(v, n); }},
      {"registration.success_rot_tol_deg",
       [](PipelineConfig& c, const std::string& v, std::size_t n) { c.success_rot_tol_deg = parse_double(v, n); }},
      {"registration.success_trans_tol_m",
       [](PipelineConfig& c, const std::string& v, std::size_t n) { c.success_trans_tol_m = parse_double(v, n); }},
      {"verification.target_superpixels",
       [](PipelineConfig& c, const std::string& v, std::size_t n) { c.target_superpixels = parse_int(v, n); }},
      {"verification.compactness",
       [](PipelineConfig& c, const std::string& v, std::size_t n) { c.compactness = parse_double(v, n); }},
      {"verification.min_depth",
       [](PipelineConfig& c, const std::string& v, std::size_t n) { c.min_depth = parse_double(v, n); }},
      {"verification.top_k",
       [](PipelineConfig& c, const std::string& v, std::size_t n) { c.top_k = parse_int(v, n); }},
      {"evaluation.k_max",
       [](PipelineConfig& c, const std::string& v, std::size_t n) { c.recall_k_max = parse_int(v, n); }},
      {"evaluation.revisit_radius",
       [](PipelineConfig& c, const std::string& v, std::size_t n) { c.revisit_radius = parse_double(v, n); }},
      {"paths.calibration",
       [](PipelineConfig& c, const std::string& v, std::size_t) { c.calibration_path = v; }},
      {"paths.svc_model",
       [](PipelineConfig& c, const std::string& v, std::size_t) { c.svc_model_path = v; }},
  };

  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  std::set<std::string> seen;
  while (std::getline(lines, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string body = strip(line);
    if (body.empty()) continue;
    const std::size_t eq = body.find('=');
    if (eq == std::string::npos)
      throw FormatError::at_line("expected 'key = value'", line_no);
    const std::string key = strip(body.substr(0, eq));
    const std::string value = strip(body.substr(eq + 1));
    if (key.empty() || value.empty())
      throw FormatError::at_line("expected 'key = value'", line_no);
    const auto it = setters.find(key);
    if (it == setters.end())
      throw FormatError::at_line("unknown key '" + key + "'", line_no);
    if (!seen.insert(key).second)
      throw FormatError::at_line("repeated key '" + key + "'", line_no);
    it->second(cfg, value, line_no);
  }
  validate_config(cfg);
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  return parse_config(read_text_file(path));
}

void validate_config(const PipelineConfig& c) {
  require(c.provider_name == "color", "provider.name", "'color'");
  require(c.provider_dim >= 4 && c.provider_dim <= 1024, "provider.dim",
          "in [4, 1024]");
  require(c.keypoint_budget >= 8 && c.keypoint_budget <= 4096,
          "descriptor.keypoint_budget", "in [8, 4096]");
  require(c.keypoint_radius > 0.0 && c.keypoint_radius <= 100.0,
          "descriptor.keypoint_radius", "in (0, 100]");
  require(c.gem_power >= 1.0 && c.gem_power <= 64.0, "descriptor.gem_power",
          "in [1, 64]");
  require(c.retrieval_k >= 1 && c.retrieval_k <= 100, "retrieval.k",
          "in [1, 100]");
  require(c.lowe_ratio > 0.0 && c.lowe_ratio <= 1.0, "registration.lowe_ratio",
          "in (0, 1]");
  require(c.inlier_threshold > 0.0 && c.inlier_threshold <= 10.0,
          "registration.inlier_threshold", "in (0, 10]");
  require(c.ransac_max_iterations >= 1 && c.ransac_max_iterations <= 1000000,
          "registration.ransac_max_iterations", "in [1, 1000000]");
  require(c.icp_resolution > 0.0 && c.icp_resolution <= 10.0,
          "registration.icp_resolution", "in (0, 10]");
  require(c.icp_max_corr_dist > 0.0 && c.icp_max_corr_dist <= 50.0,
          "registration.icp_max_corr_dist", "in (0, 50]");
  require(c.icp_max_iterations >= 1 && c.icp_max_iterations <= 1000,
          "registration.icp_max_iterations", "in [1, 1000]");
  require(c.success_rot_tol_deg > 0.0 && c.success_rot_tol_deg <= 180.0,
          "registration.success_rot_tol_deg", "in (0, 180]");
  require(c.success_trans_tol_m > 0.0 && c.success_trans_tol_m <= 100.0,
          "registration.success_trans_tol_m", "in (0, 100]");
  require(c.target_superpixels >= 1 && c.target_superpixels <= 250,
          "verification.target_superpixels", "in [1, 250]");
  require(c.compactness > 0.0 && c.compactness <= 1000.0,
          "verification.compactness", "in (0, 1000]");
  require(c.min_depth > 0.0 && c.min_depth <= 10.0, "verification.min_depth",
          "in (0, 10]");
  require(c.top_k >= 1 && c.top_k <= 50, "verification.top_k", "in [1, 50]");
  require(c.recall_k_max >= 1 && c.recall_k_max <= 100, "evaluation.k_max",
          "in [1, 100]");
  require(c.revisit_radius > 0.0 && c.revisit_radius <= 1000.0,
          "evaluation.revisit_radius", "in (0, 1000]");
}

}  // namespace reloc
