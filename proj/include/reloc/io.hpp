#pragma once

#include <Eigen/Core>
#include <filesystem>
#include <string>
#include <vector>

#include "reloc/errors.hpp"
#include "reloc/geometry.hpp"

namespace reloc {

/// Point-cloud container file. Layout: magic `R3PC`, little-endian u32 point
/// count N, then N x 3 float32 (x, y, z). A per-point feature block may
/// follow: magic `R3FT`, u32 rows, u32 dim, row-major float32; when attached
/// to a cloud the row count must equal N.
PointCloud load_cloud(const std::filesystem::path& path);
void save_cloud(const std::filesystem::path& path, const PointCloud& cloud);

/// Standalone `R3FT` feature file (no leading cloud).
Eigen::MatrixXf load_features(const std::filesystem::path& path);
void save_features(const std::filesystem::path& path,
                   const Eigen::MatrixXf& features);

/// Bit-exact float round trip for text formats via hexadecimal literals
/// ("%a" style, e.g. 0x1.8p+1).
std::string to_hex(double v);
double from_hex(const std::string& token, std::size_t line = 0);

/// A transform as 7 hex floats: quaternion w x y z, then translation x y z.
std::string format_transform(const RigidTransform& t);
RigidTransform parse_transform(const std::vector<std::string>& tokens,
                               std::size_t first, std::size_t line = 0);

/// Whitespace-splitting tokenizer used by the line-oriented text formats.
std::vector<std::string> split_tokens(const std::string& line);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path,
                     const std::string& content);

}  // namespace reloc
