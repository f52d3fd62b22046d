#include "reloc/io.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace reloc {

namespace {

constexpr std::uint32_t bswap32(std::uint32_t v) {
  return (v >> 24) | ((v >> 8) & 0xff00u) | ((v << 8) & 0xff0000u) | (v << 24);
}

std::vector<char> read_binary(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string(), 0);
  in.seekg(0, std::ios::end);
  const auto size = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<char> buf(static_cast<std::size_t>(size));
  if (size > 0) in.read(buf.data(), size);
  if (!in) throw FormatError("short read on " + path.string(), 0);
  return buf;
}

class Cursor {
 public:
  Cursor(const std::vector<char>& buf, std::string name)
      : buf_(buf), name_(std::move(name)) {}

  std::size_t offset() const { return pos_; }
  std::size_t remaining() const { return buf_.size() - pos_; }

  void expect_magic(const char tag[4]) {
    if (remaining() < 4)
      throw FormatError(name_ + ": truncated before magic", pos_);
    if (std::memcmp(buf_.data() + pos_, tag, 4) != 0)
      throw FormatError(name_ + ": bad magic, expected " + std::string(tag, 4),
                        pos_);
    pos_ += 4;
  }

  std::uint32_t read_u32() {
    if (remaining() < 4)
      throw FormatError(name_ + ": truncated u32", pos_);
    std::uint32_t v;
    std::memcpy(&v, buf_.data() + pos_, 4);
    if constexpr (std::endian::native == std::endian::big) v = bswap32(v);
    pos_ += 4;
    return v;
  }

  float read_f32() {
    if (remaining() < 4)
      throw FormatError(name_ + ": truncated float payload", pos_);
    std::uint32_t raw;
    std::memcpy(&raw, buf_.data() + pos_, 4);
    if constexpr (std::endian::native == std::endian::big)
      raw = bswap32(raw);
    float v;
    std::memcpy(&v, &raw, 4);
    pos_ += 4;
    return v;
  }

  float read_finite_f32(const char* what) {
    const std::size_t at = pos_;
    const float v = read_f32();
    if (!std::isfinite(v))
      throw FormatError(name_ + ": non-finite " + what, at);
    return v;
  }

 private:
  const std::vector<char>& buf_;
  std::string name_;
  std::size_t pos_ = 0;
};

void append_u32(std::string& out, std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) v = bswap32(v);
  out.append(reinterpret_cast<const char*>(&v), 4);
}

void append_f32(std::string& out, float v) {
  std::uint32_t raw;
  std::memcpy(&raw, &v, 4);
  if constexpr (std::endian::native == std::endian::big)
    raw = bswap32(raw);
  out.append(reinterpret_cast<const char*>(&raw), 4);
}

Eigen::MatrixXf read_feature_block(Cursor& c) {
  c.expect_magic("R3FT");
  const std::uint32_t rows = c.read_u32();
  const std::uint32_t dim = c.read_u32();
  if (rows > 0 && dim == 0)
    throw FormatError("feature block has rows but zero dim", c.offset());
  Eigen::MatrixXf m(rows, dim);
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < dim; ++j)
      m(i, j) = c.read_finite_f32("feature value");
  return m;
}

void append_feature_block(std::string& out, const Eigen::MatrixXf& m) {
  out.append("R3FT", 4);
  append_u32(out, static_cast<std::uint32_t>(m.rows()));
  append_u32(out, static_cast<std::uint32_t>(m.cols()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) append_f32(out, m(i, j));
}

void write_binary(const std::filesystem::path& path, const std::string& data) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for write", 0);
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
  if (!out) throw FormatError("short write on " + path.string(), 0);
}

}  // namespace

PointCloud load_cloud(const std::filesystem::path& path) {
  const std::vector<char> buf = read_binary(path);
  Cursor c(buf, path.filename().string());
  c.expect_magic("R3PC");
  const std::uint32_t n = c.read_u32();
  PointCloud cloud;
  cloud.points.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const double x = c.read_finite_f32("coordinate");
    const double y = c.read_finite_f32("coordinate");
    const double z = c.read_finite_f32("coordinate");
    cloud.points.emplace_back(x, y, z);
  }
  if (c.remaining() > 0) {
    const std::size_t block_at = c.offset();
    cloud.features = read_feature_block(c);
    if (static_cast<std::uint32_t>(cloud.features.rows()) != n)
      throw FormatError(path.filename().string() +
                            ": feature rows do not match point count",
                        block_at);
    if (c.remaining() > 0)
      throw FormatError(path.filename().string() + ": trailing bytes",
                        c.offset());
  }
  return cloud;
}

void save_cloud(const std::filesystem::path& path, const PointCloud& cloud) {
  cloud.validate();
  std::string out;
  out.reserve(8 + cloud.points.size() * 12);
  out.append("R3PC", 4);
  append_u32(out, static_cast<std::uint32_t>(cloud.points.size()));
  for (const auto& p : cloud.points) {
    append_f32(out, static_cast<float>(p.x()));
    append_f32(out, static_cast<float>(p.y()));
    append_f32(out, static_cast<float>(p.z()));
  }
  if (cloud.has_features()) append_feature_block(out, cloud.features);
  write_binary(path, out);
}

Eigen::MatrixXf load_features(const std::filesystem::path& path) {
  const std::vector<char> buf = read_binary(path);
  Cursor c(buf, path.filename().string());
  Eigen::MatrixXf m = read_feature_block(c);
  if (c.remaining() > 0)
    throw FormatError(path.filename().string() + ": trailing bytes",
                      c.offset());
  return m;
}

void save_features(const std::filesystem::path& path,
                   const Eigen::MatrixXf& features) {
  if (!features.allFinite())
    throw InvalidArgument("features must be finite");
  std::string out;
  append_feature_block(out, features);
  write_binary(path, out);
}

std::string to_hex(double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "%a", v);
  return buf;
}

double from_hex(const std::string& token, std::size_t line) {
  const char* begin = token.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw FormatError::at_line("bad float literal '" + token + "'", line);
  return v;
}

std::string format_transform(const RigidTransform& t) {
  const auto& q = t.rotation;
  std::string s = to_hex(q.w());
  for (double v : {q.x(), q.y(), q.z(), t.translation.x(), t.translation.y(),
                   t.translation.z()}) {
    s += ' ';
    s += to_hex(v);
  }
  return s;
}

RigidTransform parse_transform(const std::vector<std::string>& tokens,
                               std::size_t first, std::size_t line) {
  if (tokens.size() < first + 7)
    throw FormatError::at_line("transform needs 7 floats", line);
  double v[7];
  for (std::size_t i = 0; i < 7; ++i) v[i] = from_hex(tokens[first + i], line);
  return {Eigen::Quaterniond(v[0], v[1], v[2], v[3]),
          Eigen::Vector3d(v[4], v[5], v[6])};
}

std::vector<std::string> split_tokens(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) out.push_back(std::move(tok));
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string(), 0);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path,
                     const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open " + path.string() + " for write", 0);
  out << content;
  if (!out) throw FormatError("short write on " + path.string(), 0);
}

}  // namespace reloc
