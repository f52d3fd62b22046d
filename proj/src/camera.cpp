#include "reloc/camera.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "reloc/io.hpp"

namespace reloc {

namespace {

double parse_number(const std::string& text, long line) {
  const char* begin = text.c_str();
  char* end = nullptr;
  errno = 0;
  const double value = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || errno == ERANGE || !std::isfinite(value))
    throw FormatError::at_line("calibration: bad numeric value '" + text + "'",
                               line);
  return value;
}

}  // namespace

CameraModel load_camera_calibration(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open calibration file " + path.string(), 0);

  CameraModel cam;
  std::map<std::string, bool> seen = {
      {"fx", false},    {"fy", false},     {"cx", false},
      {"cy", false},    {"width", false},  {"height", false},
      {"lidar_to_camera", false}};

  std::string raw;
  long line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    const auto hash = raw.find('#');
    if (hash != std::string::npos) raw.erase(hash);
    std::string line = raw;
    const auto eq = line.find('=');
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (eq == std::string::npos)
      throw FormatError::at_line("calibration: expected key = value", line_no);

    auto strip = [](std::string s) {
      const auto a = s.find_first_not_of(" \t\r");
      const auto b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    const std::string key = strip(line.substr(0, eq));
    const std::string value = strip(line.substr(eq + 1));

    auto it = seen.find(key);
    if (it == seen.end())
      throw FormatError::at_line("calibration: unknown key '" + key + "'",
                                 line_no);
    if (it->second)
      throw FormatError::at_line("calibration: duplicate key '" + key + "'",
                                 line_no);
    it->second = true;

    if (key == "lidar_to_camera") {
      const auto tokens = split_tokens(value);
      if (tokens.size() != 7)
        throw FormatError::at_line(
            "calibration: lidar_to_camera needs 7 numbers", line_no);
      double v[7];
      for (int i = 0; i < 7; ++i) v[i] = parse_number(tokens[i], line_no);
      cam.lidar_to_camera = RigidTransform(
          Eigen::Quaterniond(v[0], v[1], v[2], v[3]),
          Eigen::Vector3d(v[4], v[5], v[6]));
    } else {
      const double v = parse_number(value, line_no);
      if (key == "fx") cam.fx = v;
      else if (key == "fy") cam.fy = v;
      else if (key == "cx") cam.cx = v;
      else if (key == "cy") cam.cy = v;
      else if (key == "width") cam.width = static_cast<int>(v);
      else cam.height = static_cast<int>(v);
    }
  }

  for (const auto& [key, present] : seen)
    if (!present)
      throw FormatError("calibration: missing key '" + key + "'", 0);
  cam.validate();
  return cam;
}

void save_camera_calibration(const std::filesystem::path& path,
                             const CameraModel& camera) {
  std::ostringstream out;
  out << "fx = " << to_hex(camera.fx) << "\n";
  out << "fy = " << to_hex(camera.fy) << "\n";
  out << "cx = " << to_hex(camera.cx) << "\n";
  out << "cy = " << to_hex(camera.cy) << "\n";
  out << "width = " << camera.width << "\n";
  out << "height = " << camera.height << "\n";
  out << "lidar_to_camera = " << format_transform(camera.lidar_to_camera)
      << "\n";
  write_text_file(path, out.str());
}

}  // namespace reloc
