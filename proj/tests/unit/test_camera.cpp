#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "reloc/camera.hpp"
#include "reloc/errors.hpp"

using namespace reloc;

namespace {

CameraModel sample_camera() {
  CameraModel cam;
  cam.fx = 320.5;
  cam.fy = 318.25;
  cam.cx = 319.75;
  cam.cy = 239.5;
  cam.width = 640;
  cam.height = 480;
  cam.lidar_to_camera =
      RigidTransform(Eigen::Quaterniond(0.9, 0.1, -0.2, 0.3).normalized(),
                     Eigen::Vector3d(0.05, -0.12, 0.3));
  return cam;
}

std::filesystem::path temp_file(const char* name) {
  auto dir = std::filesystem::temp_directory_path() / "reloc_camera_tests";
  std::filesystem::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("optical axis point projects to the principal point") {
  CameraModel cam = sample_camera();
  const auto px = cam.project(Eigen::Vector3d(0, 0, 2.0));
  REQUIRE(px.has_value());
  CHECK(px->x() == doctest::Approx(cam.cx).epsilon(1e-12));
  CHECK(px->y() == doctest::Approx(cam.cy).epsilon(1e-12));
}

TEST_CASE("projection discards near, behind and out-of-frame points") {
  CameraModel cam = sample_camera();
  CHECK_FALSE(cam.project(Eigen::Vector3d(0, 0, 0.1)).has_value());
  CHECK_FALSE(cam.project(Eigen::Vector3d(0, 0, -2)).has_value());
  CHECK_FALSE(cam.project(Eigen::Vector3d(50, 0, 1)).has_value());
  CHECK(cam.project(Eigen::Vector3d(0, 0, 0.10001)).has_value());
}

TEST_CASE("projection matches the pinhole equations") {
  CameraModel cam = sample_camera();
  const Eigen::Vector3d p(0.3, -0.2, 1.7);
  const auto px = cam.project(p);
  REQUIRE(px.has_value());
  CHECK(px->x() == doctest::Approx(cam.fx * p.x() / p.z() + cam.cx).epsilon(1e-14));
  CHECK(px->y() == doctest::Approx(cam.fy * p.y() / p.z() + cam.cy).epsilon(1e-14));
}

TEST_CASE("calibration files round trip exactly") {
  CameraModel cam = sample_camera();
  const auto path = temp_file("roundtrip.txt");
  save_camera_calibration(path, cam);
  const CameraModel back = load_camera_calibration(path);
  CHECK(back.fx == cam.fx);
  CHECK(back.fy == cam.fy);
  CHECK(back.cx == cam.cx);
  CHECK(back.cy == cam.cy);
  CHECK(back.width == cam.width);
  CHECK(back.height == cam.height);
  CHECK(back.lidar_to_camera.rotation.coeffs() ==
        cam.lidar_to_camera.rotation.coeffs());
  CHECK(back.lidar_to_camera.translation == cam.lidar_to_camera.translation);
}

TEST_CASE("calibration accepts decimal values and comments") {
  const auto path = temp_file("decimal.txt");
  std::ofstream out(path);
  out << "# synthetic rig\n";
  out << "fx = 100.0\n";
  out << "fy = 101.5  # slightly anamorphic\n";
  out << "cx = 50\n";
  out << "cy = 40\n";
  out << "width = 100\n";
  out << "height = 80\n";
  out << "\n";
  out << "lidar_to_camera = 1 0 0 0 0.5 -0.25 1.25\n";
  out.close();
  const CameraModel cam = load_camera_calibration(path);
  CHECK(cam.fx == 100.0);
  CHECK(cam.fy == 101.5);
  CHECK(cam.width == 100);
  CHECK(cam.height == 80);
  CHECK(cam.lidar_to_camera.translation == Eigen::Vector3d(0.5, -0.25, 1.25));
}

TEST_CASE("calibration rejects unknown, duplicate and missing keys") {
  auto write = [](const std::filesystem::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
  };
  const std::string base =
      "fx = 100\nfy = 100\ncx = 50\ncy = 40\nwidth = 100\nheight = 80\n"
      "lidar_to_camera = 1 0 0 0 0 0 0\n";

  const auto unknown = temp_file("unknown.txt");
  write(unknown, base + "skew = 3\n");
  CHECK_THROWS_AS(load_camera_calibration(unknown), FormatError);

  const auto dup = temp_file("dup.txt");
  write(dup, base + "fx = 120\n");
  CHECK_THROWS_AS(load_camera_calibration(dup), FormatError);

  const auto missing = temp_file("missing.txt");
  write(missing, "fx = 100\nfy = 100\ncx = 50\ncy = 40\n");
  CHECK_THROWS_AS(load_camera_calibration(missing), FormatError);

  const auto short_pose = temp_file("short_pose.txt");
  write(short_pose,
        "fx = 100\nfy = 100\ncx = 50\ncy = 40\nwidth = 100\nheight = 80\n"
        "lidar_to_camera = 1 0 0 0\n");
  CHECK_THROWS_AS(load_camera_calibration(short_pose), FormatError);

  const auto junk = temp_file("junk.txt");
  write(junk, base + "\nnot a key value line\n");
  CHECK_THROWS_AS(load_camera_calibration(junk), FormatError);
}

TEST_CASE("camera validation rejects out-of-range intrinsics") {
  CameraModel cam = sample_camera();
  cam.fx = 0;
  CHECK_THROWS_AS(cam.validate(), InvalidArgument);
  cam = sample_camera();
  cam.cx = cam.width;
  CHECK_THROWS_AS(cam.validate(), InvalidArgument);
  cam = sample_camera();
  cam.height = 0;
  CHECK_THROWS_AS(cam.validate(), InvalidArgument);
  CHECK_NOTHROW(sample_camera().validate());
}
