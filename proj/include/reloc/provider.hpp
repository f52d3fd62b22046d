#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <memory>

#include "reloc/geometry.hpp"
#include "reloc/image.hpp"

namespace reloc {

/// Per-pixel feature grid. The grid may be coarser than the source image;
/// lookups scale pixel coordinates into the grid.
struct PixelFeatureMap {
  int grid_width = 0;
  int grid_height = 0;
  int image_width = 0;
  int image_height = 0;
  Eigen::MatrixXf features;  // (grid_height * grid_width) x D, row-major cells

  Eigen::Index row_for_pixel(int y, int x) const {
    const int gy = static_cast<int>(static_cast<std::int64_t>(y) * grid_height /
                                    image_height);
    const int gx = static_cast<int>(static_cast<std::int64_t>(x) * grid_width /
                                    image_width);
    return static_cast<Eigen::Index>(gy) * grid_width + gx;
  }
};

/// Source of the D-dimensional features pooled by the cross-modal check:
/// per-point features for a cloud and per-pixel features for an image.
/// Implementations must be deterministic and safe for concurrent reads.
class FeatureProvider {
 public:
  virtual ~FeatureProvider() = default;
  virtual int dim() const = 0;
  virtual Eigen::MatrixXf point_features(const PointCloud& cloud) const = 0;
  virtual PixelFeatureMap image_features(const Image& image) const = 0;
};

/// Deterministic embedding of quantized RGB colour cells (16 levels per
/// channel) into unit vectors, seeded per cell by a splitmix64 hash.
///
/// Image side: each pixel's colour is embedded directly. Cloud side: a
/// 3-column feature block is read as RGB in [0, 1] and embedded the same
/// way; a D-column block is row-normalized and passed through; a cloud
/// without features falls back to hashing the 0.5 m voxel cell of each
/// point, which exercises the pipeline without cross-modal agreement.
std::shared_ptr<FeatureProvider> make_color_embedding_provider(int dim = 64);

/// The unit vector the colour embedding assigns to an RGB byte triple.
Eigen::VectorXf color_cell_embedding(std::uint8_t r, std::uint8_t g,
                                     std::uint8_t b, int dim);

}  // namespace reloc
