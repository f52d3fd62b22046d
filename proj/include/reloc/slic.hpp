#pragma once

#include <Eigen/Core>
#include <vector>

#include "reloc/image.hpp"
#include "reloc/provider.hpp"

namespace reloc {

/// Superpixel segmentation of one image. `labels` is H x W with values in
/// [0, count); -1 only ever appears transiently during segmentation.
/// `features` stays empty until pool_superpixel_features fills it.
struct SuperpixelSet {
  Eigen::MatrixXi labels;
  int count = 0;
  std::vector<Eigen::Vector2d> centroids;  // per label, (x, y) pixels
  Eigen::MatrixXf features;                // count x D, rows unit or zero

  int width() const { return static_cast<int>(labels.cols()); }
  int height() const { return static_cast<int>(labels.rows()); }
};

/// SLIC: k-means over (L, a, b, x, y) with grid-initialised centers,
/// distance sqrt(d_lab^2 + (compactness * d_xy / S)^2), 10 iterations,
/// then orphan components merged into the neighbouring label they share
/// the longest boundary with. Every pixel ends up labeled; the final
/// label count never exceeds target_count. Fully deterministic.
SuperpixelSet slic_segment(const Image& image, int target_count,
                           double compactness = 10.0);

/// Mean pixel feature per superpixel, L2-normalized (zero-norm rows stay
/// zero).
void pool_superpixel_features(SuperpixelSet& superpixels,
                              const PixelFeatureMap& map);

}  // namespace reloc
