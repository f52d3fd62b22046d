#include "reloc/provider.hpp"

#include <cmath>

namespace reloc {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

Eigen::VectorXf embedding_for_key(std::uint64_t key, int dim) {
  std::uint64_t state = key;
  Eigen::VectorXf v(dim);
  for (int i = 0; i < dim; ++i) {
    // Top 53 bits to a double in [0, 1), then to [-1, 1).
    const double u =
        static_cast<double>(splitmix64(state) >> 11) * 0x1.0p-53;
    v(i) = static_cast<float>(2.0 * u - 1.0);
  }
  const float n = v.norm();
  if (n > 0.0f) v /= n;
  return v;
}

class ColorEmbeddingProvider final : public FeatureProvider {
 public:
  explicit ColorEmbeddingProvider(int dim) : dim_(dim) {
    if (dim < 1) throw InvalidArgument("provider dimension must be >= 1");
  }

  int dim() const override { return dim_; }

  Eigen::MatrixXf point_features(const PointCloud& cloud) const override {
    cloud.validate();
    const Eigen::Index n = static_cast<Eigen::Index>(cloud.size());
    Eigen::MatrixXf out(n, dim_);
    if (cloud.features.cols() == 3) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const auto to_byte = [](float v) {
          return static_cast<std::uint8_t>(
              std::clamp(static_cast<int>(std::lround(v * 255.0f)), 0, 255));
        };
        out.row(i) = color_cell_embedding(to_byte(cloud.features(i, 0)),
                                          to_byte(cloud.features(i, 1)),
                                          to_byte(cloud.features(i, 2)), dim_)
                         .transpose();
      }
    } else if (cloud.features.cols() == dim_) {
      out = cloud.features;
      for (Eigen::Index i = 0; i < n; ++i) {
        const float norm = out.row(i).norm();
        if (norm > 0.0f) out.row(i) /= norm;
      }
    } else if (cloud.features.cols() == 0) {
      for (Eigen::Index i = 0; i < n; ++i) {
        const Eigen::Vector3i k =
            voxel_key(cloud.points[static_cast<std::size_t>(i)], 0.5);
        std::uint64_t key = 0xC0FFEEull;
        for (int a = 0; a < 3; ++a)
          key = key * 0x100000001B3ull +
                static_cast<std::uint64_t>(static_cast<std::int64_t>(k(a)) +
                                           (1ll << 31));
        out.row(i) = embedding_for_key(key, dim_).transpose();
      }
    } else {
      throw InvalidArgument(
          "point features must have 0, 3, or provider-dim columns, got " +
          std::to_string(cloud.features.cols()));
    }
    return out;
  }

  PixelFeatureMap image_features(const Image& image) const override {
    if (image.empty()) throw InvalidArgument("image features: empty image");
    PixelFeatureMap map;
    map.grid_width = map.image_width = image.width;
    map.grid_height = map.image_height = image.height;
    map.features.resize(
        static_cast<Eigen::Index>(image.width) * image.height, dim_);
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x) {
        const auto [r, g, b] = image.at(y, x);
        map.features.row(static_cast<Eigen::Index>(y) * image.width + x) =
            color_cell_embedding(r, g, b, dim_).transpose();
      }
    return map;
  }

 private:
  int dim_;
};

}  // namespace

Eigen::VectorXf color_cell_embedding(std::uint8_t r, std::uint8_t g,
                                     std::uint8_t b, int dim) {
  const std::uint64_t cell = (static_cast<std::uint64_t>(r >> 4) << 8) |
                             (static_cast<std::uint64_t>(g >> 4) << 4) |
                             static_cast<std::uint64_t>(b >> 4);
  return embedding_for_key(cell * 0x9E3779B97F4A7C15ull + 0x5EEDull, dim);
}

std::shared_ptr<FeatureProvider> make_color_embedding_provider(int dim) {
  return std::make_shared<ColorEmbeddingProvider>(dim);
}

}  // namespace reloc
