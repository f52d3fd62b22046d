#include "reloc/slic.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>

#include "reloc/errors.hpp"

namespace reloc {

namespace {

struct LabPixel {
  double l, a, b;
};

double srgb_to_linear(double c) {
  return c <= 0.04045 ? c / 12.92 : std::pow((c + 0.055) / 1.055, 2.4);
}

LabPixel rgb_to_lab(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
  const double r = srgb_to_linear(r8 / 255.0);
  const double g = srgb_to_linear(g8 / 255.0);
  const double b = srgb_to_linear(b8 / 255.0);
  const double x = 0.4124564 * r + 0.3575761 * g + 0.1804375 * b;
  const double y = 0.2126729 * r + 0.7151522 * g + 0.0721750 * b;
  const double z = 0.0193339 * r + 0.1191920 * g + 0.9503041 * b;
  const double xn = x / 0.95047, yn = y, zn = z / 1.08883;
  auto f = [](double t) {
    constexpr double cube = 216.0 / 24389.0;  // (6/29)^3
    return t > cube ? std::cbrt(t) : (24389.0 / 27.0 * t + 16.0) / 116.0;
  };
  const double fx = f(xn), fy = f(yn), fz = f(zn);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

struct Cluster {
  double l = 0, a = 0, b = 0, x = 0, y = 0;
};

/// Grid shape maximising nx*ny <= target, then squarest cells, then fewer
/// rows.
std::pair<int, int> grid_shape(int width, int height, int target) {
  int best_nx = 1, best_ny = 1, best_count = 1;
  double best_skew = std::abs(static_cast<double>(width) - height);
  for (int ny = 1; ny <= target; ++ny) {
    const int nx = target / ny;
    if (nx < 1) break;
    const int count = nx * ny;
    const double skew = std::abs(static_cast<double>(width) / nx -
                                 static_cast<double>(height) / ny);
    const bool better =
        count > best_count || (count == best_count && skew < best_skew);
    if (better) {
      best_nx = nx;
      best_ny = ny;
      best_count = count;
      best_skew = skew;
    }
  }
  return {best_nx, best_ny};
}

}  // namespace

SuperpixelSet slic_segment(const Image& image, int target_count,
                           double compactness) {
  if (target_count < 1 || target_count > 250)
    throw InvalidArgument("slic: target count must be in [1, 250]");
  if (image.width < 1 || image.height < 1)
    throw InvalidArgument("slic: empty image");
  if (!(compactness > 0.0))
    throw InvalidArgument("slic: compactness must be positive");

  const int w = image.width, h = image.height;
  std::vector<LabPixel> lab(static_cast<std::size_t>(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto px = image.at(y, x);
      lab[static_cast<std::size_t>(y) * w + x] = rgb_to_lab(px[0], px[1], px[2]);
    }

  const auto [nx, ny] = grid_shape(w, h, target_count);
  const int k = nx * ny;
  std::vector<Cluster> clusters(k);
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      Cluster& c = clusters[j * nx + i];
      c.x = (i + 0.5) * w / nx;
      c.y = (j + 0.5) * h / ny;
      const int px = std::min(w - 1, static_cast<int>(c.x));
      const int py = std::min(h - 1, static_cast<int>(c.y));
      const LabPixel& p = lab[static_cast<std::size_t>(py) * w + px];
      c.l = p.l;
      c.a = p.a;
      c.b = p.b;
    }

  const double spacing = std::sqrt(static_cast<double>(w) * h / k);
  const double ratio2 = (compactness / spacing) * (compactness / spacing);
  Eigen::MatrixXi labels(h, w);
  std::vector<double> dist2(static_cast<std::size_t>(w) * h);

  auto pixel_cost = [&](const Cluster& c, int px, int py) {
    const LabPixel& p = lab[static_cast<std::size_t>(py) * w + px];
    const double dl = p.l - c.l, da = p.a - c.a, db = p.b - c.b;
    const double dx = px - c.x, dy = py - c.y;
    return dl * dl + da * da + db * db + ratio2 * (dx * dx + dy * dy);
  };

  for (int iter = 0; iter < 10; ++iter) {
    labels.setConstant(-1);
    std::fill(dist2.begin(), dist2.end(),
              std::numeric_limits<double>::infinity());
    const int reach = std::max(1, static_cast<int>(std::ceil(2.0 * spacing)));
    for (int c = 0; c < k; ++c) {
      const int x0 = std::max(0, static_cast<int>(clusters[c].x) - reach);
      const int x1 = std::min(w - 1, static_cast<int>(clusters[c].x) + reach);
      const int y0 = std::max(0, static_cast<int>(clusters[c].y) - reach);
      const int y1 = std::min(h - 1, static_cast<int>(clusters[c].y) + reach);
      for (int py = y0; py <= y1; ++py)
        for (int px = x0; px <= x1; ++px) {
          const double d = pixel_cost(clusters[c], px, py);
          auto& best = dist2[static_cast<std::size_t>(py) * w + px];
          if (d < best) {
            best = d;
            labels(py, px) = c;
          }
        }
    }
    for (int py = 0; py < h; ++py)
      for (int px = 0; px < w; ++px) {
        if (labels(py, px) >= 0) continue;
        auto& best = dist2[static_cast<std::size_t>(py) * w + px];
        for (int c = 0; c < k; ++c) {
          const double d = pixel_cost(clusters[c], px, py);
          if (d < best) {
            best = d;
            labels(py, px) = c;
          }
        }
      }

    std::vector<Cluster> sums(k);
    std::vector<int> counts(k, 0);
    for (int py = 0; py < h; ++py)
      for (int px = 0; px < w; ++px) {
        const int c = labels(py, px);
        const LabPixel& p = lab[static_cast<std::size_t>(py) * w + px];
        sums[c].l += p.l;
        sums[c].a += p.a;
        sums[c].b += p.b;
        sums[c].x += px;
        sums[c].y += py;
        ++counts[c];
      }
    for (int c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;
      clusters[c].l = sums[c].l / counts[c];
      clusters[c].a = sums[c].a / counts[c];
      clusters[c].b = sums[c].b / counts[c];
      clusters[c].x = sums[c].x / counts[c];
      clusters[c].y = sums[c].y / counts[c];
    }
  }

  // Orphan cleanup: every label keeps its largest connected component;
  // smaller ones are absorbed by the adjacent label sharing the most
  // boundary edges (lower label on ties), repeated until connected.
  while (true) {
    Eigen::MatrixXi comp(h, w);
    comp.setConstant(-1);
    std::vector<int> comp_label, comp_size;
    for (int py = 0; py < h; ++py)
      for (int px = 0; px < w; ++px) {
        if (comp(py, px) >= 0) continue;
        const int id = static_cast<int>(comp_label.size());
        const int lab_id = labels(py, px);
        comp_label.push_back(lab_id);
        comp_size.push_back(0);
        std::deque<std::pair<int, int>> queue{{px, py}};
        comp(py, px) = id;
        while (!queue.empty()) {
          const auto [qx, qy] = queue.front();
          queue.pop_front();
          ++comp_size[id];
          const int nbx[4] = {qx, qx - 1, qx + 1, qx};
          const int nby[4] = {qy - 1, qy, qy, qy + 1};
          for (int n = 0; n < 4; ++n) {
            const int ax = nbx[n], ay = nby[n];
            if (ax < 0 || ax >= w || ay < 0 || ay >= h) continue;
            if (comp(ay, ax) >= 0 || labels(ay, ax) != lab_id) continue;
            comp(ay, ax) = id;
            queue.emplace_back(ax, ay);
          }
        }
      }

    std::vector<int> main_comp(k, -1);
    for (int id = 0; id < static_cast<int>(comp_label.size()); ++id) {
      int& best = main_comp[comp_label[id]];
      if (best < 0 || comp_size[id] > comp_size[best]) best = id;
    }

    bool merged_any = false;
    bool orphans_left = false;
    for (int id = 0; id < static_cast<int>(comp_label.size()); ++id) {
      if (id == main_comp[comp_label[id]]) continue;
      // Count boundary contacts with adjacent main components.
      std::map<int, int> contact;
      for (int py = 0; py < h; ++py)
        for (int px = 0; px < w; ++px) {
          if (comp(py, px) != id) continue;
          const int nbx[4] = {px, px - 1, px + 1, px};
          const int nby[4] = {py - 1, py, py, py + 1};
          for (int n = 0; n < 4; ++n) {
            const int ax = nbx[n], ay = nby[n];
            if (ax < 0 || ax >= w || ay < 0 || ay >= h) continue;
            const int oc = comp(ay, ax);
            if (oc == id || oc != main_comp[comp_label[oc]]) continue;
            ++contact[comp_label[oc]];
          }
        }
      if (contact.empty()) {
        orphans_left = true;
        continue;
      }
      int target = -1, best_count = -1;
      for (const auto& [lab_id, cnt] : contact)
        if (cnt > best_count) {
          best_count = cnt;
          target = lab_id;
        }
      for (int py = 0; py < h; ++py)
        for (int px = 0; px < w; ++px)
          if (comp(py, px) == id) labels(py, px) = target;
      merged_any = true;
    }
    if (!orphans_left) {
      if (!merged_any) break;
      continue;  // one more pass to confirm connectivity
    }
    if (!merged_any)
      throw Error("slic: connectivity enforcement made no progress");
  }

  // Compact label ids and recompute centroids.
  std::vector<int> remap(k, -1);
  std::vector<int> counts(k, 0);
  for (int py = 0; py < h; ++py)
    for (int px = 0; px < w; ++px) ++counts[labels(py, px)];
  int next = 0;
  for (int c = 0; c < k; ++c)
    if (counts[c] > 0) remap[c] = next++;

  SuperpixelSet out;
  out.count = next;
  out.labels.resize(h, w);
  out.centroids.assign(next, Eigen::Vector2d::Zero());
  std::vector<int> sizes(next, 0);
  for (int py = 0; py < h; ++py)
    for (int px = 0; px < w; ++px) {
      const int c = remap[labels(py, px)];
      out.labels(py, px) = c;
      out.centroids[c] += Eigen::Vector2d(px, py);
      ++sizes[c];
    }
  for (int c = 0; c < next; ++c) out.centroids[c] /= sizes[c];
  return out;
}

void pool_superpixel_features(SuperpixelSet& superpixels,
                              const PixelFeatureMap& map) {
  if (map.image_width != superpixels.width() ||
      map.image_height != superpixels.height())
    throw InvalidArgument("superpixel pooling: feature map and label image "
                          "cover different sizes");
  const int dim = static_cast<int>(map.features.cols());
  Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(superpixels.count, dim);
  std::vector<int> counts(superpixels.count, 0);
  for (int y = 0; y < superpixels.height(); ++y)
    for (int x = 0; x < superpixels.width(); ++x) {
      const int c = superpixels.labels(y, x);
      sums.row(c) += map.features.row(map.row_for_pixel(y, x)).cast<double>();
      ++counts[c];
    }
  superpixels.features.resize(superpixels.count, dim);
  for (int c = 0; c < superpixels.count; ++c) {
    Eigen::VectorXd mean = sums.row(c).transpose() / counts[c];
    const double norm = mean.norm();
    if (norm > 1e-30) mean /= norm;
    superpixels.features.row(c) = mean.cast<float>().transpose();
  }
}

}  // namespace reloc
