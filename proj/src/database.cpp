#include "reloc/database.hpp"

#include <algorithm>
#include <sstream>

#include "reloc/io.hpp"

namespace reloc {

namespace {

bool record_id_less(const SubmapRecord& rec, std::int64_t id) {
  return rec.id < id;
}

void check_record(const SubmapRecord& rec) {
  if (!rec.global.valid())
    throw InvalidArgument("record " + std::to_string(rec.id) +
                          ": global descriptor must have " +
                          std::to_string(GlobalDescriptor::kDim) + " values");
  if (rec.session.empty() ||
      rec.session.find_first_of(" \t\r\n") != std::string::npos)
    throw InvalidArgument("record " + std::to_string(rec.id) +
                          ": session tag must be non-empty without whitespace");
  if (rec.cloud_ref.find_first_of(" \t\r\n") != std::string::npos)
    throw InvalidArgument("record " + std::to_string(rec.id) +
                          ": cloud path must not contain whitespace");
  for (const auto& kp : rec.keypoints)
    if (!kp.position.allFinite() || kp.saliency < 0.0f)
      throw InvalidArgument("record " + std::to_string(rec.id) +
                            ": bad keypoint");
}

}  // namespace

void SubmapDatabase::insert(SubmapRecord rec) {
  check_record(rec);
  const auto it = std::lower_bound(records_.begin(), records_.end(), rec.id,
                                   record_id_less);
  if (it != records_.end() && it->id == rec.id)
    throw ConflictError("submap id " + std::to_string(rec.id) +
                        " already present");
  records_.insert(it, std::move(rec));
  rebuild_index();
}

void SubmapDatabase::rebuild_index() {
  if (records_.size() < kIndexThreshold) {
    index_ = KdTree();
    return;
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(records_.size()),
                    GlobalDescriptor::kDim);
  for (std::size_t i = 0; i < records_.size(); ++i)
    m.row(static_cast<Eigen::Index>(i)) =
        records_[i].global.v.cast<double>().transpose();
  index_ = KdTree(std::move(m));
}

const SubmapRecord* SubmapDatabase::find(std::int64_t id) const {
  const auto it =
      std::lower_bound(records_.begin(), records_.end(), id, record_id_less);
  return it != records_.end() && it->id == id ? &*it : nullptr;
}

std::vector<std::pair<std::int64_t, double>> SubmapDatabase::retrieve_topk(
    const GlobalDescriptor& query, int k) const {
  if (empty()) throw EmptyDatabase("retrieval against an empty database");
  if (k < 1) throw InvalidArgument("retrieve_topk: k must be >= 1");
  if (!query.valid())
    throw InvalidArgument("retrieve_topk: query descriptor dimension");

  std::vector<std::pair<std::int64_t, double>> out;
  if (!index_.empty()) {
    // Records are id-ordered, so the tree's row-index tie-break coincides
    // with the lower-id rule.
    for (const auto& [row, dist] :
         index_.knn(query.v.cast<double>(), k))
      out.emplace_back(records_[static_cast<std::size_t>(row)].id, dist);
    return out;
  }
  std::vector<std::pair<double, std::int64_t>> scan;
  scan.reserve(records_.size());
  for (const auto& rec : records_)
    scan.emplace_back(
        (rec.global.v.cast<double>() - query.v.cast<double>()).norm(), rec.id);
  std::sort(scan.begin(), scan.end());
  const std::size_t take =
      std::min<std::size_t>(static_cast<std::size_t>(k), scan.size());
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i)
    out.emplace_back(scan[i].second, scan[i].first);
  return out;
}

void SubmapDatabase::save(const std::filesystem::path& dir) const {
  std::filesystem::create_directories(dir);
  std::ostringstream index;
  for (const auto& rec : records_) {
    const std::string kp_name = "submap_" + std::to_string(rec.id) + ".kp.r3pc";
    const std::string gd_name =
        "submap_" + std::to_string(rec.id) + ".global.r3ft";
    save_keypoints(dir / kp_name, rec.keypoints);
    Eigen::MatrixXf gd(1, GlobalDescriptor::kDim);
    gd.row(0) = rec.global.v.transpose();
    save_features(dir / gd_name, gd);
    index << "record " << rec.id << ' ' << rec.session << ' '
          << format_transform(rec.root_pose) << ' '
          << (rec.cloud_ref.empty() ? "-" : rec.cloud_ref) << ' ' << gd_name
          << ' ' << kp_name << '\n';
  }
  write_text_file(dir / "index.txt", index.str());
}

SubmapDatabase SubmapDatabase::load(const std::filesystem::path& dir) {
  const std::string text = read_text_file(dir / "index.txt");
  SubmapDatabase db;
  std::istringstream lines(text);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(lines, line)) {
    ++line_no;
    const auto tokens = split_tokens(line);
    if (tokens.empty()) continue;
    if (tokens[0] != "record" || tokens.size() != 13)
      throw FormatError::at_line("bad database index record", line_no);
    SubmapRecord rec;
    try {
      rec.id = std::stoll(tokens[1]);
    } catch (const std::exception&) {
      throw FormatError::at_line("bad submap id '" + tokens[1] + "'", line_no);
    }
    rec.session = tokens[2];
    rec.root_pose = parse_transform(tokens, 3, line_no);
    rec.cloud_ref = tokens[10] == "-" ? "" : tokens[10];
    const Eigen::MatrixXf gd = load_features(dir / tokens[11]);
    if (gd.rows() != 1 || gd.cols() != GlobalDescriptor::kDim)
      throw FormatError::at_line("bad global descriptor shape", line_no);
    rec.global.v = gd.row(0).transpose();
    rec.keypoints = load_keypoints(dir / tokens[12]);
    db.insert(std::move(rec));
  }
  return db;
}

std::vector<double> recall_at_k(
    const std::vector<std::vector<std::int64_t>>& predictions,
    const std::vector<Eigen::Vector3d,
                      Eigen::aligned_allocator<Eigen::Vector3d>>& query_positions,
    const std::map<std::int64_t, Eigen::Vector3d>& submap_positions,
    int k_max, double revisit_radius) {
  if (k_max < 1) throw InvalidArgument("recall_at_k: k_max must be >= 1");
  if (predictions.size() != query_positions.size())
    throw InvalidArgument("recall_at_k: one true position per query required");
  if (predictions.empty())
    throw InvalidArgument("recall_at_k: no queries");

  std::vector<int> hits(static_cast<std::size_t>(k_max), 0);
  for (std::size_t q = 0; q < predictions.size(); ++q) {
    int first_hit = -1;
    const auto& ranked = predictions[q];
    for (std::size_t r = 0; r < ranked.size(); ++r) {
      const auto it = submap_positions.find(ranked[r]);
      if (it == submap_positions.end())
        throw InvalidArgument("recall_at_k: prediction id " +
                              std::to_string(ranked[r]) +
                              " missing from ground truth");
      if ((it->second - query_positions[q]).norm() <= revisit_radius) {
        first_hit = static_cast<int>(r);
        break;
      }
    }
    if (first_hit >= 0)
      for (int k = first_hit; k < k_max; ++k) hits[static_cast<std::size_t>(k)]++;
  }
  std::vector<double> recall(static_cast<std::size_t>(k_max));
  for (int k = 0; k < k_max; ++k)
    recall[static_cast<std::size_t>(k)] =
        static_cast<double>(hits[static_cast<std::size_t>(k)]) /
        static_cast<double>(predictions.size());
  return recall;
}

void save_keypoints(const std::filesystem::path& path,
                    const std::vector<LocalKeypoint>& keypoints) {
  PointCloud cloud;
  cloud.points.reserve(keypoints.size());
  cloud.features.resize(static_cast<Eigen::Index>(keypoints.size()),
                        LocalKeypoint::kDim + 1);
  for (std::size_t i = 0; i < keypoints.size(); ++i) {
    const auto& kp = keypoints[i];
    if (kp.descriptor.size() != LocalKeypoint::kDim)
      throw InvalidArgument("keypoint descriptor must have " +
                            std::to_string(LocalKeypoint::kDim) + " values");
    cloud.points.push_back(kp.position);
    cloud.features.row(static_cast<Eigen::Index>(i)).head(LocalKeypoint::kDim) =
        kp.descriptor.transpose();
    cloud.features(static_cast<Eigen::Index>(i), LocalKeypoint::kDim) =
        kp.saliency;
  }
  save_cloud(path, cloud);
}

std::vector<LocalKeypoint> load_keypoints(const std::filesystem::path& path) {
  const PointCloud cloud = load_cloud(path);
  if (!cloud.empty() && cloud.features.cols() != LocalKeypoint::kDim + 1)
    throw FormatError("keypoint file " + path.filename().string() +
                          " must carry descriptor+saliency features",
                      0);
  std::vector<LocalKeypoint> out;
  out.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    LocalKeypoint kp;
    kp.position = cloud.points[i];
    kp.descriptor = cloud.features.row(static_cast<Eigen::Index>(i))
                        .head(LocalKeypoint::kDim)
                        .transpose();
    kp.saliency =
        cloud.features(static_cast<Eigen::Index>(i), LocalKeypoint::kDim);
    out.push_back(std::move(kp));
  }
  return out;
}

}  // namespace reloc
