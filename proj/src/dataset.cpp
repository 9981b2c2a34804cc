#include "lbgan/dataset.hpp"

#include <fstream>
#include <set>

#include "lbgan/errors.hpp"
#include "lbgan/mask.hpp"

namespace lbgan {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json point_json(const Point& p) { return json::array({p.row, p.col}); }

Point point_from(const json& j) {
  if (!j.is_array() || j.size() != 2) throw InvalidInput("landmark must be a [row, col] pair");
  return Point{j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

std::string to_string(Split split) { return split == Split::kTrain ? "train" : "test"; }

Split split_from_string(const std::string& name) {
  if (name == "train") return Split::kTrain;
  if (name == "test") return Split::kTest;
  throw InvalidInput("unknown split '" + name + "'");
}

void DatasetManifest::validate() const {
  if (n_id < 1) throw InvalidInput("manifest n_id must be positive");
  if (image_size < 8) throw InvalidInput("manifest image_size must be at least 8");
  for (const auto& r : records) {
    if (r.identity.id < 0 || r.identity.id >= n_id) {
      throw InvalidInput("record " + r.path + " has identity outside [0, n_id)");
    }
    if (!is_grid_pose(r.pose.degrees)) throw InvalidPose("record " + r.path + " has off-grid pose");
    if (!r.landmarks.within(image_size, image_size)) throw InvalidInput("record " + r.path + " has landmarks out of bounds");
  }
}

json manifest_to_json(const DatasetManifest& manifest) {
  json records = json::array();
  for (const auto& r : manifest.records) {
    records.push_back({{"path", r.path},
                       {"id", r.identity.id},
                       {"pose_degrees", r.pose.degrees},
                       {"identity_seed", r.identity_seed},
                       {"landmarks",
                        {{"left_eye", point_json(r.landmarks.left_eye)},
                         {"right_eye", point_json(r.landmarks.right_eye)},
                         {"mouth", point_json(r.landmarks.mouth_center)}}}});
  }
  return json{{"version", manifest.version}, {"n_id", manifest.n_id},     {"image_size", manifest.image_size},
              {"split", to_string(manifest.split)}, {"seed", manifest.seed}, {"records", std::move(records)}};
}

DatasetManifest manifest_from_json(const json& j, const fs::path& root) {
  DatasetManifest m;
  try {
    m.version = j.at("version").get<int>();
    if (m.version != kManifestVersion) throw InvalidInput("unsupported manifest version " + std::to_string(m.version));
    m.n_id = j.at("n_id").get<int>();
    m.image_size = j.at("image_size").get<int>();
    m.split = split_from_string(j.value("split", std::string("train")));
    m.seed = j.value("seed", std::uint64_t{0});
    for (const auto& r : j.at("records")) {
      const auto& lm = r.at("landmarks");
      m.records.push_back(ManifestRecord{r.at("path").get<std::string>(), IdentityLabel{r.at("id").get<int>()},
                                         PoseLabel{r.at("pose_degrees").get<int>()},
                                         LandmarkSet{point_from(lm.at("left_eye")), point_from(lm.at("right_eye")),
                                                     point_from(lm.at("mouth"))},
                                         r.value("identity_seed", std::uint64_t{0})});
    }
  } catch (const json::exception& e) {
    throw InvalidInput(std::string("malformed manifest: ") + e.what());
  }
  m.root = root;
  m.validate();
  return m;
}

void save_manifest(const DatasetManifest& manifest, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << manifest_to_json(manifest).dump(1) << '\n';
  if (!out) throw IoError("cannot write " + path.string());
}

DatasetManifest load_manifest(const fs::path& path) {
  const fs::path file = fs::is_directory(path) ? path / "manifest.json" : path;
  std::ifstream in(file);
  if (!in) throw IoError("cannot read manifest " + file.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw InvalidInput("manifest " + file.string() + " is not valid JSON: " + e.what());
  }
  return manifest_from_json(j, file.parent_path());
}

std::vector<std::size_t> sample_record_indices(const DatasetManifest& manifest, std::size_t batch_size,
                                               bool restrict_frontal, Rng& rng) {
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < manifest.records.size(); ++i) {
    if (!restrict_frontal || manifest.records[i].pose == kFrontalPose) eligible.push_back(i);
  }
  if (eligible.empty()) {
    throw SamplingError(restrict_frontal ? "no frontal records to sample from" : "manifest has no records");
  }
  std::uniform_int_distribution<std::size_t> pick(0, eligible.size() - 1);
  std::vector<std::size_t> out(batch_size);
  for (auto& idx : out) idx = eligible[pick(rng)];
  return out;
}

Dataset::Dataset(DatasetManifest manifest) : manifest_(std::move(manifest)) {
  manifest_.validate();
  const auto n = static_cast<std::int64_t>(manifest_.records.size());
  const int size = manifest_.image_size;
  images_ = torch::empty({n, kImageChannels, size, size}, torch::kFloat32);
  masks_ = torch::empty({n, 1, size, size}, torch::kFloat32);
  identities_ = torch::empty({n}, torch::kLong);
  pose_indices_ = torch::empty({n}, torch::kLong);
  for (std::int64_t i = 0; i < n; ++i) {
    const auto& r = manifest_.records[static_cast<std::size_t>(i)];
    auto image = to_face_tensor(read_png(manifest_.resolve(r)));
    check_face_image(image, size);
    images_[i].copy_(image);
    masks_[i][0].copy_(build_mask(r.landmarks, size));
    identities_[i] = r.identity.id;
    pose_indices_[i] = pose_to_index(r.pose);
    lookup_.emplace(std::make_pair(r.identity.id, pose_to_index(r.pose)), static_cast<std::size_t>(i));
  }
}

Batch Dataset::gather(const std::vector<std::size_t>& records) const {
  auto index = torch::empty({static_cast<std::int64_t>(records.size())}, torch::kLong);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i] >= size()) throw InvalidIndex("record index out of range");
    index[static_cast<std::int64_t>(i)] = static_cast<std::int64_t>(records[i]);
  }
  return Batch{images_.index_select(0, index), identities_.index_select(0, index),
               pose_indices_.index_select(0, index), masks_.index_select(0, index), records};
}

Batch Dataset::sample(std::size_t batch_size, bool restrict_frontal, Rng& rng) const {
  return gather(sample_record_indices(manifest_, batch_size, restrict_frontal, rng));
}

std::optional<std::size_t> Dataset::find(int identity, int pose_index) const {
  auto it = lookup_.find({identity, pose_index});
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::size_t> Dataset::records_at_pose(int pose_index) const {
  std::vector<std::size_t> out;
  for (int id = 0; id < manifest_.n_id; ++id) {
    if (auto r = find(id, pose_index)) out.push_back(*r);
  }
  return out;
}

Batch sample_batch(const Dataset& dataset, std::size_t batch_size, bool restrict_frontal, Rng& rng) {
  return dataset.sample(batch_size, restrict_frontal, rng);
}

}  // namespace lbgan
