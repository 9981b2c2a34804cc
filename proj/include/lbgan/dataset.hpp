#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "lbgan/image.hpp"
#include "lbgan/pose.hpp"
#include "lbgan/synthetic.hpp"

namespace lbgan {

using Rng = std::mt19937_64;

inline constexpr int kManifestVersion = 1;

struct ManifestRecord {
  std::string path;  // relative to the manifest directory
  IdentityLabel identity;
  PoseLabel pose;
  LandmarkSet landmarks;
  std::uint64_t identity_seed = 0;  // 0 when unknown (non-synthetic data)
};

struct DatasetManifest {
  int version = kManifestVersion;
  int n_id = 0;
  int image_size = 0;
  Split split = Split::kTrain;
  std::uint64_t seed = 0;
  std::vector<ManifestRecord> records;
  std::filesystem::path root;  // directory holding manifest.json; not serialised

  /// Throws InvalidInput if a record breaks the label or landmark invariants.
  void validate() const;

  std::filesystem::path resolve(const ManifestRecord& record) const { return root / record.path; }
};

std::string to_string(Split split);
Split split_from_string(const std::string& name);

nlohmann::json manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const nlohmann::json& json, const std::filesystem::path& root);

void save_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

/// Accepts either the manifest file or the directory containing manifest.json.
DatasetManifest load_manifest(const std::filesystem::path& path);

/// Uniform draws with replacement from all records (p_data) or, with
/// restrict_frontal, from the 0-degree records only (p_m). Throws
/// SamplingError when the eligible set is empty.
std::vector<std::size_t> sample_record_indices(const DatasetManifest& manifest, std::size_t batch_size,
                                               bool restrict_frontal, Rng& rng);

struct Batch {
  torch::Tensor images;        // [B, 3, H, W] float
  torch::Tensor identities;    // [B] long
  torch::Tensor pose_indices;  // [B] long
  torch::Tensor masks;         // [B, 1, H, W] float attention masks
  std::vector<std::size_t> records;

  std::int64_t size() const { return images.size(0); }
};

/// A manifest with every image decoded into memory.
class Dataset {
 public:
  explicit Dataset(DatasetManifest manifest);

  const DatasetManifest& manifest() const { return manifest_; }
  int image_size() const { return manifest_.image_size; }
  std::size_t size() const { return manifest_.records.size(); }

  const torch::Tensor& images() const { return images_; }
  const torch::Tensor& masks() const { return masks_; }

  Batch gather(const std::vector<std::size_t>& records) const;

  Batch sample(std::size_t batch_size, bool restrict_frontal, Rng& rng) const;

  /// Record showing `identity` at the grid pose `pose_index`, if present.
  std::optional<std::size_t> find(int identity, int pose_index) const;

  /// Records with the given pose index, ordered by identity.
  std::vector<std::size_t> records_at_pose(int pose_index) const;

 private:
  DatasetManifest manifest_;
  torch::Tensor images_;
  torch::Tensor masks_;
  torch::Tensor identities_;
  torch::Tensor pose_indices_;
  std::map<std::pair<int, int>, std::size_t> lookup_;
};

Batch sample_batch(const Dataset& dataset, std::size_t batch_size, bool restrict_frontal, Rng& rng);

}  // namespace lbgan
