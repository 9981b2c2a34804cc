#pragma once

#include <cstdint>
#include <filesystem>

#include <opencv2/core.hpp>

#include "lbgan/image.hpp"
#include "lbgan/pose.hpp"

namespace lbgan {

struct DatasetManifest;

// Appearance of one synthetic subject. Every field is drawn from
// identity_seed; lengths are fractions of the image width.
struct SyntheticFaceSpec {
  std::uint64_t identity_seed = 0;
  double face_hue = 0.08;        // [0, 1) hue circle
  double skin_saturation = 0.4;
  double skin_value = 0.75;
  double eye_spacing = 1.0;      // multiplier of the template inter-eye distance
  double eye_size = 0.045;       // eye radius
  double mouth_width = 0.10;     // mouth half width
  double nose_length = 0.12;
  double hair_hue = 0.08;
  double hair_value = 0.25;
  double iris_hue = 0.6;
  std::uint64_t background_seed = 0;

  static SyntheticFaceSpec from_seed(std::uint64_t identity_seed);

  /// Subject whose frontal render has its landmarks exactly on the alignment
  /// template.
  static SyntheticFaceSpec canonical();
};

struct RenderedFace {
  cv::Mat rgb8;  // CV_8UC3, RGB
  LandmarkSet landmarks;
};

/// Pure function of (spec, pose, image_size). Yaw moves facial features
/// horizontally in proportion to sin(yaw), foreshortens the face contour and
/// hides the far eye beyond 60 degrees.
RenderedFace render_face(const SyntheticFaceSpec& spec, double yaw_degrees, int image_size);

/// Landmarks of render_face without rasterising.
LandmarkSet synthetic_landmarks(const SyntheticFaceSpec& spec, double yaw_degrees, int image_size);

/// Seed of identity `index` in a dataset generated with `dataset_seed`.
std::uint64_t identity_seed_for(std::uint64_t dataset_seed, int index);

enum class Split { kTrain, kTest };

/// Renders every identity at all 13 grid poses into out_dir/images and writes
/// out_dir/manifest.json. Deterministic in (n_identities, seed, image_size).
DatasetManifest generate_synthetic_dataset(int n_identities, std::uint64_t seed, int image_size,
                                           const std::filesystem::path& out_dir, Split split = Split::kTrain);

}  // namespace lbgan
