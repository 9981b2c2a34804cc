#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <opencv2/core.hpp>
#include <torch/torch.h>

namespace lbgan {

inline constexpr int kImageChannels = 3;
inline constexpr int kDefaultImageSize = 96;

/// Continuous image coordinate. Pixel (r, c) covers [r, r + 1) x [c, c + 1),
/// so its centre sits at (r + 0.5, c + 0.5) and the vertical centre line of a
/// W-wide image is col = W / 2.
struct Point {
  double row = 0.0;
  double col = 0.0;

  friend bool operator==(const Point&, const Point&) = default;
};

struct LandmarkSet {
  Point left_eye;
  Point right_eye;
  Point mouth_center;

  bool within(int height, int width) const;

  friend bool operator==(const LandmarkSet&, const LandmarkSet&) = default;
};

/// Canonical landmark positions for an aligned image of the given size.
/// Eyes at (0.42 H, 0.31 W) and (0.42 H, 0.69 W), mouth at (0.75 H, 0.50 W).
LandmarkSet alignment_template(int image_size);

// Face images are float tensors of shape [3, H, W] (or [B, 3, H, W]) with
// values in [-1, 1]. Raw images are 8-bit RGB cv::Mat (CV_8UC3, RGB order).

/// Throws InvalidInput unless `image` is [3, size, size] (size > 0 when given).
void check_face_image(const torch::Tensor& image, int size = -1);

/// Exact linear intensity map v / 127.5 - 1 from an RGB8 matrix to [3, H, W].
torch::Tensor to_face_tensor(const cv::Mat& rgb8);

/// Inverse map for any [3, H, W] image (tiles and grids included), rounding
/// to the nearest 8-bit level and saturating.
cv::Mat to_rgb8(const torch::Tensor& image);

cv::Mat read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const cv::Mat& rgb8);
void write_png(const std::filesystem::path& path, const torch::Tensor& image);

/// 2x3 similarity transform (row-major, maps (col, row) source points to
/// destination points) that best aligns `from` onto `to` in least squares.
/// Throws AlignmentError when the eyes coincide.
cv::Matx23d fit_similarity(const LandmarkSet& from, const LandmarkSet& to);

LandmarkSet transform_landmarks(const LandmarkSet& landmarks, const cv::Matx23d& transform);

struct PreprocessedFace {
  torch::Tensor image;  // [3, size, size] in [-1, 1]
  LandmarkSet landmarks;
};

/// Similarity-aligns a raw face onto the canonical template, resamples it to
/// `image_size` and scales intensities to [-1, 1].
PreprocessedFace preprocess(const cv::Mat& raw_rgb8, const LandmarkSet& landmarks, int image_size);

/// Concatenates [3, H, W_i] tiles left to right into one [3, H, sum W_i] image.
torch::Tensor hconcat_tiles(const std::vector<torch::Tensor>& tiles);

}  // namespace lbgan
