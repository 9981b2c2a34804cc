#include "lbgan/image.hpp"

#include <cmath>
#include <complex>
#include <cstring>
#include <string>

#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>

#include "lbgan/errors.hpp"

namespace lbgan {

bool LandmarkSet::within(int height, int width) const {
  auto inside = [&](const Point& p) {
    return p.row >= 0.0 && p.col >= 0.0 && p.row < height && p.col < width;
  };
  return inside(left_eye) && inside(right_eye) && inside(mouth_center);
}

LandmarkSet alignment_template(int image_size) {
  const double s = image_size;
  return LandmarkSet{{0.42 * s, 0.31 * s}, {0.42 * s, 0.69 * s}, {0.75 * s, 0.50 * s}};
}

void check_face_image(const torch::Tensor& image, int size) {
  if (!image.defined() || image.dim() != 3 || image.size(0) != kImageChannels) {
    throw InvalidInput("face image must be a [3, H, W] tensor");
  }
  if (image.size(1) != image.size(2)) throw InvalidInput("face image must be square");
  if (size > 0 && image.size(1) != size) {
    throw InvalidInput("face image is " + std::to_string(image.size(1)) + " pixels, expected " +
                       std::to_string(size));
  }
}

torch::Tensor to_face_tensor(const cv::Mat& rgb8) {
  if (rgb8.empty() || rgb8.type() != CV_8UC3) throw InvalidInput("expected an 8-bit RGB image");
  cv::Mat contiguous = rgb8.isContinuous() ? rgb8 : rgb8.clone();
  auto hwc = torch::from_blob(contiguous.data, {contiguous.rows, contiguous.cols, 3}, torch::kUInt8);
  return hwc.permute({2, 0, 1}).to(torch::kFloat32).div(127.5).sub(1.0).contiguous();
}

cv::Mat to_rgb8(const torch::Tensor& image) {
  if (image.dim() != 3 || image.size(0) != kImageChannels) throw InvalidInput("expected a [3, H, W] image");
  auto levels = image.detach().to(torch::kCPU, torch::kFloat64).add(1.0).mul(127.5).round().clamp(0, 255);
  auto hwc = levels.to(torch::kUInt8).permute({1, 2, 0}).contiguous();
  cv::Mat out(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_8UC3);
  std::memcpy(out.data, hwc.data_ptr<std::uint8_t>(), static_cast<std::size_t>(hwc.numel()));
  return out;
}

cv::Mat read_png(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw IoError("cannot read image " + path.string());
  cv::Mat rgb;
  cv::cvtColor(bgr, rgb, cv::COLOR_BGR2RGB);
  return rgb;
}

void write_png(const std::filesystem::path& path, const cv::Mat& rgb8) {
  cv::Mat bgr;
  cv::cvtColor(rgb8, bgr, cv::COLOR_RGB2BGR);
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), bgr);
  } catch (const cv::Exception& e) {
    throw IoError("cannot write " + path.string() + ": " + e.what());
  }
  if (!ok) throw IoError("cannot write " + path.string());
}

void write_png(const std::filesystem::path& path, const torch::Tensor& image) {
  write_png(path, to_rgb8(image));
}

cv::Matx23d fit_similarity(const LandmarkSet& from, const LandmarkSet& to) {
  using C = std::complex<double>;
  auto as_complex = [](const Point& p) { return C(p.col, p.row); };
  const C src[3] = {as_complex(from.left_eye), as_complex(from.right_eye), as_complex(from.mouth_center)};
  const C dst[3] = {as_complex(to.left_eye), as_complex(to.right_eye), as_complex(to.mouth_center)};
  if (std::abs(src[1] - src[0]) < 1e-3) throw AlignmentError("eye landmarks coincide");

  const C src_mean = (src[0] + src[1] + src[2]) / 3.0;
  const C dst_mean = (dst[0] + dst[1] + dst[2]) / 3.0;
  C cross = 0.0;
  double energy = 0.0;
  for (int i = 0; i < 3; ++i) {
    cross += (dst[i] - dst_mean) * std::conj(src[i] - src_mean);
    energy += std::norm(src[i] - src_mean);
  }
  // z -> a (z - src_mean) + dst_mean, with a = scale * e^{i theta}
  const C a = cross / energy;
  const C t = dst_mean - a * src_mean;
  return cv::Matx23d(a.real(), -a.imag(), t.real(), a.imag(), a.real(), t.imag());
}

LandmarkSet transform_landmarks(const LandmarkSet& landmarks, const cv::Matx23d& m) {
  auto apply = [&](const Point& p) {
    return Point{m(1, 0) * p.col + m(1, 1) * p.row + m(1, 2), m(0, 0) * p.col + m(0, 1) * p.row + m(0, 2)};
  };
  return LandmarkSet{apply(landmarks.left_eye), apply(landmarks.right_eye), apply(landmarks.mouth_center)};
}

PreprocessedFace preprocess(const cv::Mat& raw_rgb8, const LandmarkSet& landmarks, int image_size) {
  if (image_size < 8) throw InvalidParameter("image size must be at least 8");
  if (raw_rgb8.empty() || raw_rgb8.type() != CV_8UC3) throw InvalidInput("expected an 8-bit RGB image");
  if (!landmarks.within(raw_rgb8.rows, raw_rgb8.cols)) throw InvalidInput("landmarks outside the raw image");

  const cv::Matx23d transform = fit_similarity(landmarks, alignment_template(image_size));
  // OpenCV places pixel centres at integer coordinates; shift the translation
  // so the warp matches the half-open pixel convention used here.
  cv::Matx23d cv_transform = transform;
  for (int i = 0; i < 2; ++i) {
    cv_transform(i, 2) += 0.5 * (transform(i, 0) + transform(i, 1)) - 0.5;
  }
  cv::Mat aligned;
  cv::warpAffine(raw_rgb8, aligned, cv::Mat(cv_transform), cv::Size(image_size, image_size), cv::INTER_LINEAR,
                 cv::BORDER_REPLICATE);
  return PreprocessedFace{to_face_tensor(aligned), transform_landmarks(landmarks, transform)};
}

torch::Tensor hconcat_tiles(const std::vector<torch::Tensor>& tiles) {
  if (tiles.empty()) throw InvalidInput("no tiles to concatenate");
  for (const auto& t : tiles) {
    if (t.dim() != 3 || t.size(1) != tiles.front().size(1)) throw InvalidInput("tiles must share height");
  }
  return torch::cat(tiles, 2);
}

}  // namespace lbgan
