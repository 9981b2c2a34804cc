#include "lbgan/mask.hpp"

#include <algorithm>
#include <cmath>

#include "lbgan/errors.hpp"

namespace lbgan {

namespace {

int nearest_with_parity(double value, bool odd) {
  if (odd) return std::max(1, 2 * static_cast<int>(std::lround((value - 1.0) / 2.0)) + 1);
  return std::max(2, 2 * static_cast<int>(std::lround(value / 2.0)));
}

void paint_patch(torch::TensorAccessor<float, 2> mask, const Point& centre, int side, int size) {
  const int r0 = static_cast<int>(std::floor(centre.row)) - side / 2;
  const int c0 = static_cast<int>(std::floor(centre.col)) - side / 2;
  for (int r = std::max(0, r0); r < std::min(size, r0 + side); ++r) {
    for (int c = std::max(0, c0); c < std::min(size, c0 + side); ++c) mask[r][c] = 1.0f;
  }
}

}  // namespace

PatchSizes patch_sizes_for(int image_size) {
  if (image_size <= 0) throw InvalidParameter("image size must be positive");
  if (image_size == kDefaultImageSize) return PatchSizes{};
  const double scale = static_cast<double>(image_size) / kDefaultImageSize;
  return PatchSizes{nearest_with_parity(15.0 * scale, true), nearest_with_parity(20.0 * scale, false)};
}

torch::Tensor build_mask(const LandmarkSet& landmarks, int image_size) {
  if (!landmarks.within(image_size, image_size)) throw InvalidInput("landmarks outside the image");
  const PatchSizes sizes = patch_sizes_for(image_size);
  auto mask = torch::zeros({image_size, image_size}, torch::kFloat32);
  auto access = mask.accessor<float, 2>();
  paint_patch(access, landmarks.left_eye, sizes.eye, image_size);
  paint_patch(access, landmarks.right_eye, sizes.eye, image_size);
  paint_patch(access, landmarks.mouth_center, sizes.mouth, image_size);
  return mask;
}

torch::Tensor full_mask(int image_size) { return torch::ones({image_size, image_size}, torch::kFloat32); }

}  // namespace lbgan
