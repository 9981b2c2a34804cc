#pragma once

#include <torch/torch.h>

#include "lbgan/image.hpp"

namespace lbgan {

struct PatchSizes {
  int eye = 15;
  int mouth = 20;
};

/// Patch side lengths at `image_size`: 15 (eyes) and 20 (mouth) at 96 pixels,
/// scaled proportionally and rounded to the nearest value of the same parity.
PatchSizes patch_sizes_for(int image_size);

/// Binary [H, W] float mask: union of a square patch centred on each eye and
/// one on the mouth centre, clipped at the image border.
///
/// A patch of side n centred on the pixel c containing a landmark covers
/// [c - n/2, c - n/2 + n - 1]
/// (integer division), i.e. odd patches are symmetric and even ones extend
/// one pixel further towards the origin.
torch::Tensor build_mask(const LandmarkSet& landmarks, int image_size);

/// All-ones [H, W] mask; turns attention L2 into plain image L2.
torch::Tensor full_mask(int image_size);

}  // namespace lbgan
