#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <torch/torch.h>

#include "lbgan/pose.hpp"
#include "lbgan/training.hpp"

namespace lbgan {

/// A trained bundle frozen for synthesis. Every call runs without autograd
/// and leaves the parameters untouched; calls on an empty model throw StateError.
class FrozenModel {
 public:
  FrozenModel() = default;
  explicit FrozenModel(std::shared_ptr<ModelBundle> bundle);

  static FrozenModel load(const std::filesystem::path& checkpoint_dir);

  bool loaded() const { return bundle_ != nullptr; }
  int image_size() const;
  ModelBundle& bundle() const;

 private:
  std::shared_ptr<ModelBundle> bundle_;
};

struct RotationRequest {
  torch::Tensor input;  // aligned [3, S, S] face in [-1, 1]
  double target_degrees = 0.0;

  /// Throws InvalidRequest for a target outside [-90, 90] or a malformed image.
  void validate(int image_size) const;
};

/// G_N(x). Accepts [3, S, S] or [B, 3, S, S].
torch::Tensor frontalize(const FrozenModel& model, const torch::Tensor& x);

/// G_E(x, G_N(x), code) with an explicit (possibly interpolated) code.
torch::Tensor rotate_with_code(const FrozenModel& model, const torch::Tensor& x, const RemoteCode& code);

/// Batched rotation with one code row per image: x [B, 3, S, S], codes [B, 13].
torch::Tensor rotate_batch(const FrozenModel& model, const torch::Tensor& x, const torch::Tensor& codes);

/// Grid targets use their one-hot code; others blend the two bracketing codes.
torch::Tensor rotate(const FrozenModel& model, const RotationRequest& request);

/// Input tile followed by one rotated tile per target, left to right.
torch::Tensor pose_sweep_grid(const FrozenModel& model, const torch::Tensor& x, const std::vector<double>& targets);

/// Decoded interpolants of the two identity representations at
/// alpha = k / (n_steps - 1), k = 0..n_steps-1, all with the same code.
std::vector<torch::Tensor> identity_morph_tiles(const FrozenModel& model, const torch::Tensor& x1,
                                                const torch::Tensor& x2, int n_steps,
                                                const RemoteCode& code = make_remote_code(kFrontalIndex));

/// x1, the morph tiles, then x2.
torch::Tensor identity_morph_grid(const FrozenModel& model, const torch::Tensor& x1, const torch::Tensor& x2,
                                  int n_steps, const RemoteCode& code = make_remote_code(kFrontalIndex));

/// Signed, zero-padded degrees: 30 -> "+030", -7.5 -> "-007.5".
std::string format_degrees(double degrees);

/// prefix + "_" + format_degrees(degrees) + ".png", e.g. out_+030.png.
std::string output_filename(const std::string& prefix, double degrees);

/// The 13 grid yaws in ascending order.
std::vector<double> all_grid_degrees();

}  // namespace lbgan
