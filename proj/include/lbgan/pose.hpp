#pragma once

#include <array>
#include <cstddef>
#include <span>

#include <torch/torch.h>

namespace lbgan {

// Yaw grid: -90..90 in 15 degree steps.
inline constexpr int kNumPoses = 13;
inline constexpr int kPoseStepDegrees = 15;
inline constexpr int kFrontalIndex = 6;

struct PoseLabel {
  int degrees = 0;

  friend bool operator==(const PoseLabel&, const PoseLabel&) = default;
};

struct IdentityLabel {
  int id = 0;

  friend bool operator==(const IdentityLabel&, const IdentityLabel&) = default;
};

inline constexpr PoseLabel kFrontalPose{0};

/// Position of `pose` on the ascending yaw grid. Throws InvalidPose off-grid.
int pose_to_index(PoseLabel pose);

/// Inverse of pose_to_index. Throws InvalidIndex outside [0, 12].
PoseLabel index_to_pose(int index);

bool is_grid_pose(int degrees);

const std::array<int, kNumPoses>& pose_grid();

/// Pose-control vector: one non-negative weight per yaw bin, summing to one.
class RemoteCode {
 public:
  static RemoteCode one_hot(int target_index);

  /// Validates non-negativity and unit sum (1e-6) before accepting `weights`.
  static RemoteCode from_weights(std::span<const double> weights);

  const std::array<double, kNumPoses>& weights() const { return weights_; }
  double operator[](std::size_t i) const { return weights_[i]; }

  bool is_one_hot() const;
  /// Index of the unit entry; throws InvalidParameter when not one-hot.
  int target_index() const;

  /// [13] tensor of the weights in the requested dtype.
  torch::Tensor to_tensor(torch::Dtype dtype = torch::kFloat32) const;

  friend bool operator==(const RemoteCode&, const RemoteCode&) = default;

 private:
  RemoteCode() = default;
  std::array<double, kNumPoses> weights_{};
};

/// One-hot code selecting `target_index`. Throws InvalidIndex out of range.
RemoteCode make_remote_code(int target_index);

/// (1 - alpha) * a + alpha * b; alpha must lie in [0, 1].
RemoteCode interpolate_codes(const RemoteCode& a, const RemoteCode& b, double alpha);

/// Code for an arbitrary yaw in [-90, 90]: one-hot on the grid, otherwise the
/// two bracketing grid codes weighted by distance. Throws InvalidRequest.
RemoteCode code_for_degrees(double degrees);

/// [batch, 13] one-hot matrix for a list of target indices.
torch::Tensor one_hot_codes(const torch::Tensor& indices, torch::Dtype dtype = torch::kFloat32);

}  // namespace lbgan
