#include "lbgan/pose.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "lbgan/errors.hpp"

namespace lbgan {

namespace {

constexpr std::array<int, kNumPoses> kGrid = [] {
  std::array<int, kNumPoses> grid{};
  for (int i = 0; i < kNumPoses; ++i) grid[i] = -90 + kPoseStepDegrees * i;
  return grid;
}();

}  // namespace

const std::array<int, kNumPoses>& pose_grid() { return kGrid; }

bool is_grid_pose(int degrees) {
  return std::find(kGrid.begin(), kGrid.end(), degrees) != kGrid.end();
}

int pose_to_index(PoseLabel pose) {
  auto it = std::find(kGrid.begin(), kGrid.end(), pose.degrees);
  if (it == kGrid.end()) {
    throw InvalidPose("yaw " + std::to_string(pose.degrees) + " is not on the 15-degree grid");
  }
  return static_cast<int>(it - kGrid.begin());
}

PoseLabel index_to_pose(int index) {
  if (index < 0 || index >= kNumPoses) {
    throw InvalidIndex("pose index " + std::to_string(index) + " outside [0, 12]");
  }
  return PoseLabel{kGrid[index]};
}

RemoteCode RemoteCode::one_hot(int target_index) {
  if (target_index < 0 || target_index >= kNumPoses) {
    throw InvalidIndex("remote code index " + std::to_string(target_index) + " outside [0, 12]");
  }
  RemoteCode code;
  code.weights_[target_index] = 1.0;
  return code;
}

RemoteCode RemoteCode::from_weights(std::span<const double> weights) {
  if (weights.size() != kNumPoses) {
    throw InvalidParameter("remote code needs 13 weights, got " + std::to_string(weights.size()));
  }
  double sum = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw InvalidParameter("remote code weights must be finite and >= 0");
    sum += w;
  }
  if (std::abs(sum - 1.0) > 1e-6) throw InvalidParameter("remote code weights must sum to 1");
  RemoteCode code;
  std::copy(weights.begin(), weights.end(), code.weights_.begin());
  return code;
}

bool RemoteCode::is_one_hot() const {
  int ones = 0;
  int zeros = 0;
  for (double w : weights_) {
    if (w == 1.0) ++ones;
    else if (w == 0.0) ++zeros;
  }
  return ones == 1 && zeros == kNumPoses - 1;
}

int RemoteCode::target_index() const {
  if (!is_one_hot()) throw InvalidParameter("remote code is not one-hot");
  return static_cast<int>(std::find(weights_.begin(), weights_.end(), 1.0) - weights_.begin());
}

torch::Tensor RemoteCode::to_tensor(torch::Dtype dtype) const {
  auto t = torch::empty({kNumPoses}, torch::kFloat64);
  std::copy(weights_.begin(), weights_.end(), t.data_ptr<double>());
  return t.to(dtype);
}

RemoteCode make_remote_code(int target_index) { return RemoteCode::one_hot(target_index); }

RemoteCode interpolate_codes(const RemoteCode& a, const RemoteCode& b, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw InvalidParameter("interpolation weight must lie in [0, 1]");
  }
  if (alpha == 0.0) return a;
  if (alpha == 1.0) return b;
  std::array<double, kNumPoses> mixed{};
  for (int i = 0; i < kNumPoses; ++i) mixed[i] = (1.0 - alpha) * a[i] + alpha * b[i];
  return RemoteCode::from_weights(mixed);
}

RemoteCode code_for_degrees(double degrees) {
  if (!std::isfinite(degrees) || degrees < -90.0 || degrees > 90.0) {
    throw InvalidRequest("target yaw must lie in [-90, 90] degrees");
  }
  const double position = (degrees + 90.0) / kPoseStepDegrees;
  const double nearest = std::round(position);
  if (std::abs(position - nearest) < 1e-9) return make_remote_code(static_cast<int>(nearest));
  const int lower = static_cast<int>(std::floor(position));
  return interpolate_codes(make_remote_code(lower), make_remote_code(lower + 1), position - lower);
}

torch::Tensor one_hot_codes(const torch::Tensor& indices, torch::Dtype dtype) {
  return torch::one_hot(indices.to(torch::kLong), kNumPoses).to(dtype);
}

}  // namespace lbgan
