#include "lbgan/inference.hpp"

#include <cmath>
#include <cstdio>

#include "lbgan/errors.hpp"
#include "lbgan/image.hpp"

namespace lbgan {

namespace {

torch::Tensor as_batch(const torch::Tensor& x, int size) {
  if (x.dim() == 3) {
    check_face_image(x, size);
    return x.unsqueeze(0);
  }
  if (x.dim() == 4 && x.size(1) == kImageChannels && x.size(2) == size && x.size(3) == size) return x;
  throw InvalidInput("expected a [3, " + std::to_string(size) + ", " + std::to_string(size) + "] face or a batch of them");
}

torch::Tensor like_input(const torch::Tensor& out, const torch::Tensor& in) { return in.dim() == 3 ? out[0] : out; }

}  // namespace

FrozenModel::FrozenModel(std::shared_ptr<ModelBundle> bundle) : bundle_(std::move(bundle)) {
  if (bundle_) bundle_->set_train_mode(false);
}

FrozenModel FrozenModel::load(const std::filesystem::path& checkpoint_dir) {
  return FrozenModel(std::shared_ptr<ModelBundle>(load_checkpoint(checkpoint_dir)));
}

ModelBundle& FrozenModel::bundle() const {
  if (!bundle_) throw StateError("no model loaded");
  return *bundle_;
}

int FrozenModel::image_size() const { return bundle().config.network.image_size; }

void RotationRequest::validate(int image_size) const {
  if (!std::isfinite(target_degrees) || target_degrees < -90.0 || target_degrees > 90.0) {
    throw InvalidRequest("target yaw " + std::to_string(target_degrees) + " is outside [-90, 90]");
  }
  try {
    check_face_image(input, image_size);
  } catch (const InvalidInput& e) {
    throw InvalidRequest(e.what());
  }
}

torch::Tensor frontalize(const FrozenModel& model, const torch::Tensor& x) {
  auto& b = model.bundle();
  torch::NoGradGuard no_grad;
  return like_input(b.g_n->forward(as_batch(x, model.image_size())), x);
}

torch::Tensor rotate_batch(const FrozenModel& model, const torch::Tensor& x, const torch::Tensor& codes) {
  auto& b = model.bundle();
  torch::NoGradGuard no_grad;
  auto xb = as_batch(x, model.image_size());
  if (codes.dim() != 2 || codes.size(0) != xb.size(0) || codes.size(1) != kNumPoses) {
    throw InvalidRequest("codes must be [B, 13] matching the batch");
  }
  return b.g_e->forward(xb, b.g_n->forward(xb), codes.to(xb.dtype()));
}

torch::Tensor rotate_with_code(const FrozenModel& model, const torch::Tensor& x, const RemoteCode& code) {
  auto xb = as_batch(x, model.image_size());
  auto codes = code.to_tensor(xb.scalar_type()).unsqueeze(0).expand({xb.size(0), kNumPoses});
  return like_input(rotate_batch(model, xb, codes), x);
}

torch::Tensor rotate(const FrozenModel& model, const RotationRequest& request) {
  request.validate(model.image_size());
  return rotate_with_code(model, request.input, code_for_degrees(request.target_degrees));
}

torch::Tensor pose_sweep_grid(const FrozenModel& model, const torch::Tensor& x, const std::vector<double>& targets) {
  std::vector<torch::Tensor> tiles{x};
  for (double deg : targets) tiles.push_back(rotate(model, {x, deg}));
  return hconcat_tiles(tiles);
}

std::vector<torch::Tensor> identity_morph_tiles(const FrozenModel& model, const torch::Tensor& x1,
                                                const torch::Tensor& x2, int n_steps, const RemoteCode& code) {
  if (n_steps < 2) throw InvalidRequest("identity morph needs at least 2 steps");
  check_face_image(x1, model.image_size());
  check_face_image(x2, model.image_size());
  auto& b = model.bundle();
  torch::NoGradGuard no_grad;
  auto pair = torch::stack({x1, x2});
  auto reps = b.g_e->encode(pair, b.g_n->forward(pair));
  auto c = code.to_tensor(reps.scalar_type()).unsqueeze(0);
  std::vector<torch::Tensor> tiles;
  for (int k = 0; k < n_steps; ++k) {
    const double alpha = static_cast<double>(k) / (n_steps - 1);
    tiles.push_back(b.g_e->decode(interpolate_identities(reps[0], reps[1], alpha).unsqueeze(0), c)[0]);
  }
  return tiles;
}

torch::Tensor identity_morph_grid(const FrozenModel& model, const torch::Tensor& x1, const torch::Tensor& x2,
                                  int n_steps, const RemoteCode& code) {
  auto tiles = identity_morph_tiles(model, x1, x2, n_steps, code);
  tiles.insert(tiles.begin(), x1);
  tiles.push_back(x2);
  return hconcat_tiles(tiles);
}

std::string format_degrees(double degrees) {
  const double mag = std::round(std::abs(degrees) * 1000.0) / 1000.0;
  const double whole = std::floor(mag);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%c%03d", degrees < 0 ? '-' : '+', static_cast<int>(whole));
  std::string out = buf;
  if (mag != whole) {
    std::snprintf(buf, sizeof buf, "%.3f", mag - whole);
    std::string frac = buf + 1;  // drop the leading 0
    while (frac.back() == '0') frac.pop_back();
    out += frac;
  }
  return out;
}

std::string output_filename(const std::string& prefix, double degrees) {
  return prefix + "_" + format_degrees(degrees) + ".png";
}

std::vector<double> all_grid_degrees() {
  std::vector<double> out;
  for (int d : pose_grid()) out.push_back(d);
  return out;
}

}  // namespace lbgan
