#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "lbgan/pose.hpp"

namespace lbgan {

// Layer schedule shared by all four networks. Block i of an encoder is a
// stride-2 4x4 convolution with base_channels * 2^min(i, 3) filters followed by
// LeakyReLU(0.2); the flattened last block feeds a linear bottleneck. Decoders
// mirror this with transposed convolutions and end in tanh.
struct NetworkConfig {
  int image_size = 32;
  int base_channels = 32;
  int n_blocks = 3;
  int bottleneck_dim = 128;
  int n_identities = 2;  // real classes; discriminators add one fake slot
  std::uint64_t init_seed = 1;
  double init_std = 0.02;

  /// Throws ConfigError if the schedule cannot reach a >= 1 pixel bottleneck
  /// by exact halving.
  void validate() const;

  int channels_at(int block) const;
  int bottleneck_spatial() const { return image_size >> n_blocks; }
  int identity_classes() const { return n_identities + 1; }
  int fake_class() const { return n_identities; }

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

nlohmann::json to_json(const NetworkConfig& config);
NetworkConfig network_config_from_json(const nlohmann::json& json);

class EncoderImpl : public torch::nn::Module {
 public:
  EncoderImpl(const NetworkConfig& config, int in_channels, int out_dim);

  /// [B, in_channels, S, S] -> [B, out_dim]
  torch::Tensor forward(const torch::Tensor& x);

  int in_channels() const { return in_channels_; }

 private:
  int in_channels_;
  int image_size_;
  torch::nn::Sequential blocks_{nullptr};
  torch::nn::Linear project_{nullptr};
};
TORCH_MODULE(Encoder);

class DecoderImpl : public torch::nn::Module {
 public:
  DecoderImpl(const NetworkConfig& config, int in_dim);

  /// [B, in_dim] -> [B, 3, S, S] in [-1, 1]
  torch::Tensor forward(const torch::Tensor& z);

 private:
  int top_channels_;
  int top_spatial_;
  torch::nn::Linear expand_{nullptr};
  torch::nn::Sequential blocks_{nullptr};
};
TORCH_MODULE(Decoder);

/// Face normalizer: encoder-decoder mapping any pose to the frontal view.
class NormalizerImpl : public torch::nn::Module {
 public:
  explicit NormalizerImpl(const NetworkConfig& config);

  torch::Tensor forward(const torch::Tensor& x);

 private:
  Encoder encoder_{nullptr};
  Decoder decoder_{nullptr};
};
TORCH_MODULE(Normalizer);

/// Face editor: encodes the channel concatenation of the input and its
/// frontalised version, appends the remote code to the bottleneck vector and
/// decodes the rotated face.
class EditorImpl : public torch::nn::Module {
 public:
  explicit EditorImpl(const NetworkConfig& config);

  /// Identity representation: bottleneck vector before the code is appended.
  torch::Tensor encode(const torch::Tensor& x, const torch::Tensor& x_frontal);

  /// codes: [B, 13] remote-code weights.
  torch::Tensor decode(const torch::Tensor& representation, const torch::Tensor& codes);

  torch::Tensor forward(const torch::Tensor& x, const torch::Tensor& x_frontal, const torch::Tensor& codes);

 private:
  Encoder encoder_{nullptr};
  Decoder decoder_{nullptr};
};
TORCH_MODULE(Editor);

struct DiscriminatorOutput {
  torch::Tensor identity;  // [B, n_id + 1] probabilities; last column is the fake class
  torch::Tensor pose;      // [B, 13] probabilities, undefined without a pose head
};

/// Encoder trunk with softmax heads. D_N has only the identity head; D_E
/// additionally predicts the yaw bin from the same trunk features.
class DiscriminatorImpl : public torch::nn::Module {
 public:
  DiscriminatorImpl(const NetworkConfig& config, bool with_pose_head);

  DiscriminatorOutput forward(const torch::Tensor& x);

  bool has_pose_head() const { return !pose_head_.is_empty(); }

 private:
  Encoder trunk_{nullptr};
  torch::nn::Linear identity_head_{nullptr};
  torch::nn::Linear pose_head_{nullptr};
};
TORCH_MODULE(Discriminator);

/// Zero-mean Gaussian weights (config.init_std), zero biases, drawn from a
/// generator seeded with `seed`.
void initialize_weights(torch::nn::Module& module, double std, std::uint64_t seed);

/// Seeds used for the four networks of one run.
enum class NetworkRole { kNormalizer, kEditor, kNormalizerDisc, kEditorDisc };
std::uint64_t init_seed_for(const NetworkConfig& config, NetworkRole role);
std::string role_name(NetworkRole role);

Normalizer make_normalizer(const NetworkConfig& config);
Editor make_editor(const NetworkConfig& config);
Discriminator make_normalizer_discriminator(const NetworkConfig& config);
Discriminator make_editor_discriminator(const NetworkConfig& config);

// Single-image conveniences. They accept [3, S, S] or [B, 3, S, S] and return
// a tensor of matching rank.
torch::Tensor normalizer_forward(Normalizer& net, const torch::Tensor& x);
torch::Tensor editor_forward(Editor& net, const torch::Tensor& x, const torch::Tensor& x_frontal, const RemoteCode& code);
torch::Tensor disc_n_forward(Discriminator& net, const torch::Tensor& x);
DiscriminatorOutput disc_e_forward(Discriminator& net, const torch::Tensor& x);
torch::Tensor extract_identity_representation(Editor& net, const torch::Tensor& x, const torch::Tensor& x_frontal);

/// (1 - alpha) * r1 + alpha * r2. Throws InvalidInput on length mismatch and
/// InvalidParameter for alpha outside [0, 1].
torch::Tensor interpolate_identities(const torch::Tensor& r1, const torch::Tensor& r2, double alpha);

}  // namespace lbgan
