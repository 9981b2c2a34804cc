#include "lbgan/networks.hpp"

#include <ATen/CPUGeneratorImpl.h>

#include <algorithm>

#include "lbgan/errors.hpp"
#include "lbgan/image.hpp"

namespace lbgan {

namespace nn = torch::nn;

void NetworkConfig::validate() const {
  if (image_size < 2) throw ConfigError("image_size must be at least 2");
  if (base_channels < 1) throw ConfigError("base_channels must be positive");
  if (n_blocks < 1) throw ConfigError("n_blocks must be positive");
  if (bottleneck_dim < 1) throw ConfigError("bottleneck_dim must be positive");
  if (n_identities < 1) throw ConfigError("n_identities must be positive");
  if (init_std <= 0) throw ConfigError("init_std must be positive");
  if (n_blocks >= 31 || (image_size % (1 << n_blocks)) != 0 || bottleneck_spatial() < 1) {
    throw ConfigError("image_size " + std::to_string(image_size) + " cannot be halved " + std::to_string(n_blocks) +
                      " times exactly");
  }
}

int NetworkConfig::channels_at(int block) const { return base_channels << std::min(block, 3); }

nlohmann::json to_json(const NetworkConfig& c) {
  return {{"image_size", c.image_size},       {"base_channels", c.base_channels}, {"n_blocks", c.n_blocks},
          {"bottleneck_dim", c.bottleneck_dim}, {"n_identities", c.n_identities},   {"init_seed", c.init_seed},
          {"init_std", c.init_std}};
}

NetworkConfig network_config_from_json(const nlohmann::json& j) {
  NetworkConfig c;
  try {
    c.image_size = j.at("image_size").get<int>();
    c.base_channels = j.at("base_channels").get<int>();
    c.n_blocks = j.at("n_blocks").get<int>();
    c.bottleneck_dim = j.at("bottleneck_dim").get<int>();
    c.n_identities = j.at("n_identities").get<int>();
    c.init_seed = j.at("init_seed").get<std::uint64_t>();
    c.init_std = j.at("init_std").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed network config: ") + e.what());
  }
  c.validate();
  return c;
}

EncoderImpl::EncoderImpl(const NetworkConfig& config, int in_channels, int out_dim)
    : in_channels_(in_channels), image_size_(config.image_size) {
  config.validate();
  blocks_ = nn::Sequential();
  int channels = in_channels;
  for (int i = 0; i < config.n_blocks; ++i) {
    const int out = config.channels_at(i);
    blocks_->push_back(nn::Conv2d(nn::Conv2dOptions(channels, out, 4).stride(2).padding(1)));
    blocks_->push_back(nn::LeakyReLU(nn::LeakyReLUOptions().negative_slope(0.2)));
    channels = out;
  }
  const int spatial = config.bottleneck_spatial();
  project_ = nn::Linear(channels * spatial * spatial, out_dim);
  register_module("blocks", blocks_);
  register_module("project", project_);
}

torch::Tensor EncoderImpl::forward(const torch::Tensor& x) {
  if (x.dim() != 4 || x.size(1) != in_channels_ || x.size(2) != image_size_ || x.size(3) != image_size_) {
    throw ConfigError("encoder expects [B, " + std::to_string(in_channels_) + ", " + std::to_string(image_size_) +
                      ", " + std::to_string(image_size_) + "] input, got " + c10::str(x.sizes()));
  }
  return project_->forward(blocks_->forward(x).flatten(1));
}

DecoderImpl::DecoderImpl(const NetworkConfig& config, int in_dim)
    : top_channels_(config.channels_at(config.n_blocks - 1)), top_spatial_(config.bottleneck_spatial()) {
  config.validate();
  expand_ = nn::Linear(in_dim, top_channels_ * top_spatial_ * top_spatial_);
  blocks_ = nn::Sequential();
  for (int i = config.n_blocks - 1; i >= 0; --i) {
    const int in = config.channels_at(i);
    const int out = i == 0 ? kImageChannels : config.channels_at(i - 1);
    blocks_->push_back(nn::ConvTranspose2d(nn::ConvTranspose2dOptions(in, out, 4).stride(2).padding(1)));
    if (i > 0) blocks_->push_back(nn::ReLU());
  }
  blocks_->push_back(nn::Tanh());
  register_module("expand", expand_);
  register_module("blocks", blocks_);
}

torch::Tensor DecoderImpl::forward(const torch::Tensor& z) {
  auto h = torch::relu(expand_->forward(z)).view({z.size(0), top_channels_, top_spatial_, top_spatial_});
  return blocks_->forward(h);
}

NormalizerImpl::NormalizerImpl(const NetworkConfig& config) {
  encoder_ = register_module("encoder", Encoder(config, kImageChannels, config.bottleneck_dim));
  decoder_ = register_module("decoder", Decoder(config, config.bottleneck_dim));
}

torch::Tensor NormalizerImpl::forward(const torch::Tensor& x) { return decoder_->forward(encoder_->forward(x)); }

EditorImpl::EditorImpl(const NetworkConfig& config) {
  encoder_ = register_module("encoder", Encoder(config, 2 * kImageChannels, config.bottleneck_dim));
  decoder_ = register_module("decoder", Decoder(config, config.bottleneck_dim + kNumPoses));
}

torch::Tensor EditorImpl::encode(const torch::Tensor& x, const torch::Tensor& x_frontal) {
  if (x.sizes() != x_frontal.sizes()) throw ConfigError("editor inputs must share a shape");
  return encoder_->forward(torch::cat({x, x_frontal}, 1));
}

torch::Tensor EditorImpl::decode(const torch::Tensor& representation, const torch::Tensor& codes) {
  if (codes.dim() != 2 || codes.size(1) != kNumPoses || codes.size(0) != representation.size(0)) {
    throw ConfigError("remote codes must be [B, 13]");
  }
  return decoder_->forward(torch::cat({representation, codes.to(representation.dtype())}, 1));
}

torch::Tensor EditorImpl::forward(const torch::Tensor& x, const torch::Tensor& x_frontal, const torch::Tensor& codes) {
  return decode(encode(x, x_frontal), codes);
}

DiscriminatorImpl::DiscriminatorImpl(const NetworkConfig& config, bool with_pose_head) {
  trunk_ = register_module("trunk", Encoder(config, kImageChannels, config.bottleneck_dim));
  identity_head_ = register_module("identity_head", nn::Linear(config.bottleneck_dim, config.identity_classes()));
  if (with_pose_head) pose_head_ = register_module("pose_head", nn::Linear(config.bottleneck_dim, kNumPoses));
}

DiscriminatorOutput DiscriminatorImpl::forward(const torch::Tensor& x) {
  auto features = torch::leaky_relu(trunk_->forward(x), 0.2);
  DiscriminatorOutput out;
  out.identity = torch::softmax(identity_head_->forward(features), 1);
  if (has_pose_head()) out.pose = torch::softmax(pose_head_->forward(features), 1);
  return out;
}

void initialize_weights(nn::Module& module, double std, std::uint64_t seed) {
  torch::NoGradGuard no_grad;
  auto generator = at::make_generator<at::CPUGeneratorImpl>(seed);
  for (auto& named : module.named_parameters()) {
    auto& p = named.value();
    const std::string& name = named.key();
    if (name.size() >= 4 && name.compare(name.size() - 4, 4, "bias") == 0) {
      p.zero_();
    } else {
      p.normal_(0.0, std, generator);
    }
  }
}

std::uint64_t init_seed_for(const NetworkConfig& config, NetworkRole role) {
  return config.init_seed * 4 + static_cast<std::uint64_t>(role);
}

std::string role_name(NetworkRole role) {
  switch (role) {
    case NetworkRole::kNormalizer: return "g_n";
    case NetworkRole::kEditor: return "g_e";
    case NetworkRole::kNormalizerDisc: return "d_n";
    case NetworkRole::kEditorDisc: return "d_e";
  }
  return "unknown";
}

Normalizer make_normalizer(const NetworkConfig& config) {
  Normalizer net(config);
  initialize_weights(*net, config.init_std, init_seed_for(config, NetworkRole::kNormalizer));
  return net;
}

Editor make_editor(const NetworkConfig& config) {
  Editor net(config);
  initialize_weights(*net, config.init_std, init_seed_for(config, NetworkRole::kEditor));
  return net;
}

Discriminator make_normalizer_discriminator(const NetworkConfig& config) {
  Discriminator net(config, false);
  initialize_weights(*net, config.init_std, init_seed_for(config, NetworkRole::kNormalizerDisc));
  return net;
}

Discriminator make_editor_discriminator(const NetworkConfig& config) {
  Discriminator net(config, true);
  initialize_weights(*net, config.init_std, init_seed_for(config, NetworkRole::kEditorDisc));
  return net;
}

namespace {

torch::Tensor as_batch(const torch::Tensor& x) {
  if (x.dim() == 3) return x.unsqueeze(0);
  if (x.dim() == 4) return x;
  throw ConfigError("expected a [3, S, S] image or a [B, 3, S, S] batch");
}

torch::Tensor like_input(const torch::Tensor& out, const torch::Tensor& in) { return in.dim() == 3 ? out.squeeze(0) : out; }

}  // namespace

torch::Tensor normalizer_forward(Normalizer& net, const torch::Tensor& x) {
  return like_input(net->forward(as_batch(x)), x);
}

torch::Tensor editor_forward(Editor& net, const torch::Tensor& x, const torch::Tensor& x_frontal, const RemoteCode& code) {
  auto xb = as_batch(x);
  auto codes = code.to_tensor(xb.scalar_type()).unsqueeze(0).expand({xb.size(0), kNumPoses});
  return like_input(net->forward(xb, as_batch(x_frontal), codes), x);
}

torch::Tensor disc_n_forward(Discriminator& net, const torch::Tensor& x) {
  return like_input(net->forward(as_batch(x)).identity, x);
}

DiscriminatorOutput disc_e_forward(Discriminator& net, const torch::Tensor& x) {
  if (!net->has_pose_head()) throw ConfigError("discriminator has no pose head");
  auto out = net->forward(as_batch(x));
  return {like_input(out.identity, x), like_input(out.pose, x)};
}

torch::Tensor extract_identity_representation(Editor& net, const torch::Tensor& x, const torch::Tensor& x_frontal) {
  return like_input(net->encode(as_batch(x), as_batch(x_frontal)), x);
}

torch::Tensor interpolate_identities(const torch::Tensor& r1, const torch::Tensor& r2, double alpha) {
  if (r1.sizes() != r2.sizes()) throw InvalidInput("identity representations differ in length");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw InvalidParameter("interpolation weight must lie in [0, 1]");
  if (alpha == 0.0) return r1.clone();
  if (alpha == 1.0) return r2.clone();
  return r1 * (1.0 - alpha) + r2 * alpha;
}

}  // namespace lbgan
