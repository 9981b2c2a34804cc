#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

namespace lbgan {

/// Probabilities are clamped to this value before taking logarithms.
inline constexpr double kProbabilityEpsilon = 1e-12;

// Adversarial terms. Probability arguments are [B, K] (or [K]) softmax
// outputs; labels are [B] integer tensors (or scalars). Each function returns
// the negated log-likelihood objective averaged over the batch, so all of them
// are minimised.

/// -[log D_N(real)[y_id] + log D_N(fake)[fake slot]]; the fake slot is the last column.
torch::Tensor d_n_loss(const torch::Tensor& probs_real, const torch::Tensor& y_id, const torch::Tensor& probs_fake);

/// -log D_N(G_N(x))[y_id]
torch::Tensor g_n_loss(const torch::Tensor& probs_fake, const torch::Tensor& y_id);

/// -[log D_E(real)[y_id] + log D_Ep(real)[y_p] + log D_E(fake)[fake slot]]
torch::Tensor d_e_loss(const torch::Tensor& id_probs_real, const torch::Tensor& y_id,
                       const torch::Tensor& pose_probs_real, const torch::Tensor& y_p,
                       const torch::Tensor& id_probs_fake);

/// -[log D_Ep(fake)[c*] + log D_E(fake)[y_id]]
torch::Tensor g_e_loss(const torch::Tensor& pose_probs_fake, const torch::Tensor& c_star,
                       const torch::Tensor& id_probs_fake, const torch::Tensor& y_id);

/// Per-sample ||(x - x_hat) o M||_2 (Frobenius norm, not squared). Images are
/// [B, C, H, W], [C, H, W] or [H, W]; the mask is [B, 1, H, W], [1, H, W] or
/// [H, W] and broadcasts over channels. Returns [B].
torch::Tensor attention_l2_per_sample(const torch::Tensor& x, const torch::Tensor& x_hat, const torch::Tensor& mask);

/// Batch mean of attention_l2_per_sample.
torch::Tensor attention_l2(const torch::Tensor& x, const torch::Tensor& x_hat, const torch::Tensor& mask);

/// attention_l2 for samples whose requested pose equals their own pose and
/// exactly zero (value and gradient) for the rest; averaged over the batch.
torch::Tensor csc_loss(const torch::Tensor& x, const torch::Tensor& x_hat, const torch::Tensor& mask,
                       const torch::Tensor& y_p, const torch::Tensor& c_star);

struct LossWeights {
  double lambda_rec = 10.0;
  double lambda_csc = 10.0;

  void validate() const;

  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// Named scalars of one training step. Terms that a step does not evaluate
/// stay at zero. `rec` is the attention-masked reconstruction against the
/// target-pose ground truth; `l2` is its unmasked replacement used by the
/// no-regulariser variant.
struct LossReport {
  double d_n = 0, g_n = 0;
  double d_e_id = 0, d_e_pose = 0, d_e_fake = 0;
  double g_e_pose = 0, g_e_id = 0;
  double rec = 0, l2 = 0, csc = 0;
  double total_g = 0, total_d = 0;

  bool all_finite() const;
  nlohmann::json to_json() const;
  static LossReport from_json(const nlohmann::json& json);

  friend bool operator==(const LossReport&, const LossReport&) = default;
};

/// Everything the generator objective needs from one stage-2 forward pass.
struct GeneratorLossInputs {
  torch::Tensor dn_probs_fake;  // D_N(G_N(x)) identity probabilities
  torch::Tensor de_id_fake;     // D_E(x_hat) identity probabilities
  torch::Tensor de_pose_fake;   // D_E(x_hat) pose probabilities
  torch::Tensor y_id, y_p, c_star;
  torch::Tensor x, x_hat;
  torch::Tensor input_mask;                   // mask built from the input's landmarks
  std::optional<torch::Tensor> paired_target;  // ground truth at pose c*
  torch::Tensor target_mask;                   // mask for the paired term
  bool plain_reconstruction = false;           // report the paired term as l2, not rec
};

struct LossValue {
  torch::Tensor total;
  LossReport report;
};

/// total_g = g_n + g_e + lambda_rec * reconstruction + lambda_csc * csc; the
/// reconstruction term is present only with a paired target.
LossValue total_generator_loss(const GeneratorLossInputs& in, const LossWeights& weights);

struct DiscriminatorLossInputs {
  torch::Tensor dn_probs_real, dn_y_id;  // frontal real batch
  torch::Tensor dn_probs_fake;           // D_N(G_N(x))
  torch::Tensor de_id_real, de_pose_real, de_y_id, de_y_p;
  torch::Tensor de_id_fake;  // D_E(x_hat)
};

/// total_d = d_n + d_e (both discriminators stepped together in stage 2).
LossValue total_discriminator_loss(const DiscriminatorLossInputs& in);

// ---------------------------------------------------------------------------
// Finite-difference gradient oracle.

struct FiniteDifferenceOptions {
  double epsilon = 1e-5;
  int coordinates = 100;  // sampled uniformly over all parameter entries
  std::uint64_t seed = 0;
};

struct FiniteDifferenceResult {
  double max_relative_error = 0.0;
  int coordinates_checked = 0;
};

/// Compares autograd gradients of `loss_fn` with respect to `params` (leaf
/// tensors with requires_grad, read by loss_fn) against central differences.
/// Relative error is |a - n| / max(|a|, |n|, 1e-8). Throws InvalidInput on a
/// non-finite loss.
FiniteDifferenceResult finite_difference_check(const std::function<torch::Tensor()>& loss_fn,
                                               std::vector<torch::Tensor> params,
                                               const FiniteDifferenceOptions& options = {});

}  // namespace lbgan
