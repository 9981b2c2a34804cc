#include "lbgan/losses.hpp"

#include <cmath>
#include <limits>

#include "lbgan/errors.hpp"

namespace lbgan {

namespace {

torch::Tensor as_rows(const torch::Tensor& probs) {
  if (probs.dim() == 1) return probs.unsqueeze(0);
  if (probs.dim() == 2) return probs;
  throw InvalidInput("probability input must be [K] or [B, K]");
}

torch::Tensor as_labels(const torch::Tensor& labels, std::int64_t batch) {
  auto flat = labels.to(torch::kLong).reshape({-1});
  if (flat.size(0) != batch) throw InvalidInput("label count does not match the batch");
  return flat;
}

// Mean over the batch of log(clamp(p[label])).
torch::Tensor mean_log_prob(const torch::Tensor& probs, const torch::Tensor& labels) {
  auto rows = as_rows(probs);
  auto index = as_labels(labels, rows.size(0));
  if (index.numel() > 0 && (index.min().item<std::int64_t>() < 0 || index.max().item<std::int64_t>() >= rows.size(1))) {
    throw InvalidInput("label outside the probability vector");
  }
  return rows.gather(1, index.unsqueeze(1)).clamp_min(kProbabilityEpsilon).log().mean();
}

torch::Tensor mean_log_fake(const torch::Tensor& probs) {
  auto rows = as_rows(probs);
  return rows.select(1, rows.size(1) - 1).clamp_min(kProbabilityEpsilon).log().mean();
}

torch::Tensor as_images(const torch::Tensor& x) {
  switch (x.dim()) {
    case 2: return x.unsqueeze(0).unsqueeze(0);
    case 3: return x.unsqueeze(0);
    case 4: return x;
    default: throw InvalidInput("image input must be [H, W], [C, H, W] or [B, C, H, W]");
  }
}

torch::Tensor as_mask(const torch::Tensor& m) {
  switch (m.dim()) {
    case 2: return m.unsqueeze(0).unsqueeze(0);
    case 3: return m.unsqueeze(0);
    case 4: return m;
    default: throw InvalidInput("mask must be [H, W], [1, H, W] or [B, 1, H, W]");
  }
}

double smallest_normal(torch::ScalarType type) {
  return type == torch::kDouble ? std::numeric_limits<double>::min() : std::numeric_limits<float>::min();
}

double value(const torch::Tensor& t) { return t.detach().item<double>(); }

}  // namespace

torch::Tensor d_n_loss(const torch::Tensor& probs_real, const torch::Tensor& y_id, const torch::Tensor& probs_fake) {
  return -(mean_log_prob(probs_real, y_id) + mean_log_fake(probs_fake));
}

torch::Tensor g_n_loss(const torch::Tensor& probs_fake, const torch::Tensor& y_id) {
  return -mean_log_prob(probs_fake, y_id);
}

torch::Tensor d_e_loss(const torch::Tensor& id_probs_real, const torch::Tensor& y_id,
                       const torch::Tensor& pose_probs_real, const torch::Tensor& y_p,
                       const torch::Tensor& id_probs_fake) {
  return -(mean_log_prob(id_probs_real, y_id) + mean_log_prob(pose_probs_real, y_p) + mean_log_fake(id_probs_fake));
}

torch::Tensor g_e_loss(const torch::Tensor& pose_probs_fake, const torch::Tensor& c_star,
                       const torch::Tensor& id_probs_fake, const torch::Tensor& y_id) {
  return -(mean_log_prob(pose_probs_fake, c_star) + mean_log_prob(id_probs_fake, y_id));
}

torch::Tensor attention_l2_per_sample(const torch::Tensor& x, const torch::Tensor& x_hat, const torch::Tensor& mask) {
  if (x.sizes() != x_hat.sizes()) throw InvalidInput("attention_l2 inputs differ in shape");
  auto a = as_images(x);
  auto b = as_images(x_hat);
  auto m = as_mask(mask);
  if (m.size(1) != 1 || m.size(2) != a.size(2) || m.size(3) != a.size(3) ||
      (m.size(0) != 1 && m.size(0) != a.size(0))) {
    throw InvalidInput("mask shape does not broadcast over the images");
  }
  auto squared = ((a - b) * m.to(a.dtype())).square().sum({1, 2, 3});
  // sqrt has an infinite slope at 0; pin both value and gradient to 0 there
  auto safe = squared.clamp_min(smallest_normal(squared.scalar_type())).sqrt();
  return torch::where(squared > 0, safe, torch::zeros_like(squared));
}

torch::Tensor attention_l2(const torch::Tensor& x, const torch::Tensor& x_hat, const torch::Tensor& mask) {
  return attention_l2_per_sample(x, x_hat, mask).mean();
}

torch::Tensor csc_loss(const torch::Tensor& x, const torch::Tensor& x_hat, const torch::Tensor& mask,
                       const torch::Tensor& y_p, const torch::Tensor& c_star) {
  auto per_sample = attention_l2_per_sample(x, x_hat, mask);
  auto match = as_labels(y_p, per_sample.size(0)).eq(as_labels(c_star, per_sample.size(0)));
  return torch::where(match, per_sample, torch::zeros_like(per_sample)).mean();
}

void LossWeights::validate() const {
  if (!(lambda_rec >= 0.0) || !(lambda_csc >= 0.0)) throw ConfigError("loss weights must be non-negative");
}

bool LossReport::all_finite() const {
  for (double v : {d_n, g_n, d_e_id, d_e_pose, d_e_fake, g_e_pose, g_e_id, rec, l2, csc, total_g, total_d}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

nlohmann::json LossReport::to_json() const {
  return {{"d_n", d_n},           {"g_n", g_n},           {"d_e_id", d_e_id}, {"d_e_pose", d_e_pose},
          {"d_e_fake", d_e_fake}, {"g_e_pose", g_e_pose}, {"g_e_id", g_e_id}, {"rec", rec},
          {"l2", l2},             {"csc", csc},           {"total_g", total_g}, {"total_d", total_d}};
}

LossReport LossReport::from_json(const nlohmann::json& j) {
  LossReport r;
  r.d_n = j.value("d_n", 0.0);
  r.g_n = j.value("g_n", 0.0);
  r.d_e_id = j.value("d_e_id", 0.0);
  r.d_e_pose = j.value("d_e_pose", 0.0);
  r.d_e_fake = j.value("d_e_fake", 0.0);
  r.g_e_pose = j.value("g_e_pose", 0.0);
  r.g_e_id = j.value("g_e_id", 0.0);
  r.rec = j.value("rec", 0.0);
  r.l2 = j.value("l2", 0.0);
  r.csc = j.value("csc", 0.0);
  r.total_g = j.value("total_g", 0.0);
  r.total_d = j.value("total_d", 0.0);
  return r;
}

LossValue total_generator_loss(const GeneratorLossInputs& in, const LossWeights& weights) {
  weights.validate();
  LossReport report;
  auto g_n = g_n_loss(in.dn_probs_fake, in.y_id);
  auto g_e_pose = -mean_log_prob(in.de_pose_fake, in.c_star);
  auto g_e_id = -mean_log_prob(in.de_id_fake, in.y_id);
  auto total = g_n + g_e_pose + g_e_id;
  report.g_n = value(g_n);
  report.g_e_pose = value(g_e_pose);
  report.g_e_id = value(g_e_id);

  // zero-weight terms are left out entirely and report 0
  double reconstruction = 0.0;
  if (in.paired_target && weights.lambda_rec > 0.0) {
    auto rec = attention_l2(*in.paired_target, in.x_hat, in.target_mask);
    total = total + weights.lambda_rec * rec;
    reconstruction = value(rec);
    (in.plain_reconstruction ? report.l2 : report.rec) = reconstruction;
  }
  if (weights.lambda_csc > 0.0) {
    auto csc = csc_loss(in.x, in.x_hat, in.input_mask, in.y_p, in.c_star);
    total = total + weights.lambda_csc * csc;
    report.csc = value(csc);
  }
  report.total_g = report.g_n + report.g_e_pose + report.g_e_id + weights.lambda_rec * reconstruction +
                   weights.lambda_csc * report.csc;
  return {total, report};
}

LossValue total_discriminator_loss(const DiscriminatorLossInputs& in) {
  LossReport report;
  auto d_n = d_n_loss(in.dn_probs_real, in.dn_y_id, in.dn_probs_fake);
  auto d_e_id = -mean_log_prob(in.de_id_real, in.de_y_id);
  auto d_e_pose = -mean_log_prob(in.de_pose_real, in.de_y_p);
  auto d_e_fake = -mean_log_fake(in.de_id_fake);
  report.d_n = value(d_n);
  report.d_e_id = value(d_e_id);
  report.d_e_pose = value(d_e_pose);
  report.d_e_fake = value(d_e_fake);
  report.total_d = report.d_n + report.d_e_id + report.d_e_pose + report.d_e_fake;
  return {d_n + d_e_id + d_e_pose + d_e_fake, report};
}

}  // namespace lbgan
