#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "lbgan/dataset.hpp"
#include "lbgan/inference.hpp"
#include "lbgan/networks.hpp"

namespace lbgan {

// Small CNN shared by the substitute recognisers: encoder trunk, LeakyReLU,
// a linear output head. The trunk activation is the embedding.
class ProbeNetImpl : public torch::nn::Module {
 public:
  ProbeNetImpl(const NetworkConfig& trunk, int embedding_dim, int outputs);

  torch::Tensor embed(const torch::Tensor& x);
  torch::Tensor forward(const torch::Tensor& x);

 private:
  Encoder trunk_{nullptr};
  torch::nn::Linear head_{nullptr};
};
TORCH_MODULE(ProbeNet);

struct ProbeTrainOptions {
  int base_channels = 16;
  int n_blocks = 3;
  int embedding_dim = 64;
  int batch_size = 32;
  int max_iters = 3000;
  int min_iters = 500;
  int check_every = 100;
  double lr = 1e-3;
  double target_accuracy = 0.95;
  std::uint64_t seed = 7;
  double max_abs_yaw = 90.0;  // records with larger |yaw| are left out of training
};

struct ClassifierSummary {
  double train_accuracy = 0.0;
  int iterations = 0;
  bool converged = false;
  std::string warning;  // set when the budget ran out below the target accuracy

  nlohmann::json to_json() const;
};

/// Identity classifier over the training identities; embeddings are the
/// penultimate features, compared by cosine similarity.
struct EmbedderModel {
  ProbeNet net{nullptr};
  int image_size = 0;
  int embedding_dim = 0;
  ClassifierSummary summary;
  std::vector<std::uint64_t> training_identity_seeds;

  torch::Tensor embed(const torch::Tensor& images) const;
};

/// 13-way yaw-bin classifier trained on real images.
struct PoseClassifierModel {
  ProbeNet net{nullptr};
  int image_size = 0;
  ClassifierSummary summary;

  torch::Tensor predict_index(const torch::Tensor& images) const;
};

/// Continuous yaw regressor (degrees) trained on real images within its range.
struct PoseEstimatorModel {
  ProbeNet net{nullptr};
  int image_size = 0;
  double range_degrees = 30.0;
  double train_mae = 0.0;
  int iterations = 0;

  torch::Tensor predict_degrees(const torch::Tensor& images) const;
};

/// Throws InvalidInput with fewer than two identities. By default only
/// |yaw| <= 30 degrees is used, so profiles stay hard for the raw recogniser.
ProbeTrainOptions default_embedder_options();
EmbedderModel train_embedder(const Dataset& train, ProbeTrainOptions options = default_embedder_options());

PoseClassifierModel train_pose_classifier(const Dataset& train, ProbeTrainOptions options = {});

PoseEstimatorModel train_pose_estimator(const Dataset& train, double range_degrees = 30.0, ProbeTrainOptions options = {});

struct ProbeMatch {
  std::size_t probe = 0;
  int true_identity = 0;
  int predicted_identity = 0;
  double similarity = 0.0;
  double bin = 0.0;
};

struct IdentificationResult {
  std::map<double, double> rate_per_bin;  // bin degrees -> rank-1 rate
  std::map<double, int> count_per_bin;
  double overall = 0.0;
  std::vector<ProbeMatch> matches;
};

/// Rank-1 by cosine similarity against the gallery. Every probe identity must
/// appear in the gallery (ProtocolError otherwise); several gallery entries per
/// identity are allowed and the closest one counts.
IdentificationResult rank1_from_embeddings(const torch::Tensor& gallery, const std::vector<int>& gallery_ids,
                                           const torch::Tensor& probes, const std::vector<int>& probe_ids,
                                           const std::vector<double>& probe_bins);

IdentificationResult rank1_identification(const EmbedderModel& embedder, const torch::Tensor& gallery_images,
                                          const std::vector<int>& gallery_ids, const torch::Tensor& probe_images,
                                          const std::vector<int>& probe_ids, const std::vector<double>& probe_bins);

/// Mean |predicted - target| per target bin, keeping bins with |bin| <= range.
/// Empty bins are simply absent.
std::map<double, double> pose_errors_by_bin(const std::vector<double>& predicted, const std::vector<double>& target,
                                            double range_degrees = 30.0);

struct PoseErrorTable {
  std::map<double, double> genuine;      // grid bins
  std::map<double, double> synthesized;  // grid bins
  std::map<double, double> interpolated; // synthesized at off-grid targets
  std::vector<std::string> notices;
};

/// Builds the table from estimator predictions on labelled genuine and
/// synthesized images; off-grid synthesized targets land in `interpolated`.
PoseErrorTable pose_error_table(const PoseEstimatorModel& estimator, const torch::Tensor& real_images,
                                const std::vector<double>& real_degrees, const torch::Tensor& synthesized_images,
                                const std::vector<double>& synthesized_degrees);

struct EvalReport {
  std::string variant;
  int n_test_identities = 0;
  double chance = 0.0;
  IdentificationResult rank1_frontalized;  // rotate(x, 0 deg) probes
  IdentificationResult rank1_normalizer;   // G_N(x) probes
  IdentificationResult rank1_raw;          // raw probes
  double masked_l2_identity_rotation = 0.0;
  double pose_bin_accuracy = 0.0;
  PoseErrorTable pose;
  nlohmann::json evaluators;
  std::vector<std::string> flags;

  nlohmann::json to_json() const;
  std::string to_text() const;
  std::string matches_csv() const;
};

struct Evaluators {
  EmbedderModel embedder;
  PoseClassifierModel pose_classifier;
  PoseEstimatorModel pose_estimator;
};

/// Trains all three substitute models on the real training split.
Evaluators train_evaluators(const Dataset& train, std::uint64_t seed = 7);

/// Throws ProtocolError if the two splits share identities (by identity seed
/// when known).
void check_disjoint_splits(const DatasetManifest& train, const DatasetManifest& test);

/// Mean over test images of the RMS masked difference between x and
/// rotate(x, own pose), i.e. attention_l2 / sqrt(3 |M|).
double identity_rotation_masked_l2(const FrozenModel& model, const Dataset& test);

EvalReport evaluate_model(const FrozenModel& model, const Dataset& test, const Evaluators& evaluators,
                          const std::string& variant = "full");

struct AblationRow {
  std::string variant;
  std::map<double, double> rank1;
  double mean_rank1 = 0.0;
  std::map<double, double> delta_vs_full;  // full - this row
};

struct AblationTable {
  std::vector<AblationRow> rows;
  std::map<std::string, bool> full_at_least_mean;      // variant -> full mean >= its mean
  std::map<std::string, std::vector<double>> violations;  // bins where the variant beats full

  nlohmann::json to_json() const;
  std::string to_text() const;
};

/// Compares the frontalized rank-1 rates; requires a "full" entry.
AblationTable ablation_compare(const std::map<std::string, EvalReport>& reports);

}  // namespace lbgan
