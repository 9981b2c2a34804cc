#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>
#include <torch/torch.h>

#include "lbgan/dataset.hpp"
#include "lbgan/losses.hpp"
#include "lbgan/networks.hpp"

namespace lbgan {

enum class Variant { kFull, kSingleStage, kNoRegularizers };

std::string to_string(Variant variant);
/// "full", "single_stage" or "no_regularizers"; anything else is a ConfigError.
Variant variant_from_string(const std::string& name);

struct TrainConfig {
  int stage1_iters = 2000;
  int stage2_iters = 4000;
  int batch_size = 24;
  double lr = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double stage2_gn_lr_factor = 0.25;
  int g_steps_per_d_step = 4;
  LossWeights weights;
  std::uint64_t seed = 1;
  Variant variant = Variant::kFull;
  NetworkConfig network;

  void validate() const;

  /// Iterations run by the stage-2 loop (single_stage folds stage 1 into it).
  std::int64_t stage2_length() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& json);
std::string config_hash(const TrainConfig& config);

/// Optimizer steps each network receives over a complete run, from the schedule alone.
struct StepCounts {
  std::int64_t g_n = 0, g_e = 0, d_n = 0, d_e = 0;

  friend bool operator==(const StepCounts&, const StepCounts&) = default;
};
StepCounts expected_step_counts(const TrainConfig& config);

/// The four networks, their optimizers and the position in the schedule.
/// `stage` is 1 or 2; `iteration` counts completed iterations of that stage.
class ModelBundle {
 public:
  explicit ModelBundle(const TrainConfig& config);

  TrainConfig config;
  Normalizer g_n{nullptr};
  Editor g_e{nullptr};
  Discriminator d_n{nullptr};
  Discriminator d_e{nullptr};
  std::unique_ptr<torch::optim::Adam> opt_g_n, opt_g_e, opt_d_n, opt_d_e;

  int stage = 1;
  std::int64_t iteration = 0;
  StepCounts steps;
  Rng rng;

  bool finished() const;
  void set_train_mode(bool on);
};

enum class StepKind { kStageOne, kGenerator, kDiscriminator };
std::string to_string(StepKind kind);

struct StepEvent {
  int stage = 1;
  std::int64_t iteration = 0;  // 1-based within the stage
  StepKind kind = StepKind::kStageOne;
  LossReport report;
  double lr_g_n = 0, lr_g_e = 0, lr_d_n = 0, lr_d_e = 0;

  nlohmann::json to_json() const;
};

struct TrainHooks {
  std::function<void(const StepEvent&)> on_step;
  std::optional<std::filesystem::path> log_path;        // JSON lines, appended
  std::optional<std::filesystem::path> checkpoint_dir;  // final + periodic + diagnostic
  std::int64_t checkpoint_every = 0;                    // iterations; 0 = only at the end
  std::int64_t max_steps = -1;                          // stop early after this many steps
};

/// Runs the next iteration of the schedule. Throws StateError when finished
/// and TrainingError (after writing a diagnostic checkpoint if a checkpoint
/// dir is set) on a non-finite loss.
StepEvent train_step(ModelBundle& bundle, const Dataset& data, const TrainHooks& hooks = {});

/// Runs stage 1 to completion and moves the bundle to stage 2.
void train_stage_one(ModelBundle& bundle, const Dataset& data, const TrainHooks& hooks = {});

/// Runs stage 2 to completion.
void train_stage_two(ModelBundle& bundle, const Dataset& data, const TrainHooks& hooks = {});

/// Fresh bundle for `config.variant`, trained to completion (or hooks.max_steps).
std::unique_ptr<ModelBundle> run_variant(const TrainConfig& config, const Dataset& data, const TrainHooks& hooks = {});

/// Continues a bundle until finished (or hooks.max_steps).
void resume_training(ModelBundle& bundle, const Dataset& data, const TrainHooks& hooks = {});

inline constexpr int kCheckpointVersion = 1;

/// Writes manifest.json plus one parameter blob per network and the sampler
/// state into `dir`, replacing it atomically.
std::filesystem::path save_checkpoint(const ModelBundle& bundle, const std::filesystem::path& dir);

/// Throws CheckpointError for missing, corrupt or version-mismatched files.
std::unique_ptr<ModelBundle> load_checkpoint(const std::filesystem::path& dir);

/// As above, additionally throwing ConfigError if the stored architecture
/// differs from `expected`.
std::unique_ptr<ModelBundle> load_checkpoint(const std::filesystem::path& dir, const NetworkConfig& expected);

/// Drops log lines past the bundle's position so a resumed run does not
/// record any iteration twice.
void truncate_log(const std::filesystem::path& log_path, int stage, std::int64_t iteration);

}  // namespace lbgan
