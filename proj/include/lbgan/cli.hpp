#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lbgan/training.hpp"

namespace lbgan::cli {

enum class Profile { kDesk, kPaper };

std::string to_string(Profile profile);
Profile profile_from_string(const std::string& name);

/// Training defaults of a profile. desk: 32 px, 2000/4000 iterations;
/// paper: 96 px, 5 blocks, 256-d bottleneck, 20000/40000 iterations.
TrainConfig profile_defaults(Profile profile);

/// Everything `train` needs; its TOML form reproduces the run.
struct RunConfig {
  Profile profile = Profile::kDesk;
  TrainConfig train;
  std::filesystem::path data;
  std::filesystem::path out;
  std::int64_t checkpoint_every = 500;
  std::int64_t log_every = 100;
};

/// Layout under an --out root.
struct OutputLayout {
  std::filesystem::path root;
  std::filesystem::path checkpoints() const { return root / "checkpoints"; }
  std::filesystem::path logs() const { return root / "logs"; }
  std::filesystem::path images() const { return root / "images"; }
  std::filesystem::path reports() const { return root / "reports"; }
  void create() const;
};

/// Resolved config as TOML text; load_run_config(write) round-trips.
std::string run_config_to_toml(const RunConfig& config);
/// Profile defaults overlaid with the file's values. Throws ConfigError on
/// unknown keys or wrong types.
RunConfig load_run_config(const std::filesystem::path& path);

/// Seed from LBGAN_SEED when set (ConfigError if it is not an unsigned integer).
std::optional<std::uint64_t> seed_from_env();

/// sha256 over the manifest text and every image it lists, in record order.
std::string dataset_digest(const std::filesystem::path& manifest_path);

/// Entry point. Returns 0 on success, 1 on runtime failures and 2 on usage,
/// config or request errors.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run(int argc, char** argv);

}  // namespace lbgan::cli
