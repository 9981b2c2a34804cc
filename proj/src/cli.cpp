#include "lbgan/cli.hpp"

#include <CLI11.hpp>
#include <toml.hpp>

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>

#include "lbgan/digest.hpp"
#include "lbgan/errors.hpp"
#include "lbgan/evaluation.hpp"
#include "lbgan/inference.hpp"
#include "lbgan/synthetic.hpp"

namespace lbgan::cli {

namespace fs = std::filesystem;

std::string to_string(Profile p) { return p == Profile::kDesk ? "desk" : "paper"; }

Profile profile_from_string(const std::string& name) {
  if (name == "desk") return Profile::kDesk;
  if (name == "paper") return Profile::kPaper;
  throw ConfigError("unknown profile '" + name + "' (desk or paper)");
}

TrainConfig profile_defaults(Profile profile) {
  TrainConfig c;
  if (profile == Profile::kDesk) {
    c.stage1_iters = 2000;
    c.stage2_iters = 4000;
    c.network.image_size = 32;
    c.network.base_channels = 32;
    c.network.n_blocks = 3;
    c.network.bottleneck_dim = 128;
    c.network.n_identities = 30;
  } else {
    c.stage1_iters = 20000;
    c.stage2_iters = 40000;
    c.network.image_size = 96;
    c.network.base_channels = 32;
    c.network.n_blocks = 5;
    c.network.bottleneck_dim = 256;
  }
  return c;
}

void OutputLayout::create() const {
  for (const auto& d : {checkpoints(), logs(), images(), reports()}) fs::create_directories(d);
}

// ---------------------------------------------------------------- TOML config

namespace {

using Setter = std::function<void(const toml::node&)>;

template <class T>
T node_value(const toml::node& n, const std::string& key) {
  if constexpr (std::is_same_v<T, std::string>) {
    if (auto v = n.value<std::string>()) return *v;
  } else if constexpr (std::is_floating_point_v<T>) {
    if (auto v = n.value<double>()) return *v;
  } else {
    if (n.is_integer()) {
      const auto v = *n.value<std::int64_t>();
      if (std::is_unsigned_v<T> && v < 0) throw ConfigError("config key '" + key + "' must be non-negative");
      return static_cast<T>(v);
    }
  }
  throw ConfigError("config key '" + key + "' has the wrong type");
}

template <class T>
Setter setter(T& dst, const std::string& key) {
  return [&dst, key](const toml::node& n) { dst = node_value<T>(n, key); };
}

void apply_section(const toml::table& table, const std::map<std::string, Setter>& setters, const std::string& where) {
  for (const auto& [k, v] : table) {
    const std::string key(k.str());
    auto it = setters.find(key);
    if (it == setters.end()) throw ConfigError("unknown config key '" + where + key + "'");
    it->second(v);
  }
}

}  // namespace

std::string run_config_to_toml(const RunConfig& rc) {
  const auto& t = rc.train;
  const auto& n = t.network;
  toml::table train{{"variant", lbgan::to_string(t.variant)},
                    {"seed", static_cast<std::int64_t>(t.seed)},
                    {"stage1_iters", t.stage1_iters},
                    {"stage2_iters", t.stage2_iters},
                    {"batch_size", t.batch_size},
                    {"lr", t.lr},
                    {"adam_beta1", t.adam_beta1},
                    {"adam_beta2", t.adam_beta2},
                    {"stage2_gn_lr_factor", t.stage2_gn_lr_factor},
                    {"g_steps_per_d_step", t.g_steps_per_d_step}};
  toml::table weights{{"lambda_rec", t.weights.lambda_rec}, {"lambda_csc", t.weights.lambda_csc}};
  toml::table network{{"image_size", n.image_size},
                      {"base_channels", n.base_channels},
                      {"n_blocks", n.n_blocks},
                      {"bottleneck_dim", n.bottleneck_dim},
                      {"n_identities", n.n_identities},
                      {"init_seed", static_cast<std::int64_t>(n.init_seed)},
                      {"init_std", n.init_std}};
  toml::table root{{"profile", to_string(rc.profile)},
                   {"data", rc.data.string()},
                   {"out", rc.out.string()},
                   {"checkpoint_every", rc.checkpoint_every},
                   {"log_every", rc.log_every},
                   {"train", train},
                   {"weights", weights},
                   {"network", network}};
  std::ostringstream os;
  os << root << "\n";
  return os.str();
}

RunConfig load_run_config(const fs::path& path) {
  toml::table root;
  try {
    root = toml::parse_file(path.string());
  } catch (const toml::parse_error& e) {
    std::ostringstream os;
    os << "cannot parse " << path.string() << ": " << e.description() << " at " << e.source().begin;
    throw ConfigError(os.str());
  }
  RunConfig rc;
  if (auto p = root["profile"].value<std::string>()) rc.profile = profile_from_string(*p);
  rc.train = profile_defaults(rc.profile);
  auto& t = rc.train;
  auto& n = t.network;

  std::string variant = lbgan::to_string(t.variant);
  std::string data, out;
  std::string profile = to_string(rc.profile);
  const auto section = [&](const std::string& name) -> const toml::table* {
    const auto* node = root.get(name);
    if (!node) return nullptr;
    if (!node->is_table()) throw ConfigError("config key '" + name + "' must be a table");
    return node->as_table();
  };
  std::map<std::string, Setter> top{{"profile", setter(profile, "profile")},
                                    {"data", setter(data, "data")},
                                    {"out", setter(out, "out")},
                                    {"checkpoint_every", setter(rc.checkpoint_every, "checkpoint_every")},
                                    {"log_every", setter(rc.log_every, "log_every")},
                                    {"train", [](const toml::node&) {}},
                                    {"weights", [](const toml::node&) {}},
                                    {"network", [](const toml::node&) {}}};
  apply_section(root, top, "");
  if (const auto* s = section("train")) {
    apply_section(*s,
                  {{"variant", setter(variant, "train.variant")},
                   {"seed", setter(t.seed, "train.seed")},
                   {"stage1_iters", setter(t.stage1_iters, "train.stage1_iters")},
                   {"stage2_iters", setter(t.stage2_iters, "train.stage2_iters")},
                   {"batch_size", setter(t.batch_size, "train.batch_size")},
                   {"lr", setter(t.lr, "train.lr")},
                   {"adam_beta1", setter(t.adam_beta1, "train.adam_beta1")},
                   {"adam_beta2", setter(t.adam_beta2, "train.adam_beta2")},
                   {"stage2_gn_lr_factor", setter(t.stage2_gn_lr_factor, "train.stage2_gn_lr_factor")},
                   {"g_steps_per_d_step", setter(t.g_steps_per_d_step, "train.g_steps_per_d_step")}},
                  "train.");
  }
  if (const auto* s = section("weights")) {
    apply_section(*s,
                  {{"lambda_rec", setter(t.weights.lambda_rec, "weights.lambda_rec")},
                   {"lambda_csc", setter(t.weights.lambda_csc, "weights.lambda_csc")}},
                  "weights.");
  }
  if (const auto* s = section("network")) {
    apply_section(*s,
                  {{"image_size", setter(n.image_size, "network.image_size")},
                   {"base_channels", setter(n.base_channels, "network.base_channels")},
                   {"n_blocks", setter(n.n_blocks, "network.n_blocks")},
                   {"bottleneck_dim", setter(n.bottleneck_dim, "network.bottleneck_dim")},
                   {"n_identities", setter(n.n_identities, "network.n_identities")},
                   {"init_seed", setter(n.init_seed, "network.init_seed")},
                   {"init_std", setter(n.init_std, "network.init_std")}},
                  "network.");
  }
  t.variant = variant_from_string(variant);
  rc.data = data;
  rc.out = out;
  return rc;
}

std::optional<std::uint64_t> seed_from_env() {
  const char* v = std::getenv("LBGAN_SEED");
  if (!v || !*v) return std::nullopt;
  std::uint64_t seed = 0;
  const char* end = v + std::char_traits<char>::length(v);
  auto [ptr, ec] = std::from_chars(v, end, seed);
  if (ec != std::errc() || ptr != end) throw ConfigError(std::string("LBGAN_SEED is not an unsigned integer: ") + v);
  return seed;
}

std::string dataset_digest(const fs::path& manifest_path) {
  const auto manifest = load_manifest(manifest_path);
  std::string acc = file_sha256(manifest.root / "manifest.json");
  for (const auto& r : manifest.records) acc += file_sha256(manifest.resolve(r));
  return sha256_hex(acc);
}

// ---------------------------------------------------------------- commands

namespace {

void write_text(const fs::path& path, const std::string& text) {
  fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
}

// Flags shared by train and ablate; each overrides the profile/config value when given.
struct TrainFlags {
  std::optional<std::string> config, profile, variant;
  std::optional<std::uint64_t> seed;
  std::optional<double> lr, beta1, beta2, gn_lr_factor, lambda_rec, lambda_csc, init_std;
  std::optional<int> batch, g_steps, stage1_iters, stage2_iters, image_size, base_channels, blocks, bottleneck;
  std::optional<std::int64_t> checkpoint_every, log_every;

  void add(CLI::App* app, bool with_variant) {
    app->add_option("--config", config, "TOML run config; flags override its values");
    app->add_option("--profile", profile, "desk or paper");
    if (with_variant) app->add_option("--variant", variant, "full, single_stage or no_regularizers");
    app->add_option("--seed", seed, "sampler and initialisation seed (LBGAN_SEED overrides)");
    app->add_option("--lr", lr, "Adam learning rate [2e-4]");
    app->add_option("--beta1", beta1, "Adam beta1 [0.5]");
    app->add_option("--beta2", beta2, "Adam beta2 [0.999]");
    app->add_option("--batch", batch, "batch size [24]");
    app->add_option("--g-steps", g_steps, "generator steps per discriminator step in stage 2 [4]");
    app->add_option("--gn-lr-factor", gn_lr_factor, "stage-2 learning-rate factor for G_N and D_N [0.25]");
    app->add_option("--stage1-iters", stage1_iters, "stage-1 iterations");
    app->add_option("--stage2-iters", stage2_iters, "stage-2 iterations");
    app->add_option("--lambda-rec", lambda_rec, "weight of the masked reconstruction [10]");
    app->add_option("--lambda-csc", lambda_csc, "weight of the conditional self-cycle loss [10]");
    app->add_option("--image-size", image_size, "network input size");
    app->add_option("--base-channels", base_channels, "filters of the first conv block");
    app->add_option("--blocks", blocks, "stride-2 blocks per encoder");
    app->add_option("--bottleneck", bottleneck, "bottleneck width");
    app->add_option("--init-std", init_std, "weight init standard deviation");
    app->add_option("--checkpoint-every", checkpoint_every, "iterations between 'latest' checkpoints (0: off)");
    app->add_option("--log-every", log_every, "iterations between progress lines (0: quiet)");
  }

  RunConfig resolve() const {
    RunConfig rc;
    if (config) {
      rc = load_run_config(*config);
      if (profile && profile_from_string(*profile) != rc.profile) {
        throw UsageError("--profile " + *profile + " contradicts the profile in " + *config);
      }
    } else {
      rc.profile = profile ? profile_from_string(*profile) : Profile::kDesk;
      rc.train = profile_defaults(rc.profile);
    }
    auto& t = rc.train;
    auto& n = t.network;
    if (variant) t.variant = variant_from_string(*variant);
    auto s = seed_from_env();
    if (!s) s = seed;
    if (s) {
      t.seed = *s;
      n.init_seed = *s;
    }
    if (lr) t.lr = *lr;
    if (beta1) t.adam_beta1 = *beta1;
    if (beta2) t.adam_beta2 = *beta2;
    if (batch) t.batch_size = *batch;
    if (g_steps) t.g_steps_per_d_step = *g_steps;
    if (gn_lr_factor) t.stage2_gn_lr_factor = *gn_lr_factor;
    if (stage1_iters) t.stage1_iters = *stage1_iters;
    if (stage2_iters) t.stage2_iters = *stage2_iters;
    if (lambda_rec) t.weights.lambda_rec = *lambda_rec;
    if (lambda_csc) t.weights.lambda_csc = *lambda_csc;
    if (image_size) n.image_size = *image_size;
    if (base_channels) n.base_channels = *base_channels;
    if (blocks) n.n_blocks = *blocks;
    if (bottleneck) n.bottleneck_dim = *bottleneck;
    if (init_std) n.init_std = *init_std;
    if (checkpoint_every) rc.checkpoint_every = *checkpoint_every;
    if (log_every) rc.log_every = *log_every;
    return rc;
  }
};

// The dataset fixes the identity count; the image size has to agree with it.
void bind_dataset(RunConfig& rc, const DatasetManifest& m) {
  if (m.image_size != rc.train.network.image_size) {
    throw ConfigError("dataset images are " + std::to_string(m.image_size) + " px but the network expects " +
                      std::to_string(rc.train.network.image_size) + " px (set --image-size or use another profile)");
  }
  rc.train.network.n_identities = m.n_id;
  rc.train.validate();
}

std::optional<fs::path> newest_checkpoint(const fs::path& root) {
  std::optional<fs::path> best;
  std::pair<int, std::int64_t> best_pos{0, -1};
  for (const char* name : {"stage1", "latest", "final"}) {
    const auto manifest = root / name / "manifest.json";
    if (!fs::exists(manifest)) continue;
    std::ifstream f(manifest);
    const auto j = nlohmann::json::parse(f, nullptr, false);
    if (j.is_discarded() || !j.contains("stage") || !j.contains("iteration")) continue;
    std::pair<int, std::int64_t> pos{j["stage"].get<int>(), j["iteration"].get<std::int64_t>()};
    if (pos > best_pos) {
      best_pos = pos;
      best = root / name;
    }
  }
  return best;
}

struct TrainOutcome {
  fs::path final_checkpoint;
  std::unique_ptr<ModelBundle> bundle;
};

TrainOutcome train_run(const RunConfig& rc, const Dataset& data, bool resume, std::int64_t max_steps, std::ostream& out) {
  const OutputLayout layout{rc.out};
  layout.create();
  TrainHooks hooks;
  hooks.log_path = layout.logs() / "train.jsonl";
  hooks.checkpoint_dir = layout.checkpoints();
  hooks.checkpoint_every = rc.checkpoint_every;
  hooks.max_steps = max_steps;
  if (rc.log_every > 0) {
    hooks.on_step = [&out, every = rc.log_every](const StepEvent& e) {
      if (e.iteration % every == 0) {
        out << "stage " << e.stage << " iter " << e.iteration << " " << to_string(e.kind)
            << " total_g " << e.report.total_g << " total_d " << e.report.total_d << std::endl;
      }
    };
  }

  std::unique_ptr<ModelBundle> bundle;
  if (resume) {
    if (auto from = newest_checkpoint(layout.checkpoints())) {
      bundle = load_checkpoint(*from, rc.train.network);
      if (bundle->config != rc.train) {
        throw ConfigError("checkpoint " + from->string() + " was trained with a different config; resume with --config " +
                          (rc.out / "train.toml").string());
      }
      truncate_log(*hooks.log_path, bundle->stage, bundle->iteration);
      out << "resuming from " << from->string() << " at stage " << bundle->stage << " iteration " << bundle->iteration
          << std::endl;
    } else {
      out << "no checkpoint under " << layout.checkpoints().string() << ", starting fresh" << std::endl;
    }
  }
  write_text(rc.out / "train.toml", run_config_to_toml(rc));
  if (!bundle) {
    if (fs::exists(*hooks.log_path)) fs::remove(*hooks.log_path);
    bundle = run_variant(rc.train, data, hooks);
  } else {
    resume_training(*bundle, data, hooks);
  }
  if (!bundle->finished()) save_checkpoint(*bundle, layout.checkpoints() / "latest");
  return {layout.checkpoints() / (bundle->finished() ? "final" : "latest"), std::move(bundle)};
}

// An input face: a record of a manifest, an aligned PNG, or a raw PNG with landmarks.
struct FaceSource {
  std::optional<std::string> image, landmarks, data;
  std::optional<std::size_t> record;

  void add(CLI::App* app, const std::string& suffix, bool with_data) {
    app->add_option("--image" + suffix, image, "input PNG (aligned unless landmarks are given)");
    app->add_option("--landmarks" + suffix, landmarks, "raw-image landmarks: le_row,le_col,re_row,re_col,mouth_row,mouth_col");
    if (with_data) app->add_option("--data", data, "dataset directory or manifest for --record");
    app->add_option("--record" + suffix, record, "record index in --data");
  }

  torch::Tensor load(int image_size, const std::optional<std::string>& shared_data) const {
    if (image && record) throw UsageError("give either an image or a record, not both");
    if (record) {
      const auto& d = data ? data : shared_data;
      if (!d) throw UsageError("--record needs --data");
      const auto m = load_manifest(*d);
      if (*record >= m.records.size()) {
        throw UsageError("record " + std::to_string(*record) + " out of range (" + std::to_string(m.records.size()) + " records)");
      }
      return to_face_tensor(read_png(m.resolve(m.records[*record])));
    }
    if (!image) throw UsageError("an input image (--image) or record (--record with --data) is required");
    const auto raw = read_png(*image);
    if (landmarks) return preprocess(raw, parse_landmarks(*landmarks), image_size).image;
    if (raw.rows != image_size || raw.cols != image_size) {
      throw UsageError(*image + " is not an aligned " + std::to_string(image_size) + " px face; pass --landmarks");
    }
    return to_face_tensor(raw);
  }

  static LandmarkSet parse_landmarks(const std::string& text) {
    std::vector<double> v;
    std::stringstream ss(text);
    for (std::string item; std::getline(ss, item, ',');) {
      try {
        v.push_back(std::stod(item));
      } catch (const std::exception&) {
        throw UsageError("bad landmark value '" + item + "'");
      }
    }
    if (v.size() != 6) throw UsageError("--landmarks needs six comma-separated numbers");
    return {{v[0], v[1]}, {v[2], v[3]}, {v[4], v[5]}};
  }

  nlohmann::json to_json() const {
    nlohmann::json j = nlohmann::json::object();
    if (image) j["image"] = *image;
    if (landmarks) j["landmarks"] = *landmarks;
    if (data) j["data"] = *data;
    if (record) j["record"] = *record;
    return j;
  }
};

std::vector<double> parse_degrees(const std::string& text) {
  if (text == "all") return all_grid_degrees();
  std::vector<double> v;
  std::stringstream ss(text);
  for (std::string item; std::getline(ss, item, ',');) {
    try {
      v.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw UsageError("bad yaw '" + item + "'");
    }
  }
  return v;
}

void check_targets(const std::vector<double>& degs, int image_size) {
  for (double d : degs) RotationRequest{torch::zeros({3, image_size, image_size}), d}.validate(image_size);
}

void write_resolved(const fs::path& path, const std::string& command, nlohmann::json j) {
  j["command"] = command;
  write_text(path, j.dump(2) + "\n");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"LB-GAN face rotation: synthetic data, training, synthesis and evaluation", "lbgan"};
  app.require_subcommand(1);

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "render a synthetic multi-view face dataset");
  std::optional<std::string> synth_out;
  int synth_ids = 30, synth_size = 32;
  std::uint64_t synth_seed = 1;
  std::string synth_split = "train";
  synth->add_option("--out", synth_out, "output directory")->required();
  synth->add_option("--identities", synth_ids, "number of identities")->capture_default_str();
  synth->add_option("--seed", synth_seed, "dataset seed (LBGAN_SEED overrides)")->capture_default_str();
  synth->add_option("--size", synth_size, "image size in pixels")->capture_default_str();
  synth->add_option("--split", synth_split, "train or test")->capture_default_str();

  // train
  auto* train = app.add_subcommand("train", "train one variant");
  TrainFlags train_flags;
  train_flags.add(train, true);
  std::optional<std::string> train_data, train_out;
  bool train_resume = false;
  std::int64_t train_max_steps = -1;
  train->add_option("--data", train_data, "training dataset directory or manifest");
  train->add_option("--out", train_out, "output root (checkpoints/, logs/, images/, reports/)");
  train->add_flag("--resume", train_resume, "continue from the newest checkpoint under --out");
  train->add_option("--max-steps", train_max_steps, "stop after this many iterations (checkpointing 'latest')");

  // rotate / grid / morph
  std::optional<std::string> inf_ckpt, inf_out;
  std::string inf_prefix = "out";
  const auto add_inference = [&](CLI::App* cmd) {
    cmd->add_option("--checkpoint", inf_ckpt, "checkpoint directory")->required();
    cmd->add_option("--out", inf_out, "output root")->required();
    cmd->add_option("--prefix", inf_prefix, "output file prefix")->capture_default_str();
  };
  auto* rotate_cmd = app.add_subcommand("rotate", "rotate a face to one or more yaws");
  add_inference(rotate_cmd);
  FaceSource rotate_src;
  rotate_src.add(rotate_cmd, "", true);
  std::vector<double> rotate_degs;
  rotate_cmd->add_option("--deg", rotate_degs, "target yaw in degrees, [-90, 90]")->required();

  auto* grid_cmd = app.add_subcommand("grid", "input plus a sweep over target yaws");
  add_inference(grid_cmd);
  FaceSource grid_src;
  grid_src.add(grid_cmd, "", true);
  std::string grid_degs = "all";
  grid_cmd->add_option("--degs", grid_degs, "comma-separated yaws or 'all'")->capture_default_str();

  auto* morph_cmd = app.add_subcommand("morph", "interpolate between two identities");
  add_inference(morph_cmd);
  FaceSource morph_a, morph_b;
  std::optional<std::string> morph_data;
  morph_cmd->add_option("--data", morph_data, "dataset directory or manifest for --record-a/--record-b");
  morph_a.add(morph_cmd, "-a", false);
  morph_b.add(morph_cmd, "-b", false);
  int morph_steps = 8;
  double morph_deg = 0.0;
  morph_cmd->add_option("--steps", morph_steps, "interpolants including both ends")->capture_default_str();
  morph_cmd->add_option("--deg", morph_deg, "yaw of the decoded faces")->capture_default_str();

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "identification and pose metrics of a checkpoint");
  std::optional<std::string> eval_ckpt, eval_train, eval_test, eval_out, eval_name;
  std::uint64_t eval_seed = 7;
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint directory")->required();
  eval_cmd->add_option("--train-data", eval_train, "training split for the substitute recognisers")->required();
  eval_cmd->add_option("--test-data", eval_test, "test split with disjoint identities")->required();
  eval_cmd->add_option("--out", eval_out, "output root")->required();
  eval_cmd->add_option("--name", eval_name, "label for the report (defaults to the checkpoint's variant)");
  eval_cmd->add_option("--eval-seed", eval_seed, "seed of the substitute recognisers")->capture_default_str();

  // ablate
  auto* ablate_cmd = app.add_subcommand("ablate", "compare full, single_stage and no_regularizers");
  TrainFlags ablate_flags;
  ablate_flags.add(ablate_cmd, false);
  std::optional<std::string> ablate_train, ablate_test, ablate_out, ablate_runs;
  bool ablate_train_missing = false;
  ablate_cmd->add_option("--train-data", ablate_train, "training split")->required();
  ablate_cmd->add_option("--test-data", ablate_test, "test split")->required();
  ablate_cmd->add_option("--out", ablate_out, "output root")->required();
  ablate_cmd->add_option("--runs", ablate_runs, "directory of per-variant train roots [<out>/runs]");
  ablate_cmd->add_flag("--train-missing", ablate_train_missing, "train variants without a final checkpoint");
  ablate_cmd->add_option("--eval-seed", eval_seed, "seed of the substitute recognisers")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) {
      if (auto s = seed_from_env()) synth_seed = *s;
      const auto split = split_from_string(synth_split);
      if (synth_ids < 1) throw UsageError("--identities must be positive");
      const fs::path dir = *synth_out;
      generate_synthetic_dataset(synth_ids, synth_seed, synth_size, dir, split);
      write_resolved(dir / "synth_config.json", "synth-data",
                     {{"out", dir.string()}, {"identities", synth_ids}, {"seed", synth_seed}, {"size", synth_size},
                      {"split", synth_split}});
      out << "manifest " << (dir / "manifest.json").string() << "\n";
      out << "digest " << dataset_digest(dir / "manifest.json") << std::endl;
      return 0;
    }

    if (*train) {
      RunConfig rc = train_flags.resolve();
      if (train_data) rc.data = *train_data;
      if (train_out) rc.out = *train_out;
      if (rc.data.empty()) throw UsageError("--data is required");
      if (rc.out.empty()) throw UsageError("--out is required");
      const Dataset data(load_manifest(rc.data));
      bind_dataset(rc, data.manifest());
      auto result = train_run(rc, data, train_resume, train_max_steps, out);
      out << "checkpoint " << result.final_checkpoint.string() << std::endl;
      return 0;
    }

    if (*rotate_cmd || *grid_cmd || *morph_cmd) {
      const auto model = FrozenModel::load(*inf_ckpt);
      const int size = model.image_size();
      const OutputLayout layout{*inf_out};
      nlohmann::json resolved{{"checkpoint", *inf_ckpt}, {"out", *inf_out}, {"prefix", inf_prefix}};

      if (*rotate_cmd) {
        check_targets(rotate_degs, size);
        const auto x = rotate_src.load(size, std::nullopt);
        layout.create();
        for (double d : rotate_degs) {
          const auto path = layout.images() / output_filename(inf_prefix, d);
          write_png(path, rotate(model, {x, d}));
          out << path.string() << "\n";
        }
        resolved["input"] = rotate_src.to_json();
        resolved["deg"] = rotate_degs;
        write_resolved(layout.reports() / (inf_prefix + "_rotate.json"), "rotate", resolved);
      } else if (*grid_cmd) {
        const auto degs = parse_degrees(grid_degs);
        check_targets(degs, size);
        const auto x = grid_src.load(size, std::nullopt);
        layout.create();
        const auto path = layout.images() / (inf_prefix + "_grid.png");
        write_png(path, pose_sweep_grid(model, x, degs));
        out << path.string() << "\n";
        resolved["input"] = grid_src.to_json();
        resolved["degs"] = degs;
        write_resolved(layout.reports() / (inf_prefix + "_grid.json"), "grid", resolved);
      } else {
        check_targets({morph_deg}, size);
        if (morph_steps < 2) throw InvalidRequest("--steps must be at least 2");
        const auto x1 = morph_a.load(size, morph_data);
        const auto x2 = morph_b.load(size, morph_data);
        layout.create();
        const auto path = layout.images() / (inf_prefix + "_morph.png");
        write_png(path, identity_morph_grid(model, x1, x2, morph_steps, code_for_degrees(morph_deg)));
        out << path.string() << "\n";
        resolved["input_a"] = morph_a.to_json();
        resolved["input_b"] = morph_b.to_json();
        if (morph_data) resolved["data"] = *morph_data;
        resolved["steps"] = morph_steps;
        resolved["deg"] = morph_deg;
        write_resolved(layout.reports() / (inf_prefix + "_morph.json"), "morph", resolved);
      }
      out.flush();
      return 0;
    }

    if (*eval_cmd) {
      const auto model = FrozenModel::load(*eval_ckpt);
      const Dataset train_set(load_manifest(*eval_train));
      const Dataset test_set(load_manifest(*eval_test));
      check_disjoint_splits(train_set.manifest(), test_set.manifest());
      const auto evaluators = train_evaluators(train_set, eval_seed);
      const auto name = eval_name ? *eval_name : lbgan::to_string(model.bundle().config.variant);
      const auto report = evaluate_model(model, test_set, evaluators, name);
      const OutputLayout layout{*eval_out};
      layout.create();
      write_text(layout.reports() / ("eval_" + name + ".json"), report.to_json().dump(2) + "\n");
      write_text(layout.reports() / ("eval_" + name + ".txt"), report.to_text());
      write_text(layout.reports() / ("matches_" + name + ".csv"), report.matches_csv());
      write_resolved(layout.reports() / ("eval_" + name + ".config.json"), "eval",
                     {{"checkpoint", *eval_ckpt}, {"train_data", *eval_train}, {"test_data", *eval_test},
                      {"out", *eval_out}, {"name", name}, {"eval_seed", eval_seed}});
      out << report.to_text() << std::flush;
      return 0;
    }

    if (*ablate_cmd) {
      RunConfig base = ablate_flags.resolve();
      base.data = *ablate_train;
      const fs::path runs = ablate_runs ? fs::path(*ablate_runs) : fs::path(*ablate_out) / "runs";
      const Dataset train_set(load_manifest(*ablate_train));
      const Dataset test_set(load_manifest(*ablate_test));
      check_disjoint_splits(train_set.manifest(), test_set.manifest());
      bind_dataset(base, train_set.manifest());

      std::map<std::string, FrozenModel> models;
      std::vector<std::string> notices;
      for (auto v : {Variant::kFull, Variant::kSingleStage, Variant::kNoRegularizers}) {
        const auto name = lbgan::to_string(v);
        RunConfig rc = base;
        rc.train.variant = v;
        rc.out = runs / name;
        const auto ckpt = rc.out / "checkpoints" / "final";
        if (fs::exists(ckpt / "manifest.json")) {
          auto bundle = load_checkpoint(ckpt, rc.train.network);
          if (bundle->config != rc.train) notices.push_back(name + ": checkpoint config differs from the requested one");
          models.emplace(name, FrozenModel(std::shared_ptr<ModelBundle>(std::move(bundle))));
        } else if (ablate_train_missing) {
          out << "training " << name << " into " << rc.out.string() << std::endl;
          auto result = train_run(rc, train_set, false, -1, out);
          models.emplace(name, FrozenModel(std::shared_ptr<ModelBundle>(std::move(result.bundle))));
        } else {
          throw CheckpointError("no final checkpoint for " + name + " at " + ckpt.string() +
                                " (train it or pass --train-missing)");
        }
      }

      const auto evaluators = train_evaluators(train_set, eval_seed);
      const OutputLayout layout{*ablate_out};
      layout.create();
      std::map<std::string, EvalReport> reports;
      for (const auto& [name, model] : models) {
        auto report = evaluate_model(model, test_set, evaluators, name);
        write_text(layout.reports() / ("eval_" + name + ".json"), report.to_json().dump(2) + "\n");
        write_text(layout.reports() / ("eval_" + name + ".txt"), report.to_text());
        reports.emplace(name, std::move(report));
      }
      const auto table = ablation_compare(reports);
      auto j = table.to_json();
      j["notices"] = notices;
      write_text(layout.reports() / "ablation.json", j.dump(2) + "\n");
      write_text(layout.reports() / "ablation.txt", table.to_text());
      write_text(layout.reports() / "ablation.toml", run_config_to_toml(base));
      for (const auto& n : notices) out << "notice: " << n << "\n";
      out << table.to_text() << std::flush;
      return 0;
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << std::endl;
    return 2;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << std::endl;
    return 2;
  } catch (const InvalidRequest& e) {
    err << "invalid request: " << e.what() << std::endl;
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << std::endl;
    return 1;
  } catch (const std::exception& e) {
    err << "unexpected error: " << e.what() << std::endl;
    return 1;
  }
  return 2;
}

int run(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace lbgan::cli
