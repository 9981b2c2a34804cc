#include "lbgan/training.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "lbgan/digest.hpp"
#include "lbgan/errors.hpp"
#include "lbgan/mask.hpp"

namespace lbgan {

namespace fs = std::filesystem;

std::string to_string(Variant variant) {
  switch (variant) {
    case Variant::kFull: return "full";
    case Variant::kSingleStage: return "single_stage";
    case Variant::kNoRegularizers: return "no_regularizers";
  }
  return "unknown";
}

Variant variant_from_string(const std::string& name) {
  if (name == "full") return Variant::kFull;
  if (name == "single_stage") return Variant::kSingleStage;
  if (name == "no_regularizers") return Variant::kNoRegularizers;
  throw ConfigError("unknown variant '" + name + "' (expected full, single_stage or no_regularizers)");
}

std::string to_string(StepKind kind) {
  switch (kind) {
    case StepKind::kStageOne: return "stage_one";
    case StepKind::kGenerator: return "generator";
    case StepKind::kDiscriminator: return "discriminator";
  }
  return "unknown";
}

void TrainConfig::validate() const {
  if (stage1_iters < 0 || stage2_iters < 0) throw ConfigError("iteration budgets must be non-negative");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (g_steps_per_d_step < 1) throw ConfigError("g_steps_per_d_step must be at least 1");
  if (!(lr > 0.0)) throw ConfigError("lr must be positive");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("Adam betas must lie in [0, 1)");
  }
  if (!(stage2_gn_lr_factor > 0.0 && stage2_gn_lr_factor <= 1.0)) {
    throw ConfigError("stage2_gn_lr_factor must lie in (0, 1]");
  }
  weights.validate();
  network.validate();
}

std::int64_t TrainConfig::stage2_length() const {
  return variant == Variant::kSingleStage ? std::int64_t{stage1_iters} + stage2_iters : stage2_iters;
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"stage1_iters", c.stage1_iters},
          {"stage2_iters", c.stage2_iters},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"adam_beta1", c.adam_beta1},
          {"adam_beta2", c.adam_beta2},
          {"stage2_gn_lr_factor", c.stage2_gn_lr_factor},
          {"g_steps_per_d_step", c.g_steps_per_d_step},
          {"lambda_rec", c.weights.lambda_rec},
          {"lambda_csc", c.weights.lambda_csc},
          {"seed", c.seed},
          {"variant", to_string(c.variant)},
          {"network", to_json(c.network)}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  try {
    c.stage1_iters = j.at("stage1_iters").get<int>();
    c.stage2_iters = j.at("stage2_iters").get<int>();
    c.batch_size = j.at("batch_size").get<int>();
    c.lr = j.at("lr").get<double>();
    c.adam_beta1 = j.at("adam_beta1").get<double>();
    c.adam_beta2 = j.at("adam_beta2").get<double>();
    c.stage2_gn_lr_factor = j.at("stage2_gn_lr_factor").get<double>();
    c.g_steps_per_d_step = j.at("g_steps_per_d_step").get<int>();
    c.weights.lambda_rec = j.at("lambda_rec").get<double>();
    c.weights.lambda_csc = j.at("lambda_csc").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.variant = variant_from_string(j.at("variant").get<std::string>());
    c.network = network_config_from_json(j.at("network"));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed training config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string config_hash(const TrainConfig& config) { return sha256_hex(to_json(config).dump()); }

StepCounts expected_step_counts(const TrainConfig& c) {
  StepCounts s;
  const std::int64_t cycle = c.g_steps_per_d_step + 1;
  const std::int64_t n2 = c.stage2_length();
  const std::int64_t d2 = n2 / cycle;
  const std::int64_t g2 = n2 - d2;
  const std::int64_t n1 = c.variant == Variant::kSingleStage ? 0 : c.stage1_iters;
  s.g_n = n1 + g2;
  s.d_n = n1 + d2;
  s.g_e = g2;
  s.d_e = d2;
  return s;
}

namespace {

std::unique_ptr<torch::optim::Adam> make_adam(const std::vector<torch::Tensor>& params, const TrainConfig& c) {
  return std::make_unique<torch::optim::Adam>(
      params, torch::optim::AdamOptions(c.lr).betas({c.adam_beta1, c.adam_beta2}));
}

double get_lr(torch::optim::Adam& opt) {
  return static_cast<torch::optim::AdamOptions&>(opt.param_groups()[0].options()).lr();
}

void set_lr(torch::optim::Adam& opt, double lr) {
  for (auto& group : opt.param_groups()) static_cast<torch::optim::AdamOptions&>(group.options()).lr(lr);
}

void apply_learning_rates(ModelBundle& b) {
  const auto& c = b.config;
  const bool reduced = b.stage == 2 && c.variant != Variant::kSingleStage;
  const double normalizer_lr = reduced ? c.lr * c.stage2_gn_lr_factor : c.lr;
  set_lr(*b.opt_g_n, normalizer_lr);
  set_lr(*b.opt_d_n, normalizer_lr);
  set_lr(*b.opt_g_e, c.lr);
  set_lr(*b.opt_d_e, c.lr);
}

void set_requires_grad(torch::nn::Module& m, bool on) {
  for (auto& p : m.parameters()) p.requires_grad_(on);
}

// Keeps a network frozen for the lifetime of the guard.
class Freeze {
 public:
  explicit Freeze(std::initializer_list<torch::nn::Module*> modules) : modules_(modules) {
    for (auto* m : modules_) set_requires_grad(*m, false);
  }
  ~Freeze() {
    for (auto* m : modules_) set_requires_grad(*m, true);
  }
  Freeze(const Freeze&) = delete;
  Freeze& operator=(const Freeze&) = delete;

 private:
  std::vector<torch::nn::Module*> modules_;
};

torch::Tensor sample_codes(std::int64_t n, Rng& rng) {
  std::uniform_int_distribution<int> pick(0, kNumPoses - 1);
  std::vector<std::int64_t> v(n);
  for (auto& x : v) x = pick(rng);
  return torch::tensor(v, torch::kLong);
}

struct PairedTargets {
  torch::Tensor images;
  torch::Tensor masks;
};

// Ground truth for (identity, c*) where the dataset has it; missing pairs get
// an all-zero mask so they drop out of the reconstruction term.
PairedTargets paired_targets(const Dataset& data, const Batch& batch, const torch::Tensor& c_star, bool plain) {
  const auto n = batch.size();
  std::vector<std::size_t> records(n);
  std::vector<float> found(n, 0.0f);
  auto ids = batch.identities.accessor<std::int64_t, 1>();
  auto codes = c_star.accessor<std::int64_t, 1>();
  for (std::int64_t i = 0; i < n; ++i) {
    if (auto r = data.find(static_cast<int>(ids[i]), static_cast<int>(codes[i]))) {
      records[i] = *r;
      found[i] = 1.0f;
    } else {
      records[i] = batch.records[i];
    }
  }
  auto gathered = data.gather(records);
  auto weight = torch::tensor(found).view({n, 1, 1, 1});
  auto masks = plain ? torch::ones_like(gathered.masks) : gathered.masks;
  return {gathered.images, masks * weight};
}

void ensure_finite(ModelBundle& b, const StepEvent& event, const TrainHooks& hooks) {
  if (event.report.all_finite()) return;
  std::string where = "stage " + std::to_string(event.stage) + " iteration " + std::to_string(event.iteration);
  if (hooks.checkpoint_dir) {
    const auto dir = *hooks.checkpoint_dir / "diagnostic";
    save_checkpoint(b, dir);
    where += "; diagnostic checkpoint at " + dir.string();
  }
  throw TrainingError("non-finite loss at " + where + ": " + event.report.to_json().dump());
}

void fill_lrs(ModelBundle& b, StepEvent& e) {
  e.lr_g_n = get_lr(*b.opt_g_n);
  e.lr_g_e = get_lr(*b.opt_g_e);
  e.lr_d_n = get_lr(*b.opt_d_n);
  e.lr_d_e = get_lr(*b.opt_d_e);
}

void stage_one_step(ModelBundle& b, const Dataset& data, StepEvent& event, const TrainHooks& hooks) {
  const auto n = static_cast<std::size_t>(b.config.batch_size);

  auto real = data.sample(n, true, b.rng);
  auto source = data.sample(n, false, b.rng);
  torch::Tensor fake;
  {
    torch::NoGradGuard no_grad;
    fake = b.g_n->forward(source.images);
  }
  auto d_loss = d_n_loss(b.d_n->forward(real.images).identity, real.identities, b.d_n->forward(fake).identity);
  event.report.d_n = d_loss.item<double>();
  event.report.total_d = event.report.d_n;

  auto x = data.sample(n, false, b.rng);
  ensure_finite(b, event, hooks);
  b.opt_d_n->zero_grad();
  d_loss.backward();
  b.opt_d_n->step();
  ++b.steps.d_n;

  Freeze frozen{b.d_n.ptr().get()};
  auto g_loss = g_n_loss(b.d_n->forward(b.g_n->forward(x.images)).identity, x.identities);
  event.report.g_n = g_loss.item<double>();
  event.report.total_g = event.report.g_n;
  ensure_finite(b, event, hooks);
  b.opt_g_n->zero_grad();
  g_loss.backward();
  b.opt_g_n->step();
  ++b.steps.g_n;
}

void generator_step(ModelBundle& b, const Dataset& data, StepEvent& event, const TrainHooks& hooks) {
  const auto& c = b.config;
  const bool no_reg = c.variant == Variant::kNoRegularizers;
  auto x = data.sample(static_cast<std::size_t>(c.batch_size), false, b.rng);
  auto c_star = sample_codes(x.size(), b.rng);
  auto target = paired_targets(data, x, c_star, no_reg);

  Freeze frozen{b.d_n.ptr().get(), b.d_e.ptr().get()};
  auto frontal = b.g_n->forward(x.images);
  auto x_hat = b.g_e->forward(x.images, frontal, one_hot_codes(c_star));
  auto de = b.d_e->forward(x_hat);

  GeneratorLossInputs in;
  in.dn_probs_fake = b.d_n->forward(frontal).identity;
  in.de_id_fake = de.identity;
  in.de_pose_fake = de.pose;
  in.y_id = x.identities;
  in.y_p = x.pose_indices;
  in.c_star = c_star;
  in.x = x.images;
  in.x_hat = x_hat;
  in.input_mask = x.masks;
  in.paired_target = target.images;
  in.target_mask = target.masks;
  in.plain_reconstruction = no_reg;
  LossWeights weights = c.weights;
  if (no_reg) weights.lambda_csc = 0.0;

  auto value = total_generator_loss(in, weights);
  event.report = value.report;
  ensure_finite(b, event, hooks);
  b.opt_g_n->zero_grad();
  b.opt_g_e->zero_grad();
  value.total.backward();
  b.opt_g_n->step();
  b.opt_g_e->step();
  ++b.steps.g_n;
  ++b.steps.g_e;
}

void discriminator_step(ModelBundle& b, const Dataset& data, StepEvent& event, const TrainHooks& hooks) {
  const auto n = static_cast<std::size_t>(b.config.batch_size);
  auto frontal_real = data.sample(n, true, b.rng);
  auto x = data.sample(n, false, b.rng);
  auto c_star = sample_codes(x.size(), b.rng);
  torch::Tensor frontal, x_hat;
  {
    torch::NoGradGuard no_grad;
    frontal = b.g_n->forward(x.images);
    x_hat = b.g_e->forward(x.images, frontal, one_hot_codes(c_star));
  }
  auto de_real = b.d_e->forward(x.images);

  DiscriminatorLossInputs in;
  in.dn_probs_real = b.d_n->forward(frontal_real.images).identity;
  in.dn_y_id = frontal_real.identities;
  in.dn_probs_fake = b.d_n->forward(frontal).identity;
  in.de_id_real = de_real.identity;
  in.de_pose_real = de_real.pose;
  in.de_y_id = x.identities;
  in.de_y_p = x.pose_indices;
  in.de_id_fake = b.d_e->forward(x_hat).identity;

  auto value = total_discriminator_loss(in);
  event.report = value.report;
  ensure_finite(b, event, hooks);
  b.opt_d_n->zero_grad();
  b.opt_d_e->zero_grad();
  value.total.backward();
  b.opt_d_n->step();
  b.opt_d_e->step();
  ++b.steps.d_n;
  ++b.steps.d_e;
}

void append_log(const fs::path& path, const StepEvent& event) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw IoError("cannot append to " + path.string());
  out << event.to_json().dump() << '\n';
}

void advance_stage(ModelBundle& b) {
  if (b.stage == 1 && b.iteration >= b.config.stage1_iters) {
    b.stage = 2;
    b.iteration = 0;
  }
}

bool stage_done(const ModelBundle& b) {
  return b.stage == 1 ? b.iteration >= b.config.stage1_iters : b.finished();
}

void after_step(ModelBundle& b, const StepEvent& event, const TrainHooks& hooks) {
  if (hooks.log_path) append_log(*hooks.log_path, event);
  if (hooks.checkpoint_dir && hooks.checkpoint_every > 0 && b.iteration % hooks.checkpoint_every == 0) {
    save_checkpoint(b, *hooks.checkpoint_dir / "latest");
  }
  if (hooks.on_step) hooks.on_step(event);
}

// Runs steps until the current stage ends or the step budget is spent; returns steps taken.
std::int64_t run_stage(ModelBundle& b, const Dataset& data, const TrainHooks& hooks, std::int64_t budget) {
  std::int64_t taken = 0;
  while (!stage_done(b) && (budget < 0 || taken < budget)) {
    train_step(b, data, hooks);
    ++taken;
  }
  return taken;
}

void check_compatible(const ModelBundle& b, const Dataset& data) {
  if (data.image_size() != b.config.network.image_size) {
    throw ConfigError("dataset image_size " + std::to_string(data.image_size()) + " does not match the network's " +
                      std::to_string(b.config.network.image_size));
  }
  if (data.manifest().n_id != b.config.network.n_identities) {
    throw ConfigError("dataset has " + std::to_string(data.manifest().n_id) + " identities, network expects " +
                      std::to_string(b.config.network.n_identities));
  }
}

std::int64_t remaining(std::int64_t budget, std::int64_t used) { return budget < 0 ? -1 : budget - used; }

}  // namespace

ModelBundle::ModelBundle(const TrainConfig& cfg) : config(cfg), rng(cfg.seed) {
  config.validate();
  g_n = make_normalizer(config.network);
  g_e = make_editor(config.network);
  d_n = make_normalizer_discriminator(config.network);
  d_e = make_editor_discriminator(config.network);
  opt_g_n = make_adam(g_n->parameters(), config);
  opt_g_e = make_adam(g_e->parameters(), config);
  opt_d_n = make_adam(d_n->parameters(), config);
  opt_d_e = make_adam(d_e->parameters(), config);
  if (config.variant == Variant::kSingleStage) stage = 2;
  apply_learning_rates(*this);
}

bool ModelBundle::finished() const { return stage == 2 && iteration >= config.stage2_length(); }

void ModelBundle::set_train_mode(bool on) {
  g_n->train(on);
  g_e->train(on);
  d_n->train(on);
  d_e->train(on);
}

nlohmann::json StepEvent::to_json() const {
  auto j = report.to_json();
  j["stage"] = stage;
  j["iteration"] = iteration;
  j["kind"] = to_string(kind);
  j["lr"] = {{"g_n", lr_g_n}, {"g_e", lr_g_e}, {"d_n", lr_d_n}, {"d_e", lr_d_e}};
  return j;
}

StepEvent train_step(ModelBundle& b, const Dataset& data, const TrainHooks& hooks) {
  advance_stage(b);
  if (b.finished()) throw StateError("training schedule already complete");
  check_compatible(b, data);
  apply_learning_rates(b);

  StepEvent event;
  event.stage = b.stage;
  event.iteration = b.iteration + 1;
  fill_lrs(b, event);
  if (b.stage == 1) {
    event.kind = StepKind::kStageOne;
    stage_one_step(b, data, event, hooks);
  } else {
    const auto cycle = b.config.g_steps_per_d_step + 1;
    const bool generator = (event.iteration - 1) % cycle < b.config.g_steps_per_d_step;
    event.kind = generator ? StepKind::kGenerator : StepKind::kDiscriminator;
    if (generator) {
      generator_step(b, data, event, hooks);
    } else {
      discriminator_step(b, data, event, hooks);
    }
  }
  ++b.iteration;
  after_step(b, event, hooks);
  return event;
}

void train_stage_one(ModelBundle& b, const Dataset& data, const TrainHooks& hooks) {
  if (b.stage != 1) throw StateError("bundle is not in stage 1");
  run_stage(b, data, hooks, hooks.max_steps);
  if (b.iteration < b.config.stage1_iters) return;
  if (hooks.checkpoint_dir && b.config.stage1_iters > 0) save_checkpoint(b, *hooks.checkpoint_dir / "stage1");
  advance_stage(b);
  apply_learning_rates(b);
}

void train_stage_two(ModelBundle& b, const Dataset& data, const TrainHooks& hooks) {
  advance_stage(b);
  if (b.stage != 2) throw StateError("stage 1 has not finished");
  run_stage(b, data, hooks, hooks.max_steps);
  if (b.finished() && hooks.checkpoint_dir) save_checkpoint(b, *hooks.checkpoint_dir / "final");
}

void resume_training(ModelBundle& b, const Dataset& data, const TrainHooks& hooks) {
  check_compatible(b, data);
  b.set_train_mode(true);
  std::int64_t used = 0;
  if (b.stage == 1) {
    const auto before = b.iteration;
    train_stage_one(b, data, hooks);
    used = b.stage == 1 ? b.iteration - before : b.config.stage1_iters - before;
    if (b.stage == 1) return;
  }
  TrainHooks h = hooks;
  h.max_steps = remaining(hooks.max_steps, used);
  if (h.max_steps == 0) return;
  train_stage_two(b, data, h);
}

std::unique_ptr<ModelBundle> run_variant(const TrainConfig& config, const Dataset& data, const TrainHooks& hooks) {
  auto bundle = std::make_unique<ModelBundle>(config);
  resume_training(*bundle, data, hooks);
  return bundle;
}

// ---------------------------------------------------------------------------
// Checkpoints

namespace {

constexpr char kBlobMagic[8] = {'L', 'B', 'G', 'A', 'N', 'P', 'R', 'M'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T take(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw CheckpointError("truncated parameter blob");
  return v;
}

void put_tensor(std::ostream& out, const torch::Tensor& t) {
  auto c = t.detach().contiguous();
  put<std::uint8_t>(out, c.scalar_type() == torch::kDouble ? 1 : 0);
  if (c.scalar_type() != torch::kDouble && c.scalar_type() != torch::kFloat) {
    throw CheckpointError("unsupported tensor type in checkpoint");
  }
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.dim()));
  for (auto d : c.sizes()) put<std::int64_t>(out, d);
  out.write(static_cast<const char*>(c.data_ptr()), static_cast<std::streamsize>(c.numel() * c.element_size()));
}

torch::Tensor take_tensor(std::istream& in) {
  const auto type = take<std::uint8_t>(in) == 1 ? torch::kDouble : torch::kFloat;
  const auto dims = take<std::uint32_t>(in);
  if (dims > 8) throw CheckpointError("corrupt tensor header");
  std::vector<std::int64_t> shape(dims);
  for (auto& d : shape) {
    d = take<std::int64_t>(in);
    if (d < 0) throw CheckpointError("corrupt tensor header");
  }
  auto t = torch::empty(shape, torch::TensorOptions().dtype(type));
  in.read(static_cast<char*>(t.data_ptr()), static_cast<std::streamsize>(t.numel() * t.element_size()));
  if (!in) throw CheckpointError("truncated tensor data");
  return t;
}

std::string encode_network(torch::nn::Module& net, torch::optim::Adam& opt) {
  std::ostringstream out(std::ios::binary);
  out.write(kBlobMagic, sizeof kBlobMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  const auto named = net.named_parameters();
  put<std::uint32_t>(out, static_cast<std::uint32_t>(named.size()));
  for (const auto& p : named) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(p.key().size()));
    out.write(p.key().data(), static_cast<std::streamsize>(p.key().size()));
    put_tensor(out, p.value());
    auto it = opt.state().find(p.value().unsafeGetTensorImpl());
    if (it == opt.state().end()) {
      put<std::uint8_t>(out, 0);
      continue;
    }
    const auto& s = static_cast<const torch::optim::AdamParamState&>(*it->second);
    put<std::uint8_t>(out, 1);
    put<std::int64_t>(out, s.step());
    put_tensor(out, s.exp_avg());
    put_tensor(out, s.exp_avg_sq());
  }
  return out.str();
}

void decode_network(const std::string& blob, torch::nn::Module& net, torch::optim::Adam& opt, const std::string& label) {
  std::istringstream in(blob, std::ios::binary);
  char magic[sizeof kBlobMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kBlobMagic, sizeof magic) != 0) throw CheckpointError(label + ": not a parameter blob");
  if (take<std::uint32_t>(in) != kCheckpointVersion) throw CheckpointError(label + ": blob version mismatch");
  auto named = net.named_parameters();
  if (take<std::uint32_t>(in) != named.size()) throw CheckpointError(label + ": parameter count mismatch");
  torch::NoGradGuard no_grad;
  for (auto& p : named) {
    const auto len = take<std::uint32_t>(in);
    if (len > 4096) throw CheckpointError(label + ": corrupt parameter name");
    std::string name(len, '\0');
    in.read(name.data(), len);
    if (name != p.key()) throw CheckpointError(label + ": expected parameter " + p.key() + ", found " + name);
    auto value = take_tensor(in);
    if (value.sizes() != p.value().sizes()) throw CheckpointError(label + ": shape mismatch for " + name);
    p.value().copy_(value);
    auto key = p.value().unsafeGetTensorImpl();
    opt.state().erase(key);
    if (take<std::uint8_t>(in) == 0) continue;
    auto state = std::make_unique<torch::optim::AdamParamState>();
    state->step(take<std::int64_t>(in));
    state->exp_avg(take_tensor(in).to(p.value().dtype()));
    state->exp_avg_sq(take_tensor(in).to(p.value().dtype()));
    if (state->exp_avg().sizes() != p.value().sizes() || state->exp_avg_sq().sizes() != p.value().sizes()) {
      throw CheckpointError(label + ": optimizer state shape mismatch for " + name);
    }
    opt.state()[key] = std::move(state);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw CheckpointError(label + ": trailing bytes");
}

void write_file(const fs::path& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("cannot write " + path.string());
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("missing checkpoint file " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct NetworkSlot {
  const char* name;
  torch::nn::Module* net;
  torch::optim::Adam* opt;
};

std::vector<NetworkSlot> slots(const ModelBundle& b) {
  return {{"g_n", b.g_n.ptr().get(), b.opt_g_n.get()},
          {"g_e", b.g_e.ptr().get(), b.opt_g_e.get()},
          {"d_n", b.d_n.ptr().get(), b.opt_d_n.get()},
          {"d_e", b.d_e.ptr().get(), b.opt_d_e.get()}};
}

}  // namespace

fs::path save_checkpoint(const ModelBundle& b, const fs::path& dir) {
  const fs::path target = fs::absolute(dir);
  fs::create_directories(target.parent_path());
  const fs::path tmp = target.parent_path() / (target.filename().string() + ".tmp");
  fs::remove_all(tmp);
  fs::create_directories(tmp);

  nlohmann::json files = nlohmann::json::object();
  for (const auto& slot : slots(b)) {
    const auto blob = encode_network(*slot.net, *slot.opt);
    const std::string file = std::string(slot.name) + ".bin";
    write_file(tmp / file, blob);
    files[slot.name] = {{"file", file}, {"sha256", sha256_hex(blob)}};
  }
  std::ostringstream rng_state;
  rng_state << b.rng;
  write_file(tmp / "sampler.state", rng_state.str());
  files["sampler"] = {{"file", "sampler.state"}, {"sha256", sha256_hex(rng_state.str())}};

  const nlohmann::json manifest = {
      {"version", kCheckpointVersion},
      {"stage", b.stage},
      {"iteration", b.iteration},
      {"finished", b.finished()},
      {"variant", to_string(b.config.variant)},
      {"config", to_json(b.config)},
      {"config_hash", config_hash(b.config)},
      {"steps", {{"g_n", b.steps.g_n}, {"g_e", b.steps.g_e}, {"d_n", b.steps.d_n}, {"d_e", b.steps.d_e}}},
      {"files", files}};
  write_file(tmp / "manifest.json", manifest.dump(2) + "\n");

  const fs::path old = target.parent_path() / (target.filename().string() + ".old");
  fs::remove_all(old);
  if (fs::exists(target)) fs::rename(target, old);
  fs::rename(tmp, target);
  fs::remove_all(old);
  return target / "manifest.json";
}

std::unique_ptr<ModelBundle> load_checkpoint(const fs::path& dir) {
  const fs::path manifest_path = fs::is_directory(dir) ? dir / "manifest.json" : dir;
  const fs::path root = manifest_path.parent_path();
  nlohmann::json m;
  try {
    m = nlohmann::json::parse(read_file(manifest_path));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("corrupt checkpoint manifest: " + std::string(e.what()));
  }
  try {
    const int version = m.at("version").get<int>();
    if (version != kCheckpointVersion) {
      throw CheckpointError("checkpoint version " + std::to_string(version) + " is not supported (expected " +
                            std::to_string(kCheckpointVersion) + ")");
    }
    auto config = train_config_from_json(m.at("config"));
    if (m.at("config_hash").get<std::string>() != config_hash(config)) {
      throw CheckpointError("config hash does not match the stored config");
    }
    auto bundle = std::make_unique<ModelBundle>(config);
    const auto& files = m.at("files");
    auto verified = [&](const std::string& key) {
      const auto& entry = files.at(key);
      auto bytes = read_file(root / entry.at("file").get<std::string>());
      if (sha256_hex(bytes) != entry.at("sha256").get<std::string>()) {
        throw CheckpointError("digest mismatch for " + key + " (file corrupt)");
      }
      return bytes;
    };
    for (const auto& slot : slots(*bundle)) decode_network(verified(slot.name), *slot.net, *slot.opt, slot.name);
    std::istringstream rng_state(verified("sampler"));
    rng_state >> bundle->rng;
    if (!rng_state) throw CheckpointError("corrupt sampler state");

    bundle->stage = m.at("stage").get<int>();
    bundle->iteration = m.at("iteration").get<std::int64_t>();
    if (bundle->stage != 1 && bundle->stage != 2) throw CheckpointError("invalid stage marker");
    const auto& s = m.at("steps");
    bundle->steps = {s.at("g_n").get<std::int64_t>(), s.at("g_e").get<std::int64_t>(), s.at("d_n").get<std::int64_t>(),
                     s.at("d_e").get<std::int64_t>()};
    apply_learning_rates(*bundle);
    return bundle;
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError("malformed checkpoint manifest: " + std::string(e.what()));
  }
}

std::unique_ptr<ModelBundle> load_checkpoint(const fs::path& dir, const NetworkConfig& expected) {
  auto bundle = load_checkpoint(dir);
  auto stored = bundle->config.network;
  auto wanted = expected;
  stored.init_seed = wanted.init_seed = 0;
  stored.init_std = wanted.init_std = 0;
  if (!(stored == wanted)) {
    throw ConfigError("checkpoint architecture " + to_json(bundle->config.network).dump() +
                      " does not match the requested " + to_json(expected).dump());
  }
  return bundle;
}

void truncate_log(const fs::path& log_path, int stage, std::int64_t iteration) {
  if (!fs::exists(log_path)) return;
  std::ifstream in(log_path);
  std::string line, kept;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line, nullptr, false);
    if (j.is_discarded()) continue;
    const int s = j.value("stage", 0);
    const auto it = j.value("iteration", std::int64_t{0});
    if (s < stage || (s == stage && it <= iteration)) kept += line + "\n";
  }
  in.close();
  const fs::path tmp = log_path.string() + ".tmp";
  write_file(tmp, kept);
  fs::rename(tmp, log_path);
}

}  // namespace lbgan
