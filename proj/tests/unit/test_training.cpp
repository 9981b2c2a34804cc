#include <doctest.h>

#include <fstream>
#include <limits>

#include "lbgan/digest.hpp"
#include "lbgan/errors.hpp"
#include "lbgan/training.hpp"
#include "test_support.hpp"

using namespace lbgan;

namespace {

struct Digests {
  std::string g_n, g_e, d_n, d_e;
  friend bool operator==(const Digests&, const Digests&) = default;
};

Digests digests(const ModelBundle& b) {
  return {parameter_digest(*b.g_n), parameter_digest(*b.g_e), parameter_digest(*b.d_n), parameter_digest(*b.d_e)};
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> lines;
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

}  // namespace

TEST_SUITE("training") {
  TEST_CASE("config validation and serialisation") {
    auto c = tiny_train_config();
    CHECK_NOTHROW(c.validate());
    CHECK(train_config_from_json(to_json(c)) == c);
    CHECK(config_hash(c) == config_hash(train_config_from_json(to_json(c))));
    auto bad = c;
    bad.batch_size = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.stage2_gn_lr_factor = 1.5;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = c;
    bad.lr = 0.0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    CHECK_THROWS_AS(variant_from_string("st"), ConfigError);
    CHECK(variant_from_string("no_regularizers") == Variant::kNoRegularizers);

    const TrainConfig defaults;
    CHECK(defaults.lr == 2e-4);
    CHECK(defaults.adam_beta1 == 0.5);
    CHECK(defaults.batch_size == 24);
    CHECK(defaults.g_steps_per_d_step == 4);
    CHECK(defaults.stage2_gn_lr_factor == 0.25);
  }

  TEST_CASE("closed-form step counts") {
    auto c = tiny_train_config();
    c.stage1_iters = 7;
    c.stage2_iters = 12;
    CHECK(expected_step_counts(c) == StepCounts{7 + 10, 10, 7 + 2, 2});
    c.variant = Variant::kSingleStage;
    CHECK(expected_step_counts(c) == StepCounts{16, 16, 3, 3});
  }

  TEST_CASE("empty stage one only moves the stage marker") {
    const auto data = tiny_dataset("train_empty_s1");
    auto c = tiny_train_config();
    c.stage1_iters = 0;
    ModelBundle b(c);
    const auto before = digests(b);
    train_stage_one(b, data);
    CHECK(b.stage == 2);
    CHECK(b.iteration == 0);
    CHECK(digests(b) == before);
  }

  TEST_CASE("schedule conformance") {
    const auto data = tiny_dataset("train_schedule");
    auto c = tiny_train_config();
    ModelBundle b(c);
    auto prev = digests(b);
    std::vector<StepEvent> events;
    TrainHooks hooks;
    hooks.on_step = [&](const StepEvent& e) {
      const auto now = digests(b);
      if (e.kind == StepKind::kStageOne) {
        CHECK(now.g_e == prev.g_e);
        CHECK(now.d_e == prev.d_e);
        CHECK(now.g_n != prev.g_n);
        CHECK(now.d_n != prev.d_n);
        CHECK(e.lr_g_n == 2e-4);
      } else if (e.kind == StepKind::kGenerator) {
        CHECK(now.d_n == prev.d_n);
        CHECK(now.d_e == prev.d_e);
        CHECK(now.g_n != prev.g_n);
        CHECK(now.g_e != prev.g_e);
      } else {
        CHECK(now.g_n == prev.g_n);
        CHECK(now.g_e == prev.g_e);
        CHECK(now.d_n != prev.d_n);
        CHECK(now.d_e != prev.d_e);
      }
      if (e.stage == 2) {
        CHECK(e.lr_g_n == doctest::Approx(5e-5).epsilon(1e-12));
        CHECK(e.lr_d_n == doctest::Approx(5e-5).epsilon(1e-12));
        CHECK(e.lr_g_e == 2e-4);
      }
      prev = now;
      events.push_back(e);
    };
    train_stage_one(b, data, hooks);
    train_stage_two(b, data, hooks);
    REQUIRE(events.size() == 13);
    for (int i = 0; i < 3; ++i) CHECK(events[i].kind == StepKind::kStageOne);
    for (int k = 1; k <= 10; ++k) {
      CHECK(events[2 + k].iteration == k);
      CHECK(events[2 + k].kind == (k % 5 == 0 ? StepKind::kDiscriminator : StepKind::kGenerator));
    }
    CHECK(b.steps == expected_step_counts(c));
    CHECK(b.finished());
    CHECK_THROWS_AS(train_step(b, data), StateError);
  }

  TEST_CASE("variants") {
    const auto data = tiny_dataset("train_variants");
    auto c = tiny_train_config();

    c.variant = Variant::kNoRegularizers;
    int generator_steps = 0;
    TrainHooks hooks;
    hooks.on_step = [&](const StepEvent& e) {
      CHECK(e.report.rec == 0.0);
      CHECK(e.report.csc == 0.0);
      if (e.kind == StepKind::kGenerator) {
        ++generator_steps;
        CHECK(e.report.l2 > 0.0);
      }
    };
    auto no_reg = run_variant(c, data, hooks);
    CHECK(generator_steps == 8);
    CHECK(no_reg->steps == expected_step_counts(c));

    c.variant = Variant::kSingleStage;
    std::vector<StepEvent> events;
    hooks.on_step = [&](const StepEvent& e) { events.push_back(e); };
    auto single = run_variant(c, data, hooks);
    CHECK(events.size() == 13);
    for (const auto& e : events) {
      CHECK(e.stage == 2);
      CHECK(e.lr_g_n == 2e-4);
    }
    CHECK(single->steps == expected_step_counts(c));
    const auto total = [](const StepCounts& s) { return s.g_n + s.g_e + s.d_n + s.d_e; };
    auto full_cfg = tiny_train_config();
    CHECK(events.size() == static_cast<std::size_t>(full_cfg.stage1_iters + full_cfg.stage2_iters));

    c.variant = Variant::kFull;
    auto full = run_variant(c, data);
    CHECK(total(full->steps) > 0);
    CHECK_FALSE(digests(*full) == digests(*single));
    CHECK_FALSE(digests(*full) == digests(*no_reg));
    CHECK_FALSE(digests(*single) == digests(*no_reg));
  }

  TEST_CASE("runs are deterministic") {
    const auto data = tiny_dataset("train_determinism");
    const auto c = tiny_train_config();
    auto a = run_variant(c, data);
    auto b = run_variant(c, data);
    CHECK(digests(*a) == digests(*b));
    const auto dir = scratch_dir("train_determinism_ckpt");
    save_checkpoint(*a, dir / "a");
    save_checkpoint(*b, dir / "b");
    for (const char* f : {"g_n.bin", "g_e.bin", "d_n.bin", "d_e.bin", "sampler.state", "manifest.json"}) {
      CHECK(file_sha256((dir / "a" / f).string()) == file_sha256((dir / "b" / f).string()));
    }
  }

  TEST_CASE("checkpoint round trip resumes exactly") {
    const auto data = tiny_dataset("train_resume");
    const auto dir = scratch_dir("train_resume_ckpt");
    auto c = tiny_train_config();
    ModelBundle b(c);
    train_stage_one(b, data);
    TrainHooks h;
    h.max_steps = 3;
    train_stage_two(b, data, h);
    CHECK(b.iteration == 3);
    save_checkpoint(b, dir / "mid");

    const auto next = train_step(b, data);
    auto loaded = load_checkpoint(dir / "mid");
    CHECK(loaded->stage == 2);
    CHECK(loaded->iteration == 3);
    const auto resumed = train_step(*loaded, data);
    CHECK(resumed.report == next.report);
    CHECK(digests(*loaded) == digests(b));
    resume_training(b, data);
    resume_training(*loaded, data);
    CHECK(digests(*loaded) == digests(b));
    CHECK(loaded->steps == b.steps);

    const auto manifest = nlohmann::json::parse(std::ifstream(dir / "mid" / "manifest.json"));
    CHECK(manifest["stage"] == 2);
    CHECK(manifest["iteration"] == 3);
    CHECK(manifest["config_hash"] == config_hash(c));
    CHECK(manifest["version"] == kCheckpointVersion);
  }

  TEST_CASE("checkpoint errors") {
    const auto data = tiny_dataset("train_ckpt_errors");
    const auto dir = scratch_dir("train_ckpt_errors_dir");
    ModelBundle b(tiny_train_config());
    save_checkpoint(b, dir / "ok");
    CHECK_THROWS_AS(load_checkpoint(dir / "missing"), CheckpointError);

    auto wrong = tiny_train_config().network;
    wrong.image_size = 32;
    wrong.n_blocks = 2;
    CHECK_THROWS_AS(load_checkpoint(dir / "ok", wrong), ConfigError);
    CHECK_NOTHROW(load_checkpoint(dir / "ok", tiny_train_config().network));

    std::filesystem::copy(dir / "ok", dir / "corrupt", std::filesystem::copy_options::recursive);
    {
      std::fstream f(dir / "corrupt" / "g_e.bin", std::ios::in | std::ios::out | std::ios::binary);
      f.seekp(100);
      f.put('\x7f');
    }
    CHECK_THROWS_AS(load_checkpoint(dir / "corrupt"), CheckpointError);

    std::filesystem::copy(dir / "ok", dir / "version", std::filesystem::copy_options::recursive);
    auto m = nlohmann::json::parse(std::ifstream(dir / "version" / "manifest.json"));
    m["version"] = kCheckpointVersion + 1;
    std::ofstream(dir / "version" / "manifest.json") << m.dump();
    CHECK_THROWS_AS(load_checkpoint(dir / "version"), CheckpointError);
  }

  TEST_CASE("dataset must match the network") {
    const auto data = tiny_dataset("train_mismatch", 4);
    ModelBundle b(tiny_train_config(3));
    CHECK_THROWS_AS(train_step(b, data), ConfigError);
  }

  TEST_CASE("training log and periodic checkpoints") {
    const auto data = tiny_dataset("train_log");
    const auto dir = scratch_dir("train_log_out");
    TrainHooks hooks;
    hooks.log_path = dir / "logs" / "train.jsonl";
    hooks.checkpoint_dir = dir / "checkpoints";
    hooks.checkpoint_every = 2;
    auto c = tiny_train_config();
    run_variant(c, data, hooks);
    const auto lines = read_lines(*hooks.log_path);
    REQUIRE(lines.size() == 13);
    const auto first = nlohmann::json::parse(lines.front());
    CHECK(first["stage"] == 1);
    CHECK(first["iteration"] == 1);
    CHECK(first.contains("g_n"));
    const auto last = nlohmann::json::parse(lines.back());
    CHECK(last["stage"] == 2);
    CHECK(last["iteration"] == 10);
    CHECK(std::filesystem::exists(dir / "checkpoints" / "stage1" / "manifest.json"));
    CHECK(std::filesystem::exists(dir / "checkpoints" / "final" / "manifest.json"));
    CHECK(std::filesystem::exists(dir / "checkpoints" / "latest" / "manifest.json"));

    truncate_log(*hooks.log_path, 2, 4);
    CHECK(read_lines(*hooks.log_path).size() == 3 + 4);
  }

  TEST_CASE("non-finite loss aborts with a diagnostic checkpoint") {
    const auto data = tiny_dataset("train_nan");
    const auto dir = scratch_dir("train_nan_out");
    auto c = tiny_train_config();
    c.stage1_iters = 0;
    c.weights.lambda_rec = std::numeric_limits<double>::infinity();
    TrainHooks hooks;
    hooks.checkpoint_dir = dir;
    CHECK_THROWS_AS(run_variant(c, data, hooks), TrainingError);
    CHECK(std::filesystem::exists(dir / "diagnostic" / "manifest.json"));
  }
}
