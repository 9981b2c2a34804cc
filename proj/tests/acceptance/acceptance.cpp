// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits non-zero if any criterion fails. Criteria 4-8 share one desk-profile
// pipeline (two full seed-1 runs, two ablation variants, one evaluator set).
//
//   lbgan_acceptance [--work DIR] [--only 1,2,3]

#include <ATen/CPUGeneratorImpl.h>
#include <CLI11.hpp>

#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <random>
#include <set>
#include <sstream>

#include "lbgan/cli.hpp"
#include "lbgan/digest.hpp"
#include "lbgan/errors.hpp"
#include "lbgan/evaluation.hpp"
#include "lbgan/inference.hpp"
#include "lbgan/losses.hpp"
#include "lbgan/mask.hpp"
#include "lbgan/synthetic.hpp"
#include "lbgan/training.hpp"

using namespace lbgan;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string num(double v, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

struct Verdict {
  int id;
  std::string name;
  bool pass = true;
  std::vector<std::string> details;

  void check(bool ok, const std::string& what) {
    pass = pass && ok;
    details.push_back(std::string(ok ? "" : "!") + what);
  }
};

std::vector<Verdict> verdicts;

void report(Verdict v, double elapsed) {
  std::ostringstream line;
  line << (v.pass ? "PASS" : "FAIL") << "  " << v.id << ". " << v.name << " [" << num(elapsed, 3) << " s]";
  for (std::size_t i = 0; i < v.details.size(); ++i) line << (i == 0 ? ": " : "; ") << v.details[i];
  std::cout << line.str() << std::endl;
  verdicts.push_back(std::move(v));
}

// ------------------------------------------------------------------ 1

// Central differences over `coords` entries drawn uniformly from all of params.
double max_fd_error(const std::function<torch::Tensor()>& f, const std::vector<torch::Tensor>& params, int coords,
                    std::uint64_t seed) {
  for (auto p : params) p.mutable_grad() = torch::Tensor();
  f().backward();
  std::vector<std::int64_t> offsets{0};
  for (const auto& p : params) offsets.push_back(offsets.back() + p.numel());
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::int64_t> pick(0, offsets.back() - 1);
  const double eps = 1e-6;
  double worst = 0.0;
  torch::NoGradGuard no_grad;
  for (int k = 0; k < coords; ++k) {
    const auto flat = pick(rng);
    std::size_t t = 0;
    while (flat >= offsets[t + 1]) ++t;
    auto view = params[t].view({-1});
    const auto i = flat - offsets[t];
    const double orig = view[i].item<double>();
    view[i] = orig + eps;
    const double up = f().item<double>();
    view[i] = orig - eps;
    const double down = f().item<double>();
    view[i] = orig;
    const double numeric = (up - down) / (2 * eps);
    const double analytic = params[t].grad().view({-1})[i].item<double>();
    const double scale = std::max({std::abs(numeric), std::abs(analytic), 1e-8});
    worst = std::max(worst, std::abs(numeric - analytic) / scale);
  }
  return worst;
}

void criterion_gradients() {
  const auto t0 = Clock::now();
  Verdict v{1, "gradient oracle (central differences, float64, 8x8 inputs, 100 coordinates)"};
  auto gen = at::make_generator<at::CPUGeneratorImpl>(2024);
  auto rnd = [&](std::vector<std::int64_t> shape) {
    return torch::randn(shape, gen, torch::kFloat64).requires_grad_();
  };
  auto x = torch::randn({2, 3, 8, 8}, gen, torch::kFloat64);
  auto x_hat = rnd({2, 3, 8, 8});
  auto mask = (torch::rand({2, 1, 8, 8}, gen, torch::kFloat64) > 0.5).to(torch::kFloat64);
  // 8 samples x 8 classes (7 identities + fake); pose heads carry 13 bins
  auto real = rnd({8, 8}), fake = rnd({8, 8}), pose = rnd({8, 13});
  auto y = torch::randint(0, 7, {8}, gen, torch::kLong);
  auto yp = torch::randint(0, 13, {8}, gen, torch::kLong);
  auto sm = [](const torch::Tensor& l) { return torch::softmax(l, 1); };

  const std::vector<std::pair<std::string, std::function<double()>>> cases{
      {"attention_l2", [&] { return max_fd_error([&] { return attention_l2(x, x_hat, mask); }, {x_hat}, 100, 1); }},
      {"csc_loss",
       [&] {
         return max_fd_error([&] { return csc_loss(x, x_hat, mask, torch::tensor({4, 9}), torch::tensor({4, 2})); },
                             {x_hat}, 100, 2);
       }},
      {"d_n_loss", [&] { return max_fd_error([&] { return d_n_loss(sm(real), y, sm(fake)); }, {real, fake}, 100, 3); }},
      {"g_n_loss", [&] { return max_fd_error([&] { return g_n_loss(sm(fake), y); }, {fake}, 100, 4); }},
      {"d_e_loss",
       [&] { return max_fd_error([&] { return d_e_loss(sm(real), y, sm(pose), yp, sm(fake)); }, {real, pose, fake}, 100, 5); }},
      {"g_e_loss", [&] { return max_fd_error([&] { return g_e_loss(sm(pose), yp, sm(fake), y); }, {pose, fake}, 100, 6); }},
  };
  for (const auto& [name, run] : cases) {
    const double err = run();
    v.check(err < 1e-4, name + " " + num(err, 2));
  }
  const double elapsed = seconds_since(t0);
  v.check(elapsed < 60, "runtime " + num(elapsed, 3) + " s < 60 s");
  report(v, elapsed);
}

// ------------------------------------------------------------------ 2

// Parity-preserving nearest scaling of a 96 px patch side, computed directly.
int scaled_side(int side96, int size) {
  const double exact = side96 * size / 96.0;
  int best = side96 % 2;
  for (int n = side96 % 2; n <= size + 2; n += 2) {
    if (std::abs(n - exact) < std::abs(best - exact)) best = n;
  }
  return std::max(best, 1);
}

int oracle_mask_count(const LandmarkSet& lm, int size) {
  std::vector<std::vector<int>> grid(size, std::vector<int>(size, 0));
  auto paint = [&](const Point& p, int n) {
    const int r0 = static_cast<int>(std::floor(p.row)) - n / 2;
    const int c0 = static_cast<int>(std::floor(p.col)) - n / 2;
    for (int r = r0; r < r0 + n; ++r) {
      for (int c = c0; c < c0 + n; ++c) {
        if (r >= 0 && r < size && c >= 0 && c < size) grid[r][c] = 1;
      }
    }
  };
  paint(lm.left_eye, scaled_side(15, size));
  paint(lm.right_eye, scaled_side(15, size));
  paint(lm.mouth_center, scaled_side(20, size));
  int count = 0;
  for (const auto& row : grid) {
    for (int v : row) count += v;
  }
  return count;
}

void criterion_mask() {
  const auto t0 = Clock::now();
  Verdict v{2, "mask semantics"};
  struct Case {
    LandmarkSet lm;
    int size;
  };
  const std::vector<Case> cases{
      {{{40, 30}, {40, 66}, {72, 48}}, 96},           // non-overlapping default patches
      {{{40, 44}, {40, 50}, {72, 48}}, 96},           // overlapping eyes
      {{{0, 0}, {0, 95.5}, {95.9, 95.9}}, 96},        // clipped at the corners
      {alignment_template(32), 32},
      {alignment_template(16), 16},
      {{{13.4, 9.7}, {13.1, 22.2}, {24.0, 16.5}}, 32},
  };
  int mismatches = 0;
  int count850 = -1;
  for (const auto& c : cases) {
    const int got = static_cast<int>(build_mask(c.lm, c.size).sum().item<double>());
    if (count850 < 0) count850 = got;
    if (got != oracle_mask_count(c.lm, c.size)) ++mismatches;
  }
  v.check(count850 == 850, "default patches at 96 px cover " + std::to_string(count850) + " px (850)");
  v.check(mismatches == 0, std::to_string(cases.size() - mismatches) + "/" + std::to_string(cases.size()) +
                               " masks match the rasterisation oracle");

  // every unmasked pixel of every channel, one at a time
  auto gen = at::make_generator<at::CPUGeneratorImpl>(7);
  const int size = 32;
  const auto m = build_mask(alignment_template(size), size).to(torch::kFloat64);
  const auto x = torch::randn({3, size, size}, gen, torch::kFloat64);
  auto x_hat = torch::randn({3, size, size}, gen, torch::kFloat64);
  const double base = attention_l2(x, x_hat, m).item<double>();
  int perturbed = 0, changed = 0;
  for (int r = 0; r < size; ++r) {
    for (int c = 0; c < size; ++c) {
      if (m[r][c].item<double>() != 0.0) continue;
      for (int ch = 0; ch < 3; ++ch) {
        const double orig = x_hat[ch][r][c].item<double>();
        x_hat[ch][r][c] = orig + 3.7;
        if (attention_l2(x, x_hat, m).item<double>() != base) ++changed;
        x_hat[ch][r][c] = orig;
        ++perturbed;
      }
    }
  }
  v.check(changed == 0, std::to_string(perturbed) + " unmasked perturbations, " + std::to_string(changed) + " changed the loss");
  report(v, seconds_since(t0));
}

// ------------------------------------------------------------------ 3

void criterion_values() {
  const auto t0 = Clock::now();
  Verdict v{3, "hand-computed loss values"};
  auto p = [](std::vector<double> a) { return torch::tensor(a, torch::kFloat64).unsqueeze(0); };
  auto l = [](int i) { return torch::tensor({i}, torch::kLong); };
  const double dn = d_n_loss(p({0.7, 0.2, 0.1}), l(0), p({0.2, 0.3, 0.5})).item<double>();
  v.check(std::abs(dn - 1.0498) <= 1e-4, "d_n_loss " + num(dn, 8) + " (1.0498 +- 1e-4)");

  auto diff = torch::tensor({1.0, 2.0, 3.0, 4.0}, torch::kFloat64).view({1, 1, 2, 2});
  auto mask = torch::tensor({1.0, 0.0, 0.0, 1.0}, torch::kFloat64).view({2, 2});
  const double l2 = attention_l2(diff, torch::zeros_like(diff), mask).item<double>();
  v.check(std::abs(l2 - std::sqrt(17.0)) <= 1e-6, "attention_l2 " + num(l2, 10) + " (sqrt 17 +- 1e-6)");

  auto x_hat = torch::zeros_like(diff).requires_grad_();
  auto csc = csc_loss(diff, x_hat, mask, l(3), l(5));
  csc.backward();
  v.check(csc.item<double>() == 0.0 && x_hat.grad().abs().max().item<double>() == 0.0,
          "csc_loss mismatch " + num(csc.item<double>()) + " with zero gradient");
  report(v, seconds_since(t0));
}

// ------------------------------------------------------------------ pipeline

struct Digests {
  std::string g_n, g_e, d_n, d_e;
};

Digests digests(const ModelBundle& b) {
  return {parameter_digest(*b.g_n), parameter_digest(*b.g_e), parameter_digest(*b.d_n), parameter_digest(*b.d_e)};
}

double optimizer_lr(torch::optim::Adam& opt) {
  return static_cast<torch::optim::AdamOptions&>(opt.param_groups().front().options()).lr();
}

struct Pipeline {
  fs::path work;
  std::unique_ptr<Dataset> train, test;
  TrainConfig desk;
  std::shared_ptr<ModelBundle> run_a;
  std::unique_ptr<ModelBundle> run_b;
  double run_a_seconds = 0;
  std::vector<StepEvent> events_a;
  std::optional<LossReport> report_after_mid;
  std::optional<Evaluators> evaluators;
  std::map<std::string, EvalReport> reports;

  void data() {
    if (train) return;
    generate_synthetic_dataset(30, 1, 32, work / "data" / "train", Split::kTrain);
    generate_synthetic_dataset(30, 2, 32, work / "data" / "test", Split::kTest);
    train = std::make_unique<Dataset>(load_manifest(work / "data" / "train"));
    test = std::make_unique<Dataset>(load_manifest(work / "data" / "test"));
    check_disjoint_splits(train->manifest(), test->manifest());
    desk = cli::profile_defaults(cli::Profile::kDesk);
    desk.network.n_identities = train->manifest().n_id;
  }

  // Run A owns its bundle so the hook can checkpoint mid-stage-2 and record
  // the report of the following step.
  void full_runs() {
    if (run_a) return;
    data();
    const std::int64_t mid = desk.stage2_iters / 2;
    auto a = std::make_shared<ModelBundle>(desk);
    TrainHooks hooks;
    hooks.on_step = [&](const StepEvent& e) {
      events_a.push_back(e);
      if (e.stage == 2 && e.iteration == mid) save_checkpoint(*a, work / "mid");
      if (e.stage == 2 && e.iteration == mid + 1) report_after_mid = e.report;
      if (e.iteration % 1000 == 0) {
        std::cerr << "  run A stage " << e.stage << " iteration " << e.iteration << " (" << num(seconds_since(start_), 3)
                  << " s)" << std::endl;
      }
    };
    start_ = Clock::now();
    resume_training(*a, *train, hooks);
    run_a_seconds = seconds_since(start_);
    run_a = a;
    save_checkpoint(*run_a, work / "run_a");
    std::cerr << "  run A done in " << num(run_a_seconds, 4) << " s; starting run B" << std::endl;
    run_b = run_variant(desk, *train);
    save_checkpoint(*run_b, work / "run_b");
  }

  const Evaluators& evaluator_set() {
    if (!evaluators) {
      data();
      evaluators = train_evaluators(*train, 7);
    }
    return *evaluators;
  }

  const EvalReport& evaluate(const std::string& name) {
    auto it = reports.find(name);
    if (it != reports.end()) return it->second;
    const auto& ev = evaluator_set();
    std::shared_ptr<ModelBundle> bundle;
    if (name == "full") {
      full_runs();
      bundle = run_a;
    } else {
      auto c = desk;
      c.variant = variant_from_string(name);
      const auto t = Clock::now();
      bundle = std::shared_ptr<ModelBundle>(run_variant(c, *train).release());
      std::cerr << "  " << name << " trained in " << num(seconds_since(t), 4) << " s" << std::endl;
    }
    auto r = evaluate_model(FrozenModel(bundle), *test, ev, name);
    std::ofstream(work / ("eval_" + name + ".txt")) << r.to_text();
    std::ofstream(work / ("eval_" + name + ".json")) << r.to_json().dump(2);
    return reports.emplace(name, std::move(r)).first->second;
  }

 private:
  Clock::time_point start_;
};

// ------------------------------------------------------------------ 4

void criterion_schedule(Pipeline& pl) {
  const auto t0 = Clock::now();
  Verdict v{4, "schedule conformance"};
  pl.data();

  // hash instrumentation on a shortened desk-profile run: every step
  auto c = pl.desk;
  c.stage1_iters = 12;
  c.stage2_iters = 30;
  ModelBundle b(c);
  auto prev = digests(b);
  int s1_violations = 0, cycle_violations = 0, lr_violations = 0, s1 = 0, s2 = 0;
  TrainHooks hooks;
  hooks.on_step = [&](const StepEvent& e) {
    const auto now = digests(b);
    const bool gn = now.g_n != prev.g_n, ge = now.g_e != prev.g_e, dn = now.d_n != prev.d_n, de = now.d_e != prev.d_e;
    if (e.stage == 1) {
      ++s1;
      if (ge || de || !gn || !dn) ++s1_violations;
    } else {
      ++s2;
      const bool generator_slot = (e.iteration - 1) % 5 < 4;
      const bool ok = generator_slot ? (gn && ge && !dn && !de) : (!gn && !ge && dn && de);
      if (!ok) ++cycle_violations;
      const double lr = optimizer_lr(*b.opt_g_n);
      if (lr != 0.25 * 2e-4 || e.lr_g_n != 0.25 * 2e-4 || optimizer_lr(*b.opt_g_e) != 2e-4) ++lr_violations;
    }
    prev = now;
  };
  resume_training(b, *pl.train, hooks);
  v.check(s1_violations == 0, "stage 1: " + std::to_string(s1) + " steps, " + std::to_string(s1_violations) +
                                  " touched G_E/D_E or missed G_N/D_N");
  v.check(cycle_violations == 0, "stage 2: " + std::to_string(s2) + " steps hashed, " + std::to_string(cycle_violations) +
                                     " off the 4:1 cycle");
  v.check(lr_violations == 0, "stage-2 G_N lr 5e-05 on " + std::to_string(s2 - lr_violations) + "/" + std::to_string(s2) + " steps");

  // the full desk run's event stream and step counters
  pl.full_runs();
  int bad_kind = 0, bad_lr = 0;
  std::int64_t n1 = 0, ng = 0, nd = 0;
  for (const auto& e : pl.events_a) {
    if (e.stage == 1) {
      ++n1;
      if (e.kind != StepKind::kStageOne || e.lr_g_n != 2e-4) ++bad_kind;
    } else {
      const bool generator_slot = (e.iteration - 1) % 5 < 4;
      (generator_slot ? ng : nd)++;
      if (e.kind != (generator_slot ? StepKind::kGenerator : StepKind::kDiscriminator)) ++bad_kind;
      if (e.lr_g_n != 0.25 * 2e-4 || e.lr_d_n != 0.25 * 2e-4) ++bad_lr;
    }
  }
  const auto expected = expected_step_counts(pl.desk);
  v.check(bad_kind == 0 && bad_lr == 0 && n1 == 2000 && ng == 3200 && nd == 800,
          "full run: " + std::to_string(n1) + " stage-1, " + std::to_string(ng) + " generator, " + std::to_string(nd) +
              " discriminator iterations");
  v.check(pl.run_a->steps == expected, "optimizer steps g_n " + std::to_string(pl.run_a->steps.g_n) + ", g_e " +
                                           std::to_string(pl.run_a->steps.g_e) + ", d_n " + std::to_string(pl.run_a->steps.d_n) +
                                           ", d_e " + std::to_string(pl.run_a->steps.d_e) + " match the closed form");
  report(v, seconds_since(t0));
}

// ------------------------------------------------------------------ 5

void criterion_determinism(Pipeline& pl) {
  const auto t0 = Clock::now();
  Verdict v{5, "determinism"};
  pl.full_runs();
  int same = 0;
  const std::vector<std::string> files{"g_n.bin", "g_e.bin", "d_n.bin", "d_e.bin", "sampler.state", "manifest.json"};
  for (const auto& f : files) {
    same += file_sha256((pl.work / "run_a" / f).string()) == file_sha256((pl.work / "run_b" / f).string());
  }
  v.check(same == static_cast<int>(files.size()),
          std::to_string(same) + "/" + std::to_string(files.size()) + " final checkpoint files bit-identical across two seed-1 runs");

  auto resumed = load_checkpoint(pl.work / "mid");
  const auto next = train_step(*resumed, *pl.train);
  const bool match = pl.report_after_mid && next.report == *pl.report_after_mid;
  v.check(match, "resume at stage 2 iteration " + std::to_string(resumed->iteration - 1) +
                     (match ? ": next LossReport identical" : ": next LossReport differs"));
  report(v, seconds_since(t0));
}

// ------------------------------------------------------------------ 6

void criterion_end_to_end(Pipeline& pl) {
  const auto t0 = Clock::now();
  Verdict v{6, "end-to-end desk training"};
  const auto& r = pl.evaluate("full");
  v.check(r.masked_l2_identity_rotation <= 0.15, "(a) identity-rotation masked L2 " + num(r.masked_l2_identity_rotation) + " (<= 0.15)");
  v.check(r.pose_bin_accuracy >= 0.8, "(b) requested pose recognised " + num(r.pose_bin_accuracy) + " (>= 0.8)");
  const double chance = 1.0 / r.n_test_identities;
  v.check(r.rank1_frontalized.overall > 5 * chance,
          "(c) frontalized rank-1 " + num(r.rank1_frontalized.overall) + " (> " + num(5 * chance) + ")");
  for (double bin : {-90.0, -75.0, 75.0, 90.0}) {
    const double f = r.rank1_frontalized.rate_per_bin.at(bin), raw = r.rank1_raw.rate_per_bin.at(bin);
    v.check(f > raw, "(c) " + format_degrees(bin) + " frontalized " + num(f, 3) + " vs raw " + num(raw, 3));
  }
  v.check(pl.run_a_seconds < 45 * 60, "training " + num(pl.run_a_seconds / 60, 3) + " min (< 45)");
  report(v, seconds_since(t0));
}

// ------------------------------------------------------------------ 7

void criterion_ablation(Pipeline& pl) {
  const auto t0 = Clock::now();
  Verdict v{7, "ablation trend at matched budgets"};
  std::map<std::string, EvalReport> reports;
  for (const char* name : {"full", "single_stage", "no_regularizers"}) reports.emplace(name, pl.evaluate(name));
  const auto table = ablation_compare(reports);
  std::ofstream(pl.work / "ablation.txt") << table.to_text();
  std::map<std::string, double> mean;
  for (const auto& row : table.rows) mean[row.variant] = row.mean_rank1;
  for (const char* name : {"single_stage", "no_regularizers"}) {
    v.check(table.full_at_least_mean.at(name),
            std::string("full ") + num(mean.at("full"), 3) + " vs " + name + " " + num(mean.at(name), 3));
    auto it = table.violations.find(name);
    if (it != table.violations.end() && !it->second.empty()) {
      std::string bins;
      for (double b : it->second) bins += " " + format_degrees(b);
      v.details.push_back(std::string(name) + " ahead at" + bins);
    }
  }
  report(v, seconds_since(t0));
}

// ------------------------------------------------------------------ 8

void criterion_pose_error(Pipeline& pl) {
  const auto t0 = Clock::now();
  Verdict v{8, "pose-error protocol"};
  const auto& table = pl.evaluate("full").pose;
  for (const auto& [bin, synth] : table.synthesized) {
    auto g = table.genuine.find(bin);
    if (g == table.genuine.end()) continue;
    v.check(synth <= 2 * g->second, format_degrees(bin) + " synthesized " + num(synth, 3) + " vs genuine " + num(g->second, 3));
  }
  std::string interp;
  for (const auto& [bin, e] : table.interpolated) interp += " " + format_degrees(bin) + "=" + num(e, 3);
  v.check(table.interpolated.size() == 4, "interpolated reported separately:" + interp);
  report(v, seconds_since(t0));
}

// ------------------------------------------------------------------ 9

void criterion_inference(Pipeline& pl) {
  const auto t0 = Clock::now();
  Verdict v{9, "inference contracts"};
  std::shared_ptr<ModelBundle> bundle;
  if (pl.run_a) {
    bundle = pl.run_a;
  } else {
    pl.data();
    auto c = pl.desk;
    c.stage1_iters = 5;
    c.stage2_iters = 10;
    bundle = std::shared_ptr<ModelBundle>(run_variant(c, *pl.train).release());
  }
  FrozenModel model(bundle);
  auto& b = *bundle;
  torch::NoGradGuard no_grad;
  const auto x = pl.test->images()[17];
  int equal = 0;
  for (int i = 0; i < kNumPoses; ++i) {
    const auto direct = editor_forward(b.g_e, x, normalizer_forward(b.g_n, x), make_remote_code(i));
    equal += torch::equal(rotate(model, {x, static_cast<double>(index_to_pose(i).degrees)}), direct);
  }
  v.check(equal == kNumPoses, std::to_string(equal) + "/13 on-grid rotations equal editor_forward");

  std::array<double, kNumPoses> expected{};
  expected[6] = 0.5;
  expected[7] = 0.5;
  const auto code = code_for_degrees(7.5);
  const bool code_ok = code.weights() == expected;
  const bool blended = torch::equal(rotate(model, {x, 7.5}), editor_forward(b.g_e, x, normalizer_forward(b.g_n, x), code));
  v.check(code_ok && blended, "7.5 deg code is 0.5@6 + 0.5@7 and drives the editor");

  const auto x2 = pl.test->images()[17 + 13 * 4];
  const auto front = make_remote_code(kFrontalIndex).to_tensor().unsqueeze(0);
  auto decode = [&](const torch::Tensor& img) {
    return b.g_e->decode(extract_identity_representation(b.g_e, img, normalizer_forward(b.g_n, img)).unsqueeze(0), front)[0];
  };
  const auto tiles = identity_morph_tiles(model, x, x2, 6);
  const double d0 = (tiles.front() - decode(x)).abs().max().item<double>();
  const double d1 = (tiles.back() - decode(x2)).abs().max().item<double>();
  v.check(d0 <= 1e-6 && d1 <= 1e-6, "morph endpoints decode the unmixed representations (max diff " + num(std::max(d0, d1), 2) + ")");
  report(v, seconds_since(t0));
}

}  // namespace

int main(int argc, char** argv) {
  torch::set_num_threads(1);
  CLI::App app{"acceptance checks"};
  std::string work = (fs::temp_directory_path() / "lbgan_acceptance").string();
  std::string only;
  app.add_option("--work", work, "scratch directory");
  app.add_option("--only", only, "comma-separated criterion numbers");
  CLI11_PARSE(app, argc, argv);

  std::set<int> selected;
  std::stringstream ss(only);
  for (std::string s; std::getline(ss, s, ',');) selected.insert(std::stoi(s));
  auto want = [&](int id) { return selected.empty() || selected.count(id); };

  Pipeline pl;
  pl.work = work;
  fs::remove_all(pl.work);
  fs::create_directories(pl.work);

  // 9 comes last so it can reuse the trained desk model
  const std::vector<std::pair<int, std::function<void()>>> criteria{
      {1, criterion_gradients},
      {2, criterion_mask},
      {3, criterion_values},
      {4, [&] { criterion_schedule(pl); }},
      {5, [&] { criterion_determinism(pl); }},
      {6, [&] { criterion_end_to_end(pl); }},
      {7, [&] { criterion_ablation(pl); }},
      {8, [&] { criterion_pose_error(pl); }},
      {9, [&] { criterion_inference(pl); }},
  };
  for (const auto& [id, run] : criteria) {
    if (!want(id)) continue;
    try {
      run();
    } catch (const std::exception& e) {
      Verdict v{id, "criterion " + std::to_string(id)};
      v.check(false, std::string("exception: ") + e.what());
      report(v, 0);
    }
  }

  int failed = 0;
  for (const auto& v : verdicts) failed += !v.pass;
  std::cout << (verdicts.size() - failed) << "/" << verdicts.size() << " criteria passed" << std::endl;
  return failed == 0 ? 0 : 1;
}
