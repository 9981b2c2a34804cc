#include "lbgan/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "lbgan/errors.hpp"
#include "lbgan/losses.hpp"

namespace lbgan {

namespace {

constexpr std::int64_t kChunk = 256;

NetworkConfig trunk_config(int image_size, const ProbeTrainOptions& o, std::uint64_t seed) {
  NetworkConfig c;
  c.image_size = image_size;
  c.base_channels = o.base_channels;
  c.n_blocks = o.n_blocks;
  c.bottleneck_dim = o.embedding_dim;
  c.n_identities = 1;
  c.init_seed = seed;
  return c;
}

// Runs `fn` over [N, ...] in chunks without autograd and concatenates the results.
template <typename Fn>
torch::Tensor chunked(const torch::Tensor& x, Fn fn) {
  torch::NoGradGuard no_grad;
  std::vector<torch::Tensor> parts;
  for (std::int64_t i = 0; i < x.size(0); i += kChunk) parts.push_back(fn(x.slice(0, i, std::min(i + kChunk, x.size(0)))));
  if (parts.empty()) return torch::empty({0});
  return torch::cat(parts, 0);
}

struct Selection {
  torch::Tensor images;
  std::vector<std::size_t> records;
};

Selection select_records(const Dataset& data, double max_abs_yaw) {
  Selection s;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (std::abs(data.manifest().records[i].pose.degrees) <= max_abs_yaw + 1e-9) s.records.push_back(i);
  }
  if (s.records.empty()) throw InvalidInput("no training images within the requested yaw range");
  s.images = data.gather(s.records).images;
  return s;
}

enum class Objective { kClassify, kRegress };

ClassifierSummary fit_probe(ProbeNet& net, const torch::Tensor& images, const torch::Tensor& targets, Objective objective,
                            const ProbeTrainOptions& o) {
  torch::optim::Adam opt(net->parameters(), torch::optim::AdamOptions(o.lr).betas({0.9, 0.999}));
  Rng rng(o.seed);
  std::uniform_int_distribution<std::int64_t> pick(0, images.size(0) - 1);
  ClassifierSummary summary;
  auto accuracy = [&] {
    net->eval();
    auto pred = chunked(images, [&](const torch::Tensor& x) { return net->forward(x).argmax(1); });
    net->train();
    return pred.eq(targets).to(torch::kDouble).mean().item<double>();
  };
  for (int it = 1; it <= o.max_iters; ++it) {
    std::vector<std::int64_t> idx(std::min<std::int64_t>(o.batch_size, images.size(0)));
    for (auto& v : idx) v = pick(rng);
    auto index = torch::tensor(idx, torch::kLong);
    auto out = net->forward(images.index_select(0, index));
    auto t = targets.index_select(0, index);
    auto loss = objective == Objective::kClassify ? torch::nn::functional::cross_entropy(out, t)
                                                  : torch::mse_loss(out.squeeze(1), t);
    opt.zero_grad();
    loss.backward();
    opt.step();
    summary.iterations = it;
    if (objective == Objective::kClassify && (it % o.check_every == 0 || it == o.max_iters)) {
      summary.train_accuracy = accuracy();
      if (it >= o.min_iters && summary.train_accuracy >= o.target_accuracy) {
        summary.converged = true;
        break;
      }
    }
  }
  net->eval();
  return summary;
}

std::string fmt(double v, int precision = 3) {
  std::ostringstream ss;
  ss << std::fixed << std::setprecision(precision) << v;
  return ss.str();
}

nlohmann::json bins_json(const std::map<double, double>& m) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [bin, v] : m) j[format_degrees(bin)] = v;
  return j;
}

nlohmann::json identification_json(const IdentificationResult& r) {
  nlohmann::json counts = nlohmann::json::object();
  for (const auto& [bin, n] : r.count_per_bin) counts[format_degrees(bin)] = n;
  return {{"overall", r.overall}, {"per_bin", bins_json(r.rate_per_bin)}, {"count_per_bin", counts}};
}

void table_row(std::ostringstream& out, const std::string& label, const std::vector<double>& bins,
               const std::map<double, double>& values, int precision) {
  out << std::left << std::setw(17) << label << std::right;
  for (double b : bins) {
    auto it = values.find(b);
    out << std::setw(9) << (it == values.end() ? std::string("-") : fmt(it->second, precision));
  }
  out << '\n';
}

void table_header(std::ostringstream& out, const std::vector<double>& bins) {
  out << std::left << std::setw(17) << "bin" << std::right;
  for (double b : bins) out << std::setw(9) << format_degrees(b);
  out << '\n';
}

std::vector<double> keys(const std::map<double, double>& a, const std::map<double, double>& b = {},
                         const std::map<double, double>& c = {}) {
  std::set<double> s;
  for (const auto* m : {&a, &b, &c}) {
    for (const auto& [k, _] : *m) s.insert(k);
  }
  return {s.begin(), s.end()};
}

}  // namespace

ProbeNetImpl::ProbeNetImpl(const NetworkConfig& trunk, int embedding_dim, int outputs) {
  trunk_ = register_module("trunk", Encoder(trunk, kImageChannels, embedding_dim));
  head_ = register_module("head", torch::nn::Linear(embedding_dim, outputs));
}

torch::Tensor ProbeNetImpl::embed(const torch::Tensor& x) { return torch::leaky_relu(trunk_->forward(x), 0.2); }

torch::Tensor ProbeNetImpl::forward(const torch::Tensor& x) { return head_->forward(embed(x)); }

nlohmann::json ClassifierSummary::to_json() const {
  return {{"train_accuracy", train_accuracy}, {"iterations", iterations}, {"converged", converged}, {"warning", warning}};
}

torch::Tensor EmbedderModel::embed(const torch::Tensor& images) const {
  auto n = net;
  return chunked(images, [&](const torch::Tensor& x) { return n->embed(x); });
}

torch::Tensor PoseClassifierModel::predict_index(const torch::Tensor& images) const {
  auto n = net;
  return chunked(images, [&](const torch::Tensor& x) { return n->forward(x).argmax(1); });
}

torch::Tensor PoseEstimatorModel::predict_degrees(const torch::Tensor& images) const {
  auto n = net;
  return chunked(images, [&](const torch::Tensor& x) { return n->forward(x).squeeze(1) * 90.0; });
}

ProbeTrainOptions default_embedder_options() {
  ProbeTrainOptions o;
  o.max_abs_yaw = 30.0;
  return o;
}

EmbedderModel train_embedder(const Dataset& train, ProbeTrainOptions o) {
  const int n_id = train.manifest().n_id;
  if (n_id < 2) throw InvalidInput("the embedder needs at least two identities");
  auto sel = select_records(train, o.max_abs_yaw);
  auto labels = train.gather(sel.records).identities;

  EmbedderModel m;
  m.image_size = train.image_size();
  m.embedding_dim = o.embedding_dim;
  const auto cfg = trunk_config(m.image_size, o, o.seed);
  m.net = ProbeNet(cfg, o.embedding_dim, n_id);
  initialize_weights(*m.net, cfg.init_std, o.seed);
  m.summary = fit_probe(m.net, sel.images, labels, Objective::kClassify, o);
  if (m.summary.train_accuracy < 0.95) {
    m.summary.warning = "embedder train accuracy " + fmt(m.summary.train_accuracy) + " below 0.95 after " +
                        std::to_string(m.summary.iterations) + " iterations";
  }
  std::set<std::uint64_t> seeds;
  for (const auto& r : train.manifest().records) {
    if (r.identity_seed != 0) seeds.insert(r.identity_seed);
  }
  m.training_identity_seeds.assign(seeds.begin(), seeds.end());
  return m;
}

PoseClassifierModel train_pose_classifier(const Dataset& train, ProbeTrainOptions o) {
  auto sel = select_records(train, o.max_abs_yaw);
  auto labels = train.gather(sel.records).pose_indices;
  PoseClassifierModel m;
  m.image_size = train.image_size();
  const auto cfg = trunk_config(m.image_size, o, o.seed + 1);
  m.net = ProbeNet(cfg, o.embedding_dim, kNumPoses);
  initialize_weights(*m.net, cfg.init_std, o.seed + 1);
  o.target_accuracy = 1.0;
  m.summary = fit_probe(m.net, sel.images, labels, Objective::kClassify, o);
  return m;
}

PoseEstimatorModel train_pose_estimator(const Dataset& train, double range_degrees, ProbeTrainOptions o) {
  if (!(range_degrees > 0.0 && range_degrees <= 90.0)) throw InvalidParameter("estimator range must lie in (0, 90]");
  auto sel = select_records(train, range_degrees);
  std::vector<float> degrees;
  for (auto r : sel.records) degrees.push_back(static_cast<float>(train.manifest().records[r].pose.degrees / 90.0));
  PoseEstimatorModel m;
  m.image_size = train.image_size();
  m.range_degrees = range_degrees;
  const auto cfg = trunk_config(m.image_size, o, o.seed + 2);
  m.net = ProbeNet(cfg, o.embedding_dim, 1);
  initialize_weights(*m.net, cfg.init_std, o.seed + 2);
  auto target = torch::tensor(degrees);
  m.iterations = fit_probe(m.net, sel.images, target, Objective::kRegress, o).iterations;
  m.train_mae = (m.predict_degrees(sel.images) - target * 90.0).abs().mean().item<double>();
  return m;
}

IdentificationResult rank1_from_embeddings(const torch::Tensor& gallery, const std::vector<int>& gallery_ids,
                                           const torch::Tensor& probes, const std::vector<int>& probe_ids,
                                           const std::vector<double>& probe_bins) {
  if (gallery.dim() != 2 || probes.dim() != 2 || gallery.size(1) != probes.size(1)) {
    throw InvalidInput("embeddings must be [N, D] with a shared D");
  }
  if (static_cast<std::size_t>(gallery.size(0)) != gallery_ids.size() ||
      static_cast<std::size_t>(probes.size(0)) != probe_ids.size() || probe_ids.size() != probe_bins.size()) {
    throw InvalidInput("embedding and label counts differ");
  }
  const std::set<int> enrolled(gallery_ids.begin(), gallery_ids.end());
  for (int id : probe_ids) {
    if (!enrolled.count(id)) throw ProtocolError("probe identity " + std::to_string(id) + " has no gallery image");
  }
  IdentificationResult r;
  if (probe_ids.empty()) return r;
  auto g = torch::nn::functional::normalize(gallery.to(torch::kDouble), torch::nn::functional::NormalizeFuncOptions().dim(1));
  auto p = torch::nn::functional::normalize(probes.to(torch::kDouble), torch::nn::functional::NormalizeFuncOptions().dim(1));
  auto sim = p.matmul(g.t());
  auto [best, arg] = sim.max(1);
  std::map<double, int> correct;
  int total_correct = 0;
  for (std::size_t i = 0; i < probe_ids.size(); ++i) {
    ProbeMatch m;
    m.probe = i;
    m.true_identity = probe_ids[i];
    m.predicted_identity = gallery_ids[arg[i].item<std::int64_t>()];
    m.similarity = best[i].item<double>();
    m.bin = probe_bins[i];
    const bool hit = m.predicted_identity == m.true_identity;
    correct[m.bin] += hit;
    total_correct += hit;
    ++r.count_per_bin[m.bin];
    r.matches.push_back(m);
  }
  for (const auto& [bin, n] : r.count_per_bin) r.rate_per_bin[bin] = static_cast<double>(correct[bin]) / n;
  r.overall = static_cast<double>(total_correct) / probe_ids.size();
  return r;
}

IdentificationResult rank1_identification(const EmbedderModel& embedder, const torch::Tensor& gallery_images,
                                          const std::vector<int>& gallery_ids, const torch::Tensor& probe_images,
                                          const std::vector<int>& probe_ids, const std::vector<double>& probe_bins) {
  return rank1_from_embeddings(embedder.embed(gallery_images), gallery_ids, embedder.embed(probe_images), probe_ids,
                               probe_bins);
}

std::map<double, double> pose_errors_by_bin(const std::vector<double>& predicted, const std::vector<double>& target,
                                            double range_degrees) {
  if (predicted.size() != target.size()) throw InvalidInput("prediction and target counts differ");
  std::map<double, double> sum;
  std::map<double, int> count;
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (std::abs(target[i]) > range_degrees + 1e-9) continue;
    sum[target[i]] += std::abs(predicted[i] - target[i]);
    ++count[target[i]];
  }
  for (auto& [bin, s] : sum) s /= count[bin];
  return sum;
}

PoseErrorTable pose_error_table(const PoseEstimatorModel& estimator, const torch::Tensor& real_images,
                                const std::vector<double>& real_degrees, const torch::Tensor& synthesized_images,
                                const std::vector<double>& synthesized_degrees) {
  auto to_vec = [](const torch::Tensor& t) {
    auto c = t.to(torch::kDouble).contiguous();
    return std::vector<double>(c.data_ptr<double>(), c.data_ptr<double>() + c.numel());
  };
  PoseErrorTable table;
  const double range = estimator.range_degrees;
  table.genuine = pose_errors_by_bin(to_vec(estimator.predict_degrees(real_images)), real_degrees, range);
  const auto synth = pose_errors_by_bin(to_vec(estimator.predict_degrees(synthesized_images)), synthesized_degrees, range);
  for (const auto& [bin, err] : synth) {
    (is_grid_pose(bin) ? table.synthesized : table.interpolated)[bin] = err;
  }
  for (int deg : pose_grid()) {
    if (std::abs(deg) > range) continue;
    if (!table.genuine.count(deg)) table.notices.push_back("no genuine images at " + format_degrees(deg) + "; bin omitted");
    if (!table.synthesized.count(deg)) {
      table.notices.push_back("no synthesized images at " + format_degrees(deg) + "; bin omitted");
    }
  }
  return table;
}

Evaluators train_evaluators(const Dataset& train, std::uint64_t seed) {
  auto embed_opts = default_embedder_options();
  embed_opts.seed = seed;
  ProbeTrainOptions pose_opts;
  pose_opts.seed = seed + 10;
  pose_opts.max_iters = 2000;
  ProbeTrainOptions reg_opts;
  reg_opts.seed = seed + 20;
  reg_opts.max_iters = 2000;
  return {train_embedder(train, embed_opts), train_pose_classifier(train, pose_opts),
          train_pose_estimator(train, 30.0, reg_opts)};
}

void check_disjoint_splits(const DatasetManifest& train, const DatasetManifest& test) {
  std::set<std::uint64_t> seen;
  for (const auto& r : train.records) {
    if (r.identity_seed != 0) seen.insert(r.identity_seed);
  }
  for (const auto& r : test.records) {
    if (r.identity_seed != 0 && seen.count(r.identity_seed)) {
      throw ProtocolError("test identity " + std::to_string(r.identity.id) + " also appears in the training split");
    }
  }
}

double identity_rotation_masked_l2(const FrozenModel& model, const Dataset& test) {
  const auto& images = test.images();
  std::vector<std::size_t> all(test.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  auto batch = test.gather(all);
  double total = 0.0;
  for (std::int64_t i = 0; i < images.size(0); i += kChunk) {
    const auto end = std::min(i + kChunk, images.size(0));
    auto x = batch.images.slice(0, i, end);
    auto masks = batch.masks.slice(0, i, end);
    auto x_hat = rotate_batch(model, x, one_hot_codes(batch.pose_indices.slice(0, i, end)));
    auto l2 = attention_l2_per_sample(x, x_hat, masks);
    auto count = masks.sum({1, 2, 3}) * kImageChannels;
    total += (l2 / count.sqrt()).sum().item<double>();
  }
  return images.size(0) == 0 ? 0.0 : total / images.size(0);
}

EvalReport evaluate_model(const FrozenModel& model, const Dataset& test, const Evaluators& ev, const std::string& variant) {
  if (model.image_size() != test.image_size() || ev.embedder.image_size != test.image_size()) {
    throw ConfigError("model, evaluators and test split disagree on image size");
  }
  for (const auto& r : test.manifest().records) {
    if (std::binary_search(ev.embedder.training_identity_seeds.begin(), ev.embedder.training_identity_seeds.end(),
                           r.identity_seed) &&
        r.identity_seed != 0) {
      throw ProtocolError("evaluation identity " + std::to_string(r.identity.id) + " was seen by the embedder");
    }
  }
  EvalReport report;
  report.variant = variant;
  report.n_test_identities = test.manifest().n_id;
  report.chance = 1.0 / std::max(1, report.n_test_identities);

  const auto gallery_records = test.records_at_pose(kFrontalIndex);
  auto gallery = test.gather(gallery_records);
  std::vector<int> gallery_ids;
  for (auto r : gallery_records) gallery_ids.push_back(test.manifest().records[r].identity.id);

  std::vector<std::size_t> all(test.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  auto probes = test.gather(all);
  std::vector<int> probe_ids;
  std::vector<double> probe_bins;
  for (const auto& r : test.manifest().records) {
    probe_ids.push_back(r.identity.id);
    probe_bins.push_back(r.pose.degrees);
  }
  const auto n = probes.size();
  auto frontal_codes = one_hot_codes(torch::full({n}, kFrontalIndex, torch::kLong));
  auto rotated_frontal = chunked(probes.images, [&](const torch::Tensor& x) {
    return rotate_batch(model, x, frontal_codes.slice(0, 0, x.size(0)));
  });
  auto normalized = chunked(probes.images, [&](const torch::Tensor& x) { return frontalize(model, x); });

  const auto gallery_emb = ev.embedder.embed(gallery.images);
  report.rank1_raw = rank1_from_embeddings(gallery_emb, gallery_ids, ev.embedder.embed(probes.images), probe_ids, probe_bins);
  report.rank1_frontalized =
      rank1_from_embeddings(gallery_emb, gallery_ids, ev.embedder.embed(rotated_frontal), probe_ids, probe_bins);
  report.rank1_normalizer =
      rank1_from_embeddings(gallery_emb, gallery_ids, ev.embedder.embed(normalized), probe_ids, probe_bins);

  report.masked_l2_identity_rotation = identity_rotation_masked_l2(model, test);

  std::int64_t hits = 0, total = 0;
  for (int target = 0; target < kNumPoses; ++target) {
    auto codes = one_hot_codes(torch::full({n}, target, torch::kLong));
    auto generated = chunked(probes.images, [&](const torch::Tensor& x) {
      return rotate_batch(model, x, codes.slice(0, 0, x.size(0)));
    });
    hits += ev.pose_classifier.predict_index(generated).eq(target).sum().item<std::int64_t>();
    total += n;
  }
  report.pose_bin_accuracy = total == 0 ? 0.0 : static_cast<double>(hits) / total;

  const double range = ev.pose_estimator.range_degrees;
  std::vector<std::size_t> real_in_range;
  std::vector<double> real_degrees;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const double d = test.manifest().records[i].pose.degrees;
    if (std::abs(d) <= range) {
      real_in_range.push_back(i);
      real_degrees.push_back(d);
    }
  }
  std::vector<torch::Tensor> synth_parts;
  std::vector<double> synth_degrees;
  for (double target = -range; target <= range + 1e-9; target += kPoseStepDegrees / 2.0) {
    const auto code = code_for_degrees(target).to_tensor().unsqueeze(0).expand({n, kNumPoses});
    synth_parts.push_back(chunked(probes.images, [&](const torch::Tensor& x) {
      return rotate_batch(model, x, code.slice(0, 0, x.size(0)));
    }));
    synth_degrees.insert(synth_degrees.end(), n, target);
  }
  report.pose = pose_error_table(ev.pose_estimator, test.gather(real_in_range).images, real_degrees,
                                 torch::cat(synth_parts, 0), synth_degrees);

  report.evaluators = {{"embedder",
                        {{"embedding_dim", ev.embedder.embedding_dim},
                         {"similarity", "cosine"},
                         {"training", ev.embedder.summary.to_json()}}},
                       {"pose_classifier", ev.pose_classifier.summary.to_json()},
                       {"pose_estimator",
                        {{"range_degrees", range},
                         {"train_mae_degrees", ev.pose_estimator.train_mae},
                         {"iterations", ev.pose_estimator.iterations}}}};
  if (!ev.embedder.summary.warning.empty()) report.flags.push_back(ev.embedder.summary.warning);
  if (report.rank1_frontalized.overall <= 5.0 * report.chance) {
    report.flags.push_back("frontalized rank-1 " + fmt(report.rank1_frontalized.overall) + " is not above 5x chance");
  }
  for (const auto& note : report.pose.notices) report.flags.push_back(note);
  return report;
}

nlohmann::json EvalReport::to_json() const {
  return {{"variant", variant},
          {"n_test_identities", n_test_identities},
          {"chance", chance},
          {"rank1",
           {{"frontalized", identification_json(rank1_frontalized)},
            {"normalizer_only", identification_json(rank1_normalizer)},
            {"raw", identification_json(rank1_raw)}}},
          {"masked_l2_identity_rotation", masked_l2_identity_rotation},
          {"pose_bin_accuracy", pose_bin_accuracy},
          {"pose_error_degrees",
           {{"genuine", bins_json(pose.genuine)},
            {"synthesized", bins_json(pose.synthesized)},
            {"interpolated", bins_json(pose.interpolated)},
            {"notices", pose.notices}}},
          {"evaluators", evaluators},
          {"flags", flags}};
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  out << "variant " << variant << ", " << n_test_identities << " test identities, chance " << fmt(chance) << "\n\n";
  out << "rank-1 identification\n";
  const auto bins = keys(rank1_raw.rate_per_bin, rank1_frontalized.rate_per_bin);
  table_header(out, bins);
  table_row(out, "raw", bins, rank1_raw.rate_per_bin, 3);
  table_row(out, "G_N only", bins, rank1_normalizer.rate_per_bin, 3);
  table_row(out, "frontalized", bins, rank1_frontalized.rate_per_bin, 3);
  out << "overall raw " << fmt(rank1_raw.overall) << ", G_N only " << fmt(rank1_normalizer.overall) << ", frontalized "
      << fmt(rank1_frontalized.overall) << "\n\n";
  out << "pose error (degrees)\n";
  const auto pose_bins = keys(pose.genuine, pose.synthesized, pose.interpolated);
  table_header(out, pose_bins);
  table_row(out, "genuine", pose_bins, pose.genuine, 2);
  table_row(out, "synthesized", pose_bins, pose.synthesized, 2);
  table_row(out, "interpolated", pose_bins, pose.interpolated, 2);
  out << "\nmasked L2, identity rotation: " << fmt(masked_l2_identity_rotation, 4) << "\n";
  out << "requested pose bin recognised: " << fmt(pose_bin_accuracy) << "\n";
  for (const auto& f : flags) out << "flag: " << f << "\n";
  return out.str();
}

std::string EvalReport::matches_csv() const {
  std::ostringstream out;
  out << "probe_kind,probe,bin,true_identity,predicted_identity,similarity\n";
  auto dump = [&](const std::string& kind, const IdentificationResult& r) {
    for (const auto& m : r.matches) {
      out << kind << ',' << m.probe << ',' << m.bin << ',' << m.true_identity << ',' << m.predicted_identity << ','
          << std::setprecision(6) << m.similarity << '\n';
    }
  };
  dump("raw", rank1_raw);
  dump("normalizer_only", rank1_normalizer);
  dump("frontalized", rank1_frontalized);
  return out.str();
}

AblationTable ablation_compare(const std::map<std::string, EvalReport>& reports) {
  auto full_it = reports.find("full");
  if (full_it == reports.end()) throw InvalidInput("ablation comparison needs a 'full' report");
  const auto& full = full_it->second.rank1_frontalized.rate_per_bin;
  auto mean = [](const std::map<double, double>& m) {
    double s = 0.0;
    for (const auto& [_, v] : m) s += v;
    return m.empty() ? 0.0 : s / m.size();
  };
  AblationTable t;
  auto add_row = [&](const std::string& name, const EvalReport& r) {
    AblationRow row;
    row.variant = name;
    row.rank1 = r.rank1_frontalized.rate_per_bin;
    row.mean_rank1 = mean(row.rank1);
    for (const auto& [bin, v] : row.rank1) {
      auto f = full.find(bin);
      if (f == full.end()) continue;
      row.delta_vs_full[bin] = f->second - v;
      if (name != "full" && v > f->second) t.violations[name].push_back(bin);
    }
    t.rows.push_back(row);
  };
  add_row("full", full_it->second);
  for (const auto& [name, r] : reports) {
    if (name != "full") add_row(name, r);
  }
  for (std::size_t i = 1; i < t.rows.size(); ++i) {
    t.full_at_least_mean[t.rows[i].variant] = t.rows[0].mean_rank1 >= t.rows[i].mean_rank1;
  }
  return t;
}

nlohmann::json AblationTable::to_json() const {
  nlohmann::json rows_json = nlohmann::json::array();
  for (const auto& r : rows) {
    rows_json.push_back({{"variant", r.variant},
                         {"rank1", bins_json(r.rank1)},
                         {"mean_rank1", r.mean_rank1},
                         {"delta_vs_full", bins_json(r.delta_vs_full)}});
  }
  nlohmann::json v = nlohmann::json::object();
  for (const auto& [name, bins] : violations) {
    std::vector<std::string> labels;
    for (double b : bins) labels.push_back(format_degrees(b));
    v[name] = labels;
  }
  return {{"rows", rows_json}, {"full_at_least_mean", full_at_least_mean}, {"bin_violations", v}};
}

std::string AblationTable::to_text() const {
  std::ostringstream out;
  if (rows.empty()) return "";
  const auto bins = keys(rows.front().rank1);
  out << "frontalized rank-1 by variant\n";
  table_header(out, bins);
  for (const auto& r : rows) table_row(out, r.variant, bins, r.rank1, 3);
  for (const auto& r : rows) out << "mean " << r.variant << ": " << fmt(r.mean_rank1) << "\n";
  for (const auto& [name, ok] : full_at_least_mean) {
    out << "full >= " << name << " on average: " << (ok ? "yes" : "no") << "\n";
  }
  for (const auto& [name, b] : violations) {
    out << name << " beats full at:";
    for (double d : b) out << ' ' << format_degrees(d);
    out << "\n";
  }
  return out.str();
}

}  // namespace lbgan
