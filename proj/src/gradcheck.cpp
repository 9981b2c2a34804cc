#include <algorithm>
#include <cmath>
#include <random>

#include "lbgan/errors.hpp"
#include "lbgan/losses.hpp"

namespace lbgan {

namespace {

double evaluate(const std::function<torch::Tensor()>& loss_fn) {
  const double v = loss_fn().item<double>();
  if (!std::isfinite(v)) throw InvalidInput("loss is not finite");
  return v;
}

}  // namespace

FiniteDifferenceResult finite_difference_check(const std::function<torch::Tensor()>& loss_fn,
                                               std::vector<torch::Tensor> params,
                                               const FiniteDifferenceOptions& options) {
  if (params.empty()) throw InvalidInput("no parameters to check");
  if (!(options.epsilon > 0.0)) throw InvalidParameter("finite-difference step must be positive");

  for (auto& p : params) {
    if (!p.requires_grad()) throw InvalidInput("parameters must require gradients");
    if (p.grad().defined()) p.mutable_grad().zero_();
  }
  auto loss = loss_fn();
  if (!std::isfinite(loss.item<double>())) throw InvalidInput("loss is not finite");
  loss.backward();

  std::vector<std::int64_t> sizes;
  std::int64_t total = 0;
  for (const auto& p : params) {
    sizes.push_back(p.numel());
    total += p.numel();
  }

  std::mt19937_64 rng(options.seed);
  std::uniform_int_distribution<std::int64_t> pick(0, total - 1);
  FiniteDifferenceResult result;
  torch::NoGradGuard no_grad;
  for (int k = 0; k < options.coordinates; ++k) {
    std::int64_t flat = pick(rng);
    std::size_t which = 0;
    while (flat >= sizes[which]) flat -= sizes[which++];
    auto entry = params[which].view({-1})[flat];
    const auto grad = params[which].grad();
    const double analytic = grad.defined() ? grad.view({-1})[flat].item<double>() : 0.0;

    const double original = entry.item<double>();
    entry.fill_(original + options.epsilon);
    const double plus = evaluate(loss_fn);
    entry.fill_(original - options.epsilon);
    const double minus = evaluate(loss_fn);
    entry.fill_(original);

    const double numeric = (plus - minus) / (2.0 * options.epsilon);
    const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
    result.max_relative_error = std::max(result.max_relative_error, std::abs(analytic - numeric) / scale);
    ++result.coordinates_checked;
  }
  return result;
}

}  // namespace lbgan
