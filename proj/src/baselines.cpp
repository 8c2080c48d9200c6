#include "lovme/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <utility>

#include "lovme/errors.hpp"
#include "lovme/rng.hpp"
#include "lovme/util.hpp"

namespace lovme {

McDropoutResult mc_dropout(const Network& net, const Sample& sample, double p,
                           std::size_t m, std::uint64_t seed,
                           const LossOracle& oracle, std::size_t sample_index) {
  validate(net);
  if (m < 2) throw ParamError("mc_dropout needs at least 2 passes");
  if (!(p > 0.0) || p > 1.0)
    throw ParamError("dropout keep probability must be in (0, 1]");

  const std::size_t n0 = count_maskable_units(net);
  const std::size_t label =
      oracle.resolve(net, sample, sample_index, net.class_count);
  Rng rng(seed);
  ForwardTrace tr;

  McDropoutResult result;
  result.trace.losses.reserve(m);
  result.trace.sizes.reserve(m);
  result.trace.steps.reserve(m);
  result.trace.accepted.reserve(m);
  DropoutMask mask;
  for (std::size_t i = 0; i < m; ++i) {
    mask = sample_mask_bernoulli(n0, p, rng);
    const double l = loss(net, mask, sample.features, label, tr);
    result.trace.losses.push_back(l);
    result.trace.sizes.push_back(mask.popcount());
    result.trace.steps.push_back(i + 1);
    result.trace.accepted.push_back(1);  // every pass counts, equal weight
  }
  result.trace.propose_count = m;
  result.trace.accept_count = m;
  result.report = estimate(result.trace, net, sample, sample_index);
  return result;
}

std::vector<UncertaintyReport> mc_dropout_all(const Network& net,
                                              const Dataset& data, double p,
                                              std::size_t m,
                                              std::uint64_t seed,
                                              const LossOracle& oracle,
                                              int workers) {
  if (workers < 1) throw ParamError("workers must be positive");
  const std::ptrdiff_t n = std::ptrdiff_t(data.size());
  std::vector<UncertaintyReport> reports(data.size());
  std::vector<std::string> errors(data.size());
  bool failed = false;

#pragma omp parallel for num_threads(workers) schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      const std::uint64_t local = derive_seed(seed, std::uint64_t(i));
      reports[std::size_t(i)] =
          mc_dropout(net, data.samples[std::size_t(i)], p, m, local, oracle,
                     std::size_t(i))
              .report;
    } catch (const Error& e) {
      errors[std::size_t(i)] = e.what();
#pragma omp atomic write
      failed = true;
    }
  }

  if (failed) {
    for (std::size_t i = 0; i < errors.size(); ++i) {
      if (!errors[i].empty()) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "sample %zu: ", i);
        throw ChainError(buf + errors[i], 0);
      }
    }
  }
  return reports;
}

void validate(const GroundTruthReport& report) {
  const std::size_t n = report.sample_ids.size();
  if (report.mean_prob.size() != n || report.var_prob.size() != n ||
      report.mean_loss.size() != n || report.var_loss.size() != n)
    throw ShapeError("ground-truth report columns disagree in length");
  for (std::size_t i = 0; i < n; ++i) {
    if (report.mean_prob[i] < 0.0 || report.mean_prob[i] > 1.0)
      throw NumericError("ground-truth mean probability outside [0, 1]");
    if (report.var_prob[i] < 0.0 || report.var_loss[i] < 0.0)
      throw NumericError("ground-truth variance is negative");
  }
}

namespace {

// Mean and unbiased variance over values sorted ascending; sorting makes the
// reduction independent of member order.
std::pair<double, double> sorted_mean_var(std::vector<double>& values) {
  std::sort(values.begin(), values.end());
  KahanSum<double> sum;
  for (double v : values) sum.add(v);
  const double mean = sum.value() / double(values.size());
  KahanSum<double> ss;
  for (double v : values) {
    const double d = v - mean;
    ss.add(d * d);
  }
  double var = ss.value() / double(values.size() - 1);
  if (var < 0.0) var = 0.0;
  return {mean, var};
}

}  // namespace

GroundTruthReport ground_truth_ensemble_seeds(const TrainConfig& config,
                                              const Dataset& train_data,
                                              const Dataset& test_data,
                                              std::span<const std::uint64_t> seeds,
                                              int workers) {
  if (seeds.size() < 2) throw ParamError("ensemble needs at least 2 members");
  if (workers < 1) throw ParamError("workers must be positive");
  validate(config);
  validate(train_data);
  validate(test_data);
  if (train_data.class_count != test_data.class_count)
    throw ShapeError("train and test class counts differ");

  const std::size_t r = seeds.size();
  const std::size_t n = test_data.size();
  // probs[member * n + sample], likewise losses
  std::vector<double> probs(r * n), losses(r * n);
  std::vector<std::string> errors(r);
  bool failed = false;

  const std::ptrdiff_t rr = std::ptrdiff_t(r);
#pragma omp parallel for num_threads(workers) schedule(dynamic)
  for (std::ptrdiff_t mi = 0; mi < rr; ++mi) {
    const std::size_t member = std::size_t(mi);
    try {
      TrainConfig local = config;
      local.seed = seeds[member];
      const Network net = train(local, train_data);
      for (std::size_t i = 0; i < n; ++i) {
        const Sample& s = test_data.samples[i];
        const std::vector<double> h = predict_full(net, s.features);
        probs[member * n + i] = h[std::size_t(s.label)];
        losses[member * n + i] = -std::log(std::max(
            h[std::size_t(s.label)], std::numeric_limits<double>::min()));
      }
    } catch (const Error& e) {
      char buf[64];
      std::snprintf(buf, sizeof buf, "member seed %llu: ",
                    (unsigned long long)seeds[member]);
      errors[member] = buf + std::string(e.what());
#pragma omp atomic write
      failed = true;
    }
  }

  if (failed) {
    for (const std::string& msg : errors)
      if (!msg.empty()) throw TrainError(msg, 0);
  }

  GroundTruthReport report;
  report.ensemble_size = r;
  report.sample_ids.resize(n);
  report.mean_prob.resize(n);
  report.var_prob.resize(n);
  report.mean_loss.resize(n);
  report.var_loss.resize(n);
  std::vector<double> column(r);
  for (std::size_t i = 0; i < n; ++i) {
    report.sample_ids[i] = i;
    for (std::size_t member = 0; member < r; ++member)
      column[member] = probs[member * n + i];
    auto [pm, pv] = sorted_mean_var(column);
    report.mean_prob[i] = pm;
    report.var_prob[i] = pv;
    for (std::size_t member = 0; member < r; ++member)
      column[member] = losses[member * n + i];
    auto [lm, lv] = sorted_mean_var(column);
    report.mean_loss[i] = lm;
    report.var_loss[i] = lv;
  }
  validate(report);
  return report;
}

GroundTruthReport ground_truth_ensemble(const TrainConfig& config,
                                        const Dataset& train_data,
                                        const Dataset& test_data,
                                        std::size_t ensemble_size,
                                        std::uint64_t master_seed,
                                        int workers) {
  if (ensemble_size < 2) throw ParamError("ensemble needs at least 2 members");
  std::vector<std::uint64_t> seeds(ensemble_size);
  for (std::size_t i = 0; i < ensemble_size; ++i)
    seeds[i] = derive_seed(master_seed, std::uint64_t(i));
  return ground_truth_ensemble_seeds(config, train_data, test_data, seeds,
                                     workers);
}

}  // namespace lovme
