// Acceptance gate: nine checks, one PASS/FAIL line each, exit code equal to
// the number of failures. Every check is deterministic; seeds are pinned.

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "lovme/baselines.hpp"
#include "lovme/dataset_io.hpp"
#include "lovme/errors.hpp"
#include "lovme/eval.hpp"
#include "lovme/experiment.hpp"
#include "lovme/gibbs_oracle.hpp"
#include "lovme/loss_oracle.hpp"
#include "lovme/network.hpp"
#include "lovme/rng.hpp"
#include "lovme/sampler.hpp"
#include "lovme/trainer.hpp"
#include "test_helpers.hpp"

using namespace lovme;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int index, const std::string& name, bool ok,
            const std::string& detail) {
  std::printf("%s  criterion %d (%s): %s\n", ok ? "PASS" : "FAIL", index,
              name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++g_failures;
}

std::string fmt(const char* format, ...) {
  char buf[512];
  va_list args;
  va_start(args, format);
  std::vsnprintf(buf, sizeof buf, format, args);
  va_end(args);
  return buf;
}

double rel_err(double est, double exact) {
  return std::fabs(est - exact) / std::max(std::fabs(exact), 1e-12);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

const std::vector<std::size_t> kTinyWidths = {6, 8, 10};

Network fixture_net(std::size_t width) {
  return test::tiny_net(width, 100 + width);
}

const std::vector<GibbsParams> kGrid = {
    {0.25, 0.0}, {0.5, 0.1}, {1.0, 0.0},
    {1.0, -0.1}, {2.0, 0.2}, {3.0, 0.0},
};

const LossOracle kOracle{LossMode::TrueLabel, 0};

// Chain mean/variance vs exhaustive enumeration over every net x grid cell,
// 50,000 recorded states per chain.
void criterion_1() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst_mean = 0.0;
  double worst_var = 0.0;
  std::uint64_t seed = 510;
  for (std::size_t width : kTinyWidths) {
    const Network net = fixture_net(width);
    const Sample sample = test::blob_sample();
    for (const GibbsParams& params : kGrid) {
      const OracleResult exact = enumerate_gibbs(net, sample, params, kOracle);
      ChainConfig config;
      config.params = params;
      config.kernel = ProposalKernel::SizeResample;
      config.thin = 5;
      config.burn_in = 5000;
      config.transitions = config.burn_in + 50000 * config.thin;
      config.seed = ++seed;
      const LossTrace trace = run_chain(net, sample, config, kOracle);
      const UncertaintyReport est = estimate(trace);
      worst_mean = std::max(worst_mean, rel_err(est.mean_loss, exact.mean_loss));
      worst_var = std::max(worst_var, rel_err(est.var_loss, exact.var_loss));
    }
  }
  const double elapsed = seconds_since(t0);
  const bool ok = worst_mean <= 0.05 && worst_var <= 0.05 && elapsed < 30.0;
  report(1, "oracle equivalence", ok,
         fmt("18 chains of 50000 recorded states; max rel err E[L] %.2e, "
             "Var[L] %.2e (<= 5e-2); %.1f s (< 30 s)",
             worst_mean, worst_var, elapsed));
}

// Exact detailed balance of both kernels on the full transition matrix.
void criterion_2() {
  double worst_gap = 0.0;
  for (std::size_t width : {std::size_t{6}, std::size_t{10}}) {
    const Network net = fixture_net(width);
    const GibbsParams params{1.0, 0.15};
    const std::vector<double> losses =
        enumerate_losses(net, test::blob_sample(), kOracle);
    const std::size_t n_states = losses.size();
    const long double log_z = log_partition(losses, params);

    std::vector<DropoutMask> masks(n_states);
    std::vector<double> prob(n_states);
    for (std::uint64_t w = 0; w < n_states; ++w) {
      masks[w] = mask_from_word(w, width);
      const long double weight =
          -(long double)(params.beta) * losses[w] -
          (long double)(params.eta) * std::popcount(w);
      prob[w] = double(std::exp(weight - log_z));
    }
    auto state_of = [&](std::uint64_t w) {
      return ThinnedNetworkState{masks[w], losses[w],
                                 std::size_t(std::popcount(w))};
    };

    for (const ProposalKernel kernel :
         {ProposalKernel::SingleFlip, ProposalKernel::SizeResample}) {
      for (std::uint64_t a = 0; a < n_states; ++a) {
        for (std::uint64_t b = a + 1; b < n_states; ++b) {
          if (kernel == ProposalKernel::SingleFlip &&
              std::popcount(a ^ b) != 1)
            continue;
          const double ld_ab = proposal_log_density(kernel, masks[a], masks[b]);
          const double ld_ba = proposal_log_density(kernel, masks[b], masks[a]);
          const double flow_ab =
              prob[a] * std::exp(ld_ab) *
              acceptance_prob(state_of(a), state_of(b), params, ld_ba - ld_ab);
          const double flow_ba =
              prob[b] * std::exp(ld_ba) *
              acceptance_prob(state_of(b), state_of(a), params, ld_ab - ld_ba);
          worst_gap = std::max(worst_gap, std::fabs(flow_ab - flow_ba));
        }
      }
    }
  }
  report(2, "detailed balance", worst_gap <= 1e-12,
         fmt("max |p(a)P(a->b) - p(b)P(b->a)| = %.2e (<= 1e-12) over both "
             "kernels, widths 6 and 10",
             worst_gap));
}

// Central second difference of log Z in beta vs the direct Gibbs variance.
void criterion_3() {
  double worst = 0.0;
  for (std::size_t width : kTinyWidths) {
    const Network net = fixture_net(width);
    const Sample sample = test::blob_sample();
    for (const GibbsParams& params : kGrid) {
      // Delta balances the O(delta^2) truncation against extended-precision
      // rounding amplified by 1/delta^2.
      const double fd = variance_via_log_z(net, sample, params, 5e-4, kOracle);
      const double direct =
          enumerate_gibbs(net, sample, params, kOracle).var_loss;
      worst = std::max(worst, rel_err(fd, direct));
    }
  }
  report(3, "log-partition duality", worst <= 1e-6,
         fmt("max rel gap between d2(log Z)/dbeta2 and Var[L] = %.2e "
             "(<= 1e-6) on all 18 fixtures",
             worst));
}

// At beta = eta = 0 the chain's stationary law is the uniform mask measure,
// i.e. MC-dropout with p = 1/2.
void criterion_4() {
  const Network net = fixture_net(8);
  const Sample sample = test::blob_sample();

  ChainConfig config;
  config.params = {0.0, 0.0};
  config.kernel = ProposalKernel::SingleFlip;
  config.burn_in = 1000;
  config.thin = 32;  // decorrelates the bit-flip walk
  config.transitions = config.burn_in + 10000 * config.thin;
  config.seed = 4004;
  const LossTrace chain = run_chain(net, sample, config, kOracle);

  const McDropoutResult mc = mc_dropout(net, sample, 0.5, 10000, 4040, kOracle);
  const KsResult ks = ks_two_sample(chain.losses, mc.trace.losses);
  report(4, "beta zero collapse", ks.p_value >= 0.01,
         fmt("KS on 10000 vs 10000 losses: D = %.4f, p = %.3f (>= 0.01)",
             ks.statistic, ks.p_value));
}

struct NoisyRun {
  Dataset train;
  Dataset test;
  TrainConfig train_config;
  Network net;
  std::vector<UncertaintyReport> reports;
};

// Shared setup for criteria 5 and 6: blobs with 10% label noise, dropout
// training, one chain per test sample.
NoisyRun noisy_blob_run(std::uint64_t seed) {
  NoisyRun run;
  run.train = synth_blobs(300, 3, 0.35, 0.10, derive_seed(seed, 0)).data;
  run.test = synth_blobs(200, 3, 0.35, 0.10, derive_seed(seed, 1)).data;

  run.train_config.hidden_widths = {16};
  run.train_config.epochs = 30;
  run.train_config.seed = derive_seed(seed, 2);
  run.net = train(run.train_config, run.train);

  ChainConfig config;
  config.params.beta = 1.0 / std::max(evaluate(run.net, run.test).loss, 1e-6);
  config.params.eta = 0.0;
  config.kernel = ProposalKernel::SizeResample;
  config.transitions = 900;
  config.burn_in = 100;
  config.thin = 1;
  config.seed = derive_seed(seed, 3);
  // Evaluation-time chains score each sample against its dataset label, the
  // convention of a labeled test split; the predicted-label mode caps hard
  // samples' losses near log(classes) and washes out the signal.
  const LossOracle oracle{LossMode::TrueLabel, 0};
  run.reports = run_chains_parallel(run.net, run.test, config, oracle, 4);
  return run;
}

std::vector<MulticlassRecord> to_records(const NoisyRun& run) {
  std::vector<MulticlassRecord> records(run.reports.size());
  for (std::size_t i = 0; i < run.reports.size(); ++i) {
    records[i].sample_id = run.reports[i].sample_id;
    records[i].probs = run.reports[i].h_score;
    records[i].label = int(run.test.samples[i].label);
    records[i].u = run.reports[i].var_loss;
  }
  return records;
}

// Rejecting the most uncertain tenth must raise macro AUC on average.
void criterion_5() {
  double delta_sum = 0.0;
  std::string per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const NoisyRun run = noisy_blob_run(seed);
    const auto records = to_records(run);
    const double base = macro_auc(records, 3).macro;
    const double rejected = macro_rejection_auc(records, 3, 0.10).auc.macro;
    delta_sum += rejected - base;
    per_seed += fmt("%s%+.4f", per_seed.empty() ? "" : " ", rejected - base);
  }
  const double mean_delta = delta_sum / 5.0;
  report(5, "rejection improves AUC", mean_delta >= 0.005,
         fmt("mean AUC gain after top-10%% rejection = %+.4f (>= +0.005); "
             "per seed: %s",
             mean_delta, per_seed.c_str()));
}

// Var[L] against retrained-ensemble confidence, restricted below 0.99.
void criterion_6() {
  const NoisyRun run = noisy_blob_run(1);
  const GroundTruthReport gt = ground_truth_ensemble(
      run.train_config, run.train, run.test, 30, 606, 4);

  std::vector<double> u(run.reports.size());
  for (std::size_t i = 0; i < u.size(); ++i) u[i] = run.reports[i].var_loss;
  const CorrelationReport corr =
      uncertainty_correlation(u, gt.mean_prob, 0.99);
  const bool ok = !corr.degenerate_restricted && corr.r_restricted < 0.0 &&
                  corr.p_value_restricted < 0.01;
  report(6, "ground-truth anticorrelation", ok,
         fmt("restricted Pearson r = %+.3f (n = %zu), p = %.2e (< 0.01)",
             corr.r_restricted, corr.n_restricted,
             corr.p_value_restricted));
}

// 300 transitions must be cheap on a (32,16) net and already unbiased on the
// enumerable fixtures.
void criterion_7() {
  TrainConfig tc;
  tc.hidden_widths = {32, 16};
  tc.epochs = 3;
  tc.seed = 7;
  const Dataset blobs = synth_blobs(200, 3, 0.35, 0.0, 70).data;
  const Network big = train(tc, blobs);

  ChainConfig config;
  config.params = {1.0, 0.0};
  config.transitions = 300;
  config.burn_in = 50;
  config.thin = 1;

  double worst_ms = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    config.seed = 700 + i;
    const auto t0 = std::chrono::steady_clock::now();
    const LossTrace trace =
        run_chain(big, blobs.samples[i], config, kOracle, i);
    worst_ms = std::max(worst_ms, 1000.0 * seconds_since(t0));
    (void)trace;
  }

  double worst_sd_gap = 0.0;
  for (std::size_t width : kTinyWidths) {
    const Network net = fixture_net(width);
    const Sample sample = test::blob_sample();
    const OracleResult exact =
        enumerate_gibbs(net, sample, {1.0, 0.0}, kOracle);
    config.params = {1.0, 0.0};
    config.seed = 7000 + width;
    const LossTrace trace = run_chain(net, sample, config, kOracle);
    const UncertaintyReport est = estimate(trace);
    const double gap =
        std::fabs(est.mean_loss - exact.mean_loss) / std::sqrt(exact.var_loss);
    worst_sd_gap = std::max(worst_sd_gap, gap);
  }

  const bool ok = worst_ms < 100.0 && worst_sd_gap <= 2.0;
  report(7, "300-step practicality", ok,
         fmt("slowest 300-transition chain on (32,16) net: %.2f ms "
             "(< 100 ms); trace mean within %.2f oracle SD (<= 2)",
             worst_ms, worst_sd_gap));
}

// AUC versus exact pair counting, band bracketing, rejection determinism.
void criterion_8() {
  Rng rng(808);
  std::size_t violations = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 20 + rng.uniform_below(181);
    const bool discrete = trial % 2 == 0;
    const std::uint64_t levels = 2 + rng.uniform_below(11);
    std::vector<EvalRecord> records(n);
    for (std::size_t i = 0; i < n; ++i) {
      records[i].sample_id = i;
      records[i].h = discrete
                         ? double(rng.uniform_below(levels)) / double(levels - 1)
                         : rng.uniform01();
      records[i].label = (i < 2) ? int(i) : int(rng.uniform_below(2));
      records[i].u = std::fabs(rng.normal01());
    }

    // Exact Mann-Whitney numerator: 2 per win, 1 per tie. Both sides divide
    // the same integers, so equality is bitwise.
    std::uint64_t numerator = 0;
    std::uint64_t p_total = 0;
    std::uint64_t n_total = 0;
    for (const EvalRecord& pos : records) {
      if (pos.label != 1) continue;
      ++p_total;
      for (const EvalRecord& neg : records) {
        if (neg.label != 0) continue;
        if (pos.h > neg.h) numerator += 2;
        else if (pos.h == neg.h) numerator += 1;
      }
    }
    n_total = std::uint64_t(records.size()) - p_total;
    const double oracle_auc =
        double(numerator) / (2.0 * double(p_total) * double(n_total));

    const double auc = roc_auc(records).auc;
    if (auc != oracle_auc) ++violations;

    const BandRoc band = band_roc(records);
    if (!(band.optimistic.auc >= auc && auc >= band.pessimistic.auc))
      ++violations;

    std::vector<EvalRecord> shuffled(records.rbegin(), records.rend());
    std::rotate(shuffled.begin(), shuffled.begin() + std::ptrdiff_t(n / 3),
                shuffled.end());
    for (const double q : {0.1, 0.37}) {
      const RejectionResult r1 = rejection_auc(records, q);
      const RejectionResult r2 = rejection_auc(shuffled, q);
      const auto expect_k = std::size_t(std::ceil(q * double(n) - 1e-9));
      if (r1.curve.auc != r2.curve.auc || r1.rejected != r2.rejected ||
          r1.rejected != expect_k)
        ++violations;
    }
  }
  report(8, "evaluation correctness", violations == 0,
         fmt("%zu violations across 1000 fixtures (AUC == pair-count oracle, "
             "band bracketing, rejection determinism)",
             violations));
}

// The same manifest must reproduce every artifact hash at any worker count.
void criterion_9() {
  test::TempDir dir;
  ExperimentConfig config;
  config.data.train_n = 80;
  config.data.test_n = 24;
  config.data.classes = 3;
  config.data.label_noise_rate = 0.10;
  config.data.data_seed = 90;
  config.train.hidden_widths = {8};
  config.train.epochs = 6;
  config.train.seed = 91;
  config.chain.transitions = 300;
  config.chain.burn_in = 60;
  config.chain.thin = 2;
  config.chain.seed = 92;
  config.with_mc_dropout = true;
  config.mc_passes = 50;
  config.with_ground_truth = true;
  config.ensemble_size = 4;
  config.workers = 1;
  config.output_dir = dir.file("first");

  const Manifest first = run_experiment(config);
  const std::string manifest_path =
      (fs::path(config.output_dir) / "manifest.json").string();
  const Manifest w4 = rerun_from_manifest(manifest_path, dir.file("w4"), 4);
  const Manifest w3 = rerun_from_manifest(manifest_path, dir.file("w3"), 3);

  std::size_t mismatches = 0;
  for (const Manifest* other : {&w4, &w3}) {
    if (other->outputs.size() != first.outputs.size()) {
      ++mismatches;
      continue;
    }
    for (const auto& [rel, hash] : first.outputs) {
      auto it = other->outputs.find(rel);
      if (it == other->outputs.end() || it->second != hash) ++mismatches;
    }
  }
  report(9, "manifest reproducibility", mismatches == 0,
         fmt("%zu artifacts, %zu hash mismatches across reruns with 1, 4 and "
             "3 workers",
             first.outputs.size(), mismatches));
}

}  // namespace

int main() {
  try {
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    criterion_7();
    criterion_8();
    criterion_9();
  } catch (const std::exception& e) {
    std::printf("FAIL  unexpected exception: %s\n", e.what());
    ++g_failures;
  }
  std::printf("acceptance: %d/9 criteria passed\n", 9 - g_failures);
  return g_failures;
}
