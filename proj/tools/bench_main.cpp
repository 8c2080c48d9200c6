// Timing comparison of the serial reference implementations against the
// OpenMP kernels: exhaustive mask enumeration, per-sample chains, and the
// retrained ensemble. Also verifies that both paths produce identical bits.

#include <omp.h>

#include <chrono>
#include <cstdio>
#include <cstring>
#include <string>
#include <vector>

#include "lovme/baselines.hpp"
#include "lovme/dataset_io.hpp"
#include "lovme/gibbs_oracle.hpp"
#include "lovme/sampler.hpp"
#include "lovme/trainer.hpp"

using namespace lovme;

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

void print_row(const char* name, double serial_s, double parallel_s,
               bool identical) {
  std::printf("%-28s %10.3fs %12.3fs %9.2fx   %s\n", name, serial_s,
              parallel_s, serial_s / parallel_s,
              identical ? "identical" : "MISMATCH");
}

bool reports_equal(const std::vector<UncertaintyReport>& a,
                   const std::vector<UncertaintyReport>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::memcmp(&a[i].mean_loss, &b[i].mean_loss, sizeof(double)) != 0 ||
        std::memcmp(&a[i].var_loss, &b[i].var_loss, sizeof(double)) != 0 ||
        a[i].h_score != b[i].h_score)
      return false;
  }
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  int workers = omp_get_max_threads();
  for (int i = 1; i < argc; ++i) {
    if (std::string(argv[i]) == "--workers" && i + 1 < argc)
      workers = std::atoi(argv[++i]);
  }
  std::printf("workers: %d\n\n", workers);
  std::printf("%-28s %11s %13s %10s   %s\n", "kernel", "serial", "parallel",
              "speedup", "check");

  BlobsResult blobs = synth_blobs(300, 3, 0.35, 0.0, 11);
  TrainConfig tc;
  tc.epochs = 10;

  // exhaustive enumeration, 2^18 masks
  {
    TrainConfig small = tc;
    small.hidden_widths = {12, 6};
    const Network net = train(small, blobs.data);
    const LossOracle oracle{LossMode::PredictedLabel, 0};
    const Sample& sample = blobs.data.samples[0];

    auto t0 = std::chrono::steady_clock::now();
    const std::vector<double> serial = enumerate_losses(net, sample, oracle);
    const double ts = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const std::vector<double> parallel =
        enumerate_losses_parallel(net, sample, oracle, 0, workers);
    const double tp = seconds_since(t0);
    print_row("enumeration (2^18 masks)", ts, tp, serial == parallel);
  }

  // chains across samples, (32,16) hidden net
  {
    const Network net = train(tc, blobs.data);
    ChainConfig cc;
    cc.transitions = 2000;
    cc.burn_in = 100;
    cc.params.beta = 1.0;
    Dataset subset = blobs.data;
    subset.samples.resize(100);
    const LossOracle oracle{LossMode::PredictedLabel, 0};

    auto t0 = std::chrono::steady_clock::now();
    const auto serial = run_chains(net, subset, cc, oracle);
    const double ts = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const auto parallel = run_chains_parallel(net, subset, cc, oracle, workers);
    const double tp = seconds_since(t0);
    print_row("chains (100 x 2000)", ts, tp, reports_equal(serial, parallel));
  }

  // retrained ensemble
  {
    Dataset test = blobs.data;
    test.split = Split::Test;
    auto t0 = std::chrono::steady_clock::now();
    const GroundTruthReport serial =
        ground_truth_ensemble(tc, blobs.data, test, 12, 5, 1);
    const double ts = seconds_since(t0);
    t0 = std::chrono::steady_clock::now();
    const GroundTruthReport parallel =
        ground_truth_ensemble(tc, blobs.data, test, 12, 5, workers);
    const double tp = seconds_since(t0);
    print_row("ensemble (R=12)", ts, tp,
              serial.mean_prob == parallel.mean_prob &&
                  serial.var_prob == parallel.var_prob);
  }
  return 0;
}
