#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lovme/dataset.hpp"
#include "lovme/loss_oracle.hpp"
#include "lovme/network.hpp"
#include "lovme/sampler.hpp"
#include "lovme/trainer.hpp"

namespace lovme {

struct McDropoutResult {
  LossTrace trace;
  UncertaintyReport report;
};

// Uniform MC-dropout: M independent Bernoulli(p) masks, each thinned network
// weighted equally. Losses use the same unscaled masked forward as the
// chain, so at p = 1/2 this samples the uniform measure over masks.
McDropoutResult mc_dropout(const Network& net, const Sample& sample, double p,
                           std::size_t m, std::uint64_t seed,
                           const LossOracle& oracle = LossOracle{},
                           std::size_t sample_index = 0);

std::vector<UncertaintyReport> mc_dropout_all(const Network& net,
                                              const Dataset& data, double p,
                                              std::size_t m,
                                              std::uint64_t seed,
                                              const LossOracle& oracle,
                                              int workers);

// Retrained-ensemble ground truth: per test sample, mean and variance of the
// correct-class softmax probability across independently initialized
// networks. Loss statistics ride along for the correlation study.
struct GroundTruthReport {
  std::vector<std::size_t> sample_ids;
  std::vector<double> mean_prob;
  std::vector<double> var_prob;
  std::vector<double> mean_loss;
  std::vector<double> var_loss;
  std::size_t ensemble_size = 0;
};

void validate(const GroundTruthReport& report);

// Trains one network per seed. Per-sample reductions run over member values
// sorted ascending, so the report is invariant to member order. Training
// divergence surfaces as a TrainError naming the offending seed.
GroundTruthReport ground_truth_ensemble_seeds(const TrainConfig& config,
                                              const Dataset& train_data,
                                              const Dataset& test_data,
                                              std::span<const std::uint64_t> seeds,
                                              int workers);

// Derives member seeds from (master_seed, member index).
GroundTruthReport ground_truth_ensemble(const TrainConfig& config,
                                        const Dataset& train_data,
                                        const Dataset& test_data,
                                        std::size_t ensemble_size,
                                        std::uint64_t master_seed,
                                        int workers);

}  // namespace lovme
