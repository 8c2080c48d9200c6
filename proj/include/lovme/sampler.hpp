#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lovme/dataset.hpp"
#include "lovme/gibbs_oracle.hpp"
#include "lovme/loss_oracle.hpp"
#include "lovme/network.hpp"

namespace lovme {

enum class ProposalKernel : std::uint8_t {
  SingleFlip = 0,    // flip one uniformly chosen keep-bit; symmetric
  SizeResample = 1,  // draw a size uniformly, then a uniform mask of that size
};

ProposalKernel kernel_from_string(const std::string& s);
std::string to_string(ProposalKernel k);

struct ChainConfig {
  GibbsParams params;
  std::size_t transitions = 5000;
  std::size_t burn_in = 100;
  std::size_t thin = 1;
  ProposalKernel kernel = ProposalKernel::SingleFlip;
  std::uint64_t seed = 1;
  bool record_masks = false;  // diagnostic; needs <= 64 maskable units
};

void validate(const ChainConfig& config);

// Current point of the Markov chain over thinned networks.
struct ThinnedNetworkState {
  DropoutMask mask;
  double loss = 0.0;
  std::size_t size = 0;
};

// Recorded (loss, size) pairs of the chain, post burn-in, every `thin` steps.
struct LossTrace {
  std::vector<double> losses;
  std::vector<std::size_t> sizes;
  std::vector<std::size_t> steps;      // transition index of each record
  std::vector<std::uint8_t> accepted;  // was that transition accepted
  std::vector<std::uint64_t> mask_words;  // filled only when record_masks
  std::size_t accept_count = 0;
  std::size_t propose_count = 0;
};

struct Proposal {
  DropoutMask mask;
  double log_g_ratio = 0.0;  // log g(candidate->current) - log g(current->candidate)
};

double log_binomial(std::size_t n, std::size_t k);

// Draw a candidate mask from the kernel. The returned log_g_ratio is the
// Hastings correction; it is exactly 0 for the symmetric single-flip kernel.
Proposal propose(const ThinnedNetworkState& current, ProposalKernel kernel,
                 Rng& rng);

// log of the kernel density g(from -> to); -inf where the kernel cannot
// propose `to`. This is the density `propose` samples from.
double proposal_log_density(ProposalKernel kernel, const DropoutMask& from,
                            const DropoutMask& to);

// Metropolis-Hastings acceptance
//   A = min(1, exp(-beta dL - eta dN + log_g_ratio)).
// Favorable moves return exactly 1. beta and eta enter independently, so
// beta = 0 is well defined.
double acceptance_prob(const ThinnedNetworkState& current,
                       const ThinnedNetworkState& candidate,
                       const GibbsParams& params, double log_g_ratio);

// Runs the chain, starting from the full network. Each transition evaluates
// the candidate's loss exactly once. Deterministic given config.seed.
// Throws ChainError with the step index if a loss turns non-finite.
LossTrace run_chain(const Network& net, const Sample& sample,
                    const ChainConfig& config, const LossOracle& oracle,
                    std::size_t sample_index = 0);

struct UncertaintyReport {
  std::size_t sample_id = 0;
  double mean_loss = 0.0;
  double var_loss = 0.0;
  double var_n = 0.0;
  double skewness = 0.0;
  double excess_kurtosis = 0.0;
  bool degenerate = false;        // zero-variance trace
  std::vector<double> h_score;    // predict_full probabilities
  std::size_t n_recorded = 0;
  double accept_rate = 0.0;
};

// Sample moments of a trace: mean, unbiased variances, skewness and excess
// kurtosis of the losses. Needs at least 2 recorded states.
UncertaintyReport estimate(const LossTrace& trace);

// Same, with the full-network h-score attached.
UncertaintyReport estimate(const LossTrace& trace, const Network& net,
                           const Sample& sample, std::size_t sample_id);

// One chain per sample; per-sample seeds derive from (config.seed, index) so
// results do not depend on worker count or scheduling.
std::vector<UncertaintyReport> run_chains(const Network& net,
                                          const Dataset& data,
                                          const ChainConfig& config,
                                          const LossOracle& oracle);

std::vector<UncertaintyReport> run_chains_parallel(const Network& net,
                                                   const Dataset& data,
                                                   const ChainConfig& config,
                                                   const LossOracle& oracle,
                                                   int workers);

void write_trace_csv(const std::string& path, const LossTrace& trace);

}  // namespace lovme
