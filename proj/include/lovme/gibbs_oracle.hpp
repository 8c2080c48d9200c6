#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "lovme/dataset.hpp"
#include "lovme/loss_oracle.hpp"
#include "lovme/network.hpp"

namespace lovme {

// Inverse temperature and chemical potential of the thinned-network ensemble
// measure p_i = exp(-(beta*L_i + eta*N_i)) / Z.
struct GibbsParams {
  double beta = 1.0;
  double eta = 0.0;
};

struct OracleResult {
  double log_z = 0.0;
  double mean_loss = 0.0;
  double mean_n = 0.0;
  double var_loss = 0.0;
  double var_n = 0.0;
  double k3_loss = 0.0;  // third cumulant of the loss
  double k4_loss = 0.0;  // fourth cumulant of the loss
};

struct Cumulants {
  double mean = 0.0;
  double variance = 0.0;
  double k3 = 0.0;
  double k4 = 0.0;
};

// Hard cap on exhaustive enumeration: 2^22 loss evaluations.
inline constexpr std::size_t kMaxEnumerableUnits = 22;

// Loss of every mask of the network, indexed by the mask word (bit i of the
// word is keep-bit i; iteration is plain integer counting order). The
// network's unit count must not exceed kMaxEnumerableUnits.
std::vector<double> enumerate_losses(const Network& net, const Sample& sample,
                                     const LossOracle& oracle,
                                     std::size_t sample_index = 0);

// OpenMP variant: fills the table in fixed-size chunks so the result is
// bit-identical to the serial one for any worker count.
std::vector<double> enumerate_losses_parallel(const Network& net,
                                              const Sample& sample,
                                              const LossOracle& oracle,
                                              std::size_t sample_index,
                                              int workers);

// log Z over a full loss table, accumulated in extended precision.
long double log_partition(std::span<const double> losses,
                          const GibbsParams& params);

// Exact ensemble moments from a full loss table (size must be a power of
// two). Probability arithmetic stays in log space; sums are compensated.
OracleResult gibbs_moments(std::span<const double> losses,
                           const GibbsParams& params);

// Exhaustive ground truth: enumerate every mask and reduce.
OracleResult enumerate_gibbs(const Network& net, const Sample& sample,
                             const GibbsParams& params,
                             const LossOracle& oracle,
                             std::size_t sample_index = 0);

OracleResult enumerate_gibbs_parallel(const Network& net, const Sample& sample,
                                      const GibbsParams& params,
                                      const LossOracle& oracle,
                                      std::size_t sample_index, int workers);

// Central second difference of log Z in beta:
// (log Z(b+d) - 2 log Z(b) + log Z(b-d)) / d^2. Equals the loss variance up
// to O(d^2); the second log-derivative of Z is the second cumulant.
double variance_via_log_z(const Network& net, const Sample& sample,
                          const GibbsParams& params, double delta,
                          const LossOracle& oracle,
                          std::size_t sample_index = 0);

// Mean, variance and third/fourth cumulants of a weighted point set.
// Weights must be nonnegative and sum to 1 (within 1e-9).
Cumulants weighted_cumulants(std::span<const double> values,
                             std::span<const double> weights);

}  // namespace lovme
