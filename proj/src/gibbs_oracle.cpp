#include "lovme/gibbs_oracle.hpp"

#include <omp.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <string>

#include "lovme/errors.hpp"
#include "lovme/util.hpp"

namespace lovme {

namespace {

std::size_t checked_unit_count(const Network& net) {
  const std::size_t n0 = count_maskable_units(net);
  if (n0 > kMaxEnumerableUnits)
    throw CapacityError("cannot enumerate " + std::to_string(n0) +
                        " maskable units (cap " +
                        std::to_string(kMaxEnumerableUnits) + ")");
  return n0;
}

void check_table(std::span<const double> losses) {
  if (losses.empty() || (losses.size() & (losses.size() - 1)) != 0)
    throw ParamError("loss table size must be a power of two");
  for (double l : losses)
    if (!std::isfinite(l)) throw NumericError("non-finite loss in table");
}

}  // namespace

std::vector<double> enumerate_losses(const Network& net, const Sample& sample,
                                     const LossOracle& oracle,
                                     std::size_t sample_index) {
  const std::size_t n0 = checked_unit_count(net);
  const std::size_t label =
      oracle.resolve(net, sample, sample_index, net.class_count);
  const std::size_t count = std::size_t(1) << n0;

  std::vector<double> losses(count);
  DropoutMask mask{std::vector<std::uint8_t>(n0, 0)};
  ForwardTrace tr;
  for (std::size_t w = 0; w < count; ++w) {
    fill_mask_from_word(w, mask);
    const std::vector<double>& logits =
        forward_masked(net, mask, sample.features, 1.0, tr);
    losses[w] = cross_entropy_from_logits(logits, label);
  }
  return losses;
}

std::vector<double> enumerate_losses_parallel(const Network& net,
                                              const Sample& sample,
                                              const LossOracle& oracle,
                                              std::size_t sample_index,
                                              int workers) {
  const std::size_t n0 = checked_unit_count(net);
  const std::size_t label =
      oracle.resolve(net, sample, sample_index, net.class_count);
  const std::size_t count = std::size_t(1) << n0;

  constexpr std::size_t kChunk = 4096;  // fixed; keeps results thread-count independent
  const std::size_t n_chunks = (count + kChunk - 1) / kChunk;

  std::vector<double> losses(count);
  const int n_threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel num_threads(n_threads)
  {
    DropoutMask mask{std::vector<std::uint8_t>(n0, 0)};
    ForwardTrace tr;
#pragma omp for schedule(dynamic)
    for (std::int64_t chunk = 0; chunk < std::int64_t(n_chunks); ++chunk) {
      const std::size_t begin = std::size_t(chunk) * kChunk;
      const std::size_t end = std::min(count, begin + kChunk);
      for (std::size_t w = begin; w < end; ++w) {
        fill_mask_from_word(w, mask);
        const std::vector<double>& logits =
            forward_masked(net, mask, sample.features, 1.0, tr);
        losses[w] = cross_entropy_from_logits(logits, label);
      }
    }
  }
  return losses;
}

long double log_partition(std::span<const double> losses,
                          const GibbsParams& params) {
  check_table(losses);
  long double max_e = -std::numeric_limits<long double>::infinity();
  for (std::size_t w = 0; w < losses.size(); ++w) {
    const long double e =
        -(static_cast<long double>(params.beta) * losses[w] +
          static_cast<long double>(params.eta) * double(std::popcount(w)));
    max_e = std::max(max_e, e);
  }
  KahanSum<long double> sum;
  for (std::size_t w = 0; w < losses.size(); ++w) {
    const long double e =
        -(static_cast<long double>(params.beta) * losses[w] +
          static_cast<long double>(params.eta) * double(std::popcount(w)));
    sum.add(std::exp(e - max_e));
  }
  return std::log(sum.value()) + max_e;
}

OracleResult gibbs_moments(std::span<const double> losses,
                           const GibbsParams& params) {
  check_table(losses);
  if (!std::isfinite(params.beta) || !std::isfinite(params.eta))
    throw ParamError("beta and eta must be finite");
  if (params.beta < 0.0) throw ParamError("beta must be >= 0");

  const long double log_z = log_partition(losses, params);

  KahanSum<long double> mean_l_sum, mean_n_sum, prob_sum;
  for (std::size_t w = 0; w < losses.size(); ++w) {
    const long double e =
        -(static_cast<long double>(params.beta) * losses[w] +
          static_cast<long double>(params.eta) * double(std::popcount(w)));
    const long double p = std::exp(e - log_z);
    prob_sum.add(p);
    mean_l_sum.add(p * losses[w]);
    mean_n_sum.add(p * double(std::popcount(w)));
  }
  const long double mean_l = mean_l_sum.value();
  const long double mean_n = mean_n_sum.value();

  KahanSum<long double> m2_l, m3_l, m4_l, m2_n;
  for (std::size_t w = 0; w < losses.size(); ++w) {
    const long double e =
        -(static_cast<long double>(params.beta) * losses[w] +
          static_cast<long double>(params.eta) * double(std::popcount(w)));
    const long double p = std::exp(e - log_z);
    const long double dl = losses[w] - mean_l;
    const long double dn = double(std::popcount(w)) - mean_n;
    m2_l.add(p * dl * dl);
    m3_l.add(p * dl * dl * dl);
    m4_l.add(p * dl * dl * dl * dl);
    m2_n.add(p * dn * dn);
  }

  OracleResult res;
  res.log_z = static_cast<double>(log_z);
  res.mean_loss = static_cast<double>(mean_l);
  res.mean_n = static_cast<double>(mean_n);
  res.var_loss = std::max(0.0, static_cast<double>(m2_l.value()));
  res.var_n = std::max(0.0, static_cast<double>(m2_n.value()));
  res.k3_loss = static_cast<double>(m3_l.value());
  res.k4_loss = static_cast<double>(m4_l.value() -
                                    3.0L * m2_l.value() * m2_l.value());
  return res;
}

OracleResult enumerate_gibbs(const Network& net, const Sample& sample,
                             const GibbsParams& params,
                             const LossOracle& oracle,
                             std::size_t sample_index) {
  return gibbs_moments(enumerate_losses(net, sample, oracle, sample_index),
                       params);
}

OracleResult enumerate_gibbs_parallel(const Network& net, const Sample& sample,
                                      const GibbsParams& params,
                                      const LossOracle& oracle,
                                      std::size_t sample_index, int workers) {
  return gibbs_moments(
      enumerate_losses_parallel(net, sample, oracle, sample_index, workers),
      params);
}

double variance_via_log_z(const Network& net, const Sample& sample,
                          const GibbsParams& params, double delta,
                          const LossOracle& oracle, std::size_t sample_index) {
  if (!(delta >= 1e-6 && delta <= 1e-2))
    throw ParamError("finite-difference delta must be in [1e-6, 1e-2]");
  if (params.beta - delta < 0.0)
    throw ParamError("beta - delta must stay nonnegative");
  const std::vector<double> losses =
      enumerate_losses(net, sample, oracle, sample_index);
  const long double d = delta;
  const long double lz_minus =
      log_partition(losses, {params.beta - delta, params.eta});
  const long double lz_mid = log_partition(losses, params);
  const long double lz_plus =
      log_partition(losses, {params.beta + delta, params.eta});
  return static_cast<double>((lz_plus - 2.0L * lz_mid + lz_minus) / (d * d));
}

Cumulants weighted_cumulants(std::span<const double> values,
                             std::span<const double> weights) {
  if (values.empty()) throw ParamError("cumulants need a nonempty point set");
  if (values.size() != weights.size())
    throw ParamError("values and weights differ in length");
  KahanSum<long double> wsum;
  for (double w : weights) {
    if (!(w >= 0.0)) throw ParamError("weights must be nonnegative");
    wsum.add(w);
  }
  if (std::fabs(static_cast<double>(wsum.value()) - 1.0) > 1e-9)
    throw ParamError("weights must sum to 1");

  KahanSum<long double> mean_sum;
  for (std::size_t i = 0; i < values.size(); ++i)
    mean_sum.add(static_cast<long double>(weights[i]) * values[i]);
  const long double mean = mean_sum.value();

  KahanSum<long double> m2, m3, m4;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const long double d = values[i] - mean;
    const long double w = weights[i];
    m2.add(w * d * d);
    m3.add(w * d * d * d);
    m4.add(w * d * d * d * d);
  }
  Cumulants c;
  c.mean = static_cast<double>(mean);
  c.variance = static_cast<double>(m2.value());
  c.k3 = static_cast<double>(m3.value());
  c.k4 = static_cast<double>(m4.value() - 3.0L * m2.value() * m2.value());
  return c;
}

}  // namespace lovme
