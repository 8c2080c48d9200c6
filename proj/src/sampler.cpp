#include "lovme/sampler.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <utility>

#include "lovme/errors.hpp"
#include "lovme/util.hpp"

namespace lovme {

ProposalKernel kernel_from_string(const std::string& s) {
  if (s == "single_flip") return ProposalKernel::SingleFlip;
  if (s == "size_resample") return ProposalKernel::SizeResample;
  throw ParamError("unknown proposal kernel '" + s + "'");
}

std::string to_string(ProposalKernel k) {
  switch (k) {
    case ProposalKernel::SingleFlip: return "single_flip";
    case ProposalKernel::SizeResample: return "size_resample";
  }
  throw ParamError("invalid proposal kernel value");
}

void validate(const ChainConfig& config) {
  if (config.transitions == 0) throw ParamError("transitions must be positive");
  if (config.burn_in >= config.transitions)
    throw ParamError("burn_in must be smaller than transitions");
  if (config.thin == 0) throw ParamError("thin must be positive");
  if (config.params.beta < 0.0 || !std::isfinite(config.params.beta))
    throw ParamError("beta must be finite and non-negative");
  if (!std::isfinite(config.params.eta))
    throw ParamError("eta must be finite");
}

double log_binomial(std::size_t n, std::size_t k) {
  if (k > n) throw ParamError("log_binomial: k exceeds n");
  return std::lgamma(double(n) + 1.0) - std::lgamma(double(k) + 1.0) -
         std::lgamma(double(n - k) + 1.0);
}

Proposal propose(const ThinnedNetworkState& current, ProposalKernel kernel,
                 Rng& rng) {
  const std::size_t n0 = current.mask.size();
  if (n0 == 0) throw ParamError("propose: empty mask");
  Proposal prop;
  switch (kernel) {
    case ProposalKernel::SingleFlip: {
      prop.mask = current.mask;
      const std::size_t i = std::size_t(rng.uniform_below(n0));
      prop.mask.keep[i] ^= 1;
      prop.log_g_ratio = 0.0;
      return prop;
    }
    case ProposalKernel::SizeResample: {
      const std::size_t n_cand = std::size_t(rng.uniform_below(n0 + 1));
      prop.mask = sample_mask_fixed_size(n0, n_cand, rng);
      // g(mu->v) = 1/(n0+1) * 1/C(n0, N_v); the size factor cancels in the
      // ratio. Both terms come from log_binomial, so the ratio negates
      // exactly under swapping the states.
      prop.log_g_ratio = log_binomial(n0, n_cand) -
                         log_binomial(n0, current.mask.popcount());
      return prop;
    }
  }
  throw ParamError("invalid proposal kernel value");
}

double proposal_log_density(ProposalKernel kernel, const DropoutMask& from,
                            const DropoutMask& to) {
  const std::size_t n0 = from.size();
  if (to.size() != n0) throw ShapeError("proposal_log_density: mask sizes differ");
  if (n0 == 0) throw ParamError("proposal_log_density: empty mask");
  switch (kernel) {
    case ProposalKernel::SingleFlip: {
      std::size_t hamming = 0;
      for (std::size_t i = 0; i < n0; ++i)
        hamming += std::size_t(from.keep[i] != to.keep[i]);
      if (hamming != 1) return -std::numeric_limits<double>::infinity();
      return -std::log(double(n0));
    }
    case ProposalKernel::SizeResample:
      return -std::log(double(n0) + 1.0) - log_binomial(n0, to.popcount());
  }
  throw ParamError("invalid proposal kernel value");
}

double acceptance_prob(const ThinnedNetworkState& current,
                       const ThinnedNetworkState& candidate,
                       const GibbsParams& params, double log_g_ratio) {
  const double d_loss = candidate.loss - current.loss;
  const double d_size = double(candidate.size) - double(current.size);
  const double exponent =
      -params.beta * d_loss - params.eta * d_size + log_g_ratio;
  if (exponent >= 0.0) return 1.0;
  return std::exp(exponent);
}

namespace {

std::uint64_t mask_word(const DropoutMask& mask) {
  std::uint64_t w = 0;
  for (std::size_t i = 0; i < mask.size(); ++i)
    if (mask.keep[i]) w |= std::uint64_t(1) << i;
  return w;
}

}  // namespace

LossTrace run_chain(const Network& net, const Sample& sample,
                    const ChainConfig& config, const LossOracle& oracle,
                    std::size_t sample_index) {
  validate(net);
  validate(config);
  const std::size_t n0 = count_maskable_units(net);
  if (config.record_masks && n0 > 64)
    throw ParamError("record_masks needs at most 64 maskable units");

  const std::size_t label =
      oracle.resolve(net, sample, sample_index, net.class_count);
  Rng rng(config.seed);
  ForwardTrace tr;

  ThinnedNetworkState state;
  state.mask = all_keep_mask(net);
  state.size = n0;
  try {
    state.loss = loss(net, state.mask, sample.features, label, tr);
  } catch (const NumericError& e) {
    throw ChainError(std::string("initial loss diverged: ") + e.what(), 0);
  }

  LossTrace trace;
  const std::size_t n_records =
      (config.transitions - config.burn_in + config.thin - 1) / config.thin;
  trace.losses.reserve(n_records);
  trace.sizes.reserve(n_records);
  trace.steps.reserve(n_records);
  trace.accepted.reserve(n_records);
  if (config.record_masks) trace.mask_words.reserve(n_records);

  ThinnedNetworkState candidate;
  for (std::size_t t = 1; t <= config.transitions; ++t) {
    Proposal prop = propose(state, config.kernel, rng);
    candidate.size = prop.mask.popcount();
    candidate.mask = std::move(prop.mask);
    try {
      candidate.loss = loss(net, candidate.mask, sample.features, label, tr);
    } catch (const NumericError& e) {
      throw ChainError(std::string("candidate loss diverged: ") + e.what(), t);
    }
    const double a = acceptance_prob(state, candidate, config.params,
                                     prop.log_g_ratio);
    const bool accept = rng.uniform01() < a;
    if (accept) std::swap(state, candidate);
    ++trace.propose_count;
    trace.accept_count += std::size_t(accept);

    if (t > config.burn_in && (t - config.burn_in) % config.thin == 0) {
      trace.losses.push_back(state.loss);
      trace.sizes.push_back(state.size);
      trace.steps.push_back(t);
      trace.accepted.push_back(std::uint8_t(accept));
      if (config.record_masks) trace.mask_words.push_back(mask_word(state.mask));
    }
  }
  return trace;
}

UncertaintyReport estimate(const LossTrace& trace) {
  const std::size_t n = trace.losses.size();
  if (n < 2) throw ParamError("estimate needs at least 2 recorded states");
  if (trace.sizes.size() != n)
    throw ShapeError("trace losses and sizes disagree in length");

  UncertaintyReport rep;
  rep.n_recorded = n;
  rep.accept_rate = trace.propose_count == 0
                        ? 0.0
                        : double(trace.accept_count) / double(trace.propose_count);

  KahanSum<double> sum;
  for (double v : trace.losses) sum.add(v);
  rep.mean_loss = sum.value() / double(n);

  KahanSum<double> s2, s3, s4;
  for (double v : trace.losses) {
    const double d = v - rep.mean_loss;
    const double d2 = d * d;
    s2.add(d2);
    s3.add(d2 * d);
    s4.add(d2 * d2);
  }
  const double m2 = s2.value() / double(n);
  rep.var_loss = s2.value() / double(n - 1);
  if (rep.var_loss < 0.0) rep.var_loss = 0.0;
  if (m2 > 0.0) {
    const double m3 = s3.value() / double(n);
    const double m4 = s4.value() / double(n);
    rep.skewness = m3 / std::pow(m2, 1.5);
    rep.excess_kurtosis = m4 / (m2 * m2) - 3.0;
  } else {
    rep.degenerate = true;
    rep.skewness = 0.0;
    rep.excess_kurtosis = 0.0;
  }

  KahanSum<double> ns, nss;
  for (std::size_t v : trace.sizes) ns.add(double(v));
  const double mean_n = ns.value() / double(n);
  for (std::size_t v : trace.sizes) {
    const double d = double(v) - mean_n;
    nss.add(d * d);
  }
  rep.var_n = nss.value() / double(n - 1);
  if (rep.var_n < 0.0) rep.var_n = 0.0;
  return rep;
}

UncertaintyReport estimate(const LossTrace& trace, const Network& net,
                           const Sample& sample, std::size_t sample_id) {
  UncertaintyReport rep = estimate(trace);
  rep.sample_id = sample_id;
  rep.h_score = predict_full(net, sample.features);
  return rep;
}

std::vector<UncertaintyReport> run_chains(const Network& net,
                                          const Dataset& data,
                                          const ChainConfig& config,
                                          const LossOracle& oracle) {
  validate(config);
  std::vector<UncertaintyReport> reports(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    ChainConfig local = config;
    local.seed = derive_seed(config.seed, std::uint64_t(i));
    LossTrace trace = run_chain(net, data.samples[i], local, oracle, i);
    reports[i] = estimate(trace, net, data.samples[i], i);
  }
  return reports;
}

std::vector<UncertaintyReport> run_chains_parallel(const Network& net,
                                                   const Dataset& data,
                                                   const ChainConfig& config,
                                                   const LossOracle& oracle,
                                                   int workers) {
  validate(config);
  if (workers < 1) throw ParamError("workers must be positive");
  const std::ptrdiff_t n = std::ptrdiff_t(data.size());
  std::vector<UncertaintyReport> reports(data.size());
  std::vector<std::string> errors(data.size());
  bool failed = false;

#pragma omp parallel for num_threads(workers) schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    try {
      ChainConfig local = config;
      local.seed = derive_seed(config.seed, std::uint64_t(i));
      LossTrace trace =
          run_chain(net, data.samples[std::size_t(i)], local, oracle,
                    std::size_t(i));
      reports[std::size_t(i)] =
          estimate(trace, net, data.samples[std::size_t(i)], std::size_t(i));
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

void write_trace_csv(const std::string& path, const LossTrace& trace) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << "step,loss,size,accepted\n";
  for (std::size_t i = 0; i < trace.losses.size(); ++i) {
    out << trace.steps[i] << ',' << format_double(trace.losses[i]) << ','
        << trace.sizes[i] << ',' << int(trace.accepted[i]) << '\n';
  }
  if (!out) throw FormatError("write failed for '" + path + "'");
}

}  // namespace lovme
