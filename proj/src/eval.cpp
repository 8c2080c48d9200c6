#include "lovme/eval.hpp"

#include <algorithm>
#include <boost/math/distributions/students_t.hpp>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numeric>

#include "lovme/errors.hpp"
#include "lovme/util.hpp"

namespace lovme {

namespace {

void check_records(std::span<const EvalRecord> records) {
  if (records.empty()) throw EvalError("no evaluation records");
  for (const EvalRecord& r : records) {
    if (!(r.h >= 0.0 && r.h <= 1.0))
      throw ParamError("score h outside [0, 1]");
    if (!(r.u >= 0.0)) throw ParamError("uncertainty u is negative");
    if (r.label != 0 && r.label != 1)
      throw ParamError("binary label must be 0 or 1");
  }
}

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

}  // namespace

RocCurve roc_auc(std::span<const EvalRecord> records) {
  check_records(records);
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (records[a].h != records[b].h) return records[a].h > records[b].h;
    return records[a].sample_id < records[b].sample_id;
  });

  std::uint64_t p_total = 0, n_total = 0;
  for (const EvalRecord& r : records) (r.label == 1 ? p_total : n_total) += 1;
  if (p_total == 0 || n_total == 0)
    throw EvalError("roc needs both classes present");

  RocCurve curve;
  curve.points.push_back(
      {std::numeric_limits<double>::infinity(), 0.0, 0.0});

  std::uint64_t tp = 0, fp = 0, numerator = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double score = records[order[i]].h;
    std::uint64_t tp_g = 0, fp_g = 0;
    while (i < order.size() && records[order[i]].h == score) {
      (records[order[i]].label == 1 ? tp_g : fp_g) += 1;
      ++i;
    }
    numerator += fp_g * (2 * tp + tp_g);  // 2U accumulated exactly
    tp += tp_g;
    fp += fp_g;
    curve.points.push_back(
        {score, double(fp) / double(n_total), double(tp) / double(p_total)});
  }
  curve.auc = double(numerator) / (2.0 * double(p_total) * double(n_total));
  return curve;
}

BandRoc band_roc(std::span<const EvalRecord> records) {
  check_records(records);
  std::vector<EvalRecord> opt(records.begin(), records.end());
  std::vector<EvalRecord> pes(records.begin(), records.end());
  for (std::size_t i = 0; i < records.size(); ++i) {
    const double up = clamp01(records[i].h + records[i].u);
    const double down = clamp01(records[i].h - records[i].u);
    if (records[i].label == 1) {
      opt[i].h = up;
      pes[i].h = down;
    } else {
      opt[i].h = down;
      pes[i].h = up;
    }
  }
  BandRoc bands;
  bands.optimistic = roc_auc(opt);
  bands.pessimistic = roc_auc(pes);
  return bands;
}

namespace {

// Indices ordered by uncertainty descending, sample_id ascending on ties.
std::vector<std::size_t> rejection_order(std::span<const EvalRecord> records) {
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (records[a].u != records[b].u) return records[a].u > records[b].u;
    return records[a].sample_id < records[b].sample_id;
  });
  return order;
}

std::size_t quantile_count(double q, std::size_t n) {
  if (!(q >= 0.0 && q < 1.0)) throw ParamError("rejection quantile must be in [0, 1)");
  return std::size_t(std::ceil(q * double(n) - 1e-9));
}

}  // namespace

RejectionResult rejection_auc(std::span<const EvalRecord> records, double q) {
  check_records(records);
  const std::size_t k = quantile_count(q, records.size());
  const std::vector<std::size_t> order = rejection_order(records);
  std::vector<EvalRecord> kept;
  kept.reserve(records.size() - k);
  std::vector<std::size_t> kept_idx(order.begin() + std::ptrdiff_t(k),
                                    order.end());
  std::sort(kept_idx.begin(), kept_idx.end());
  for (std::size_t idx : kept_idx) kept.push_back(records[idx]);

  RejectionResult result;
  result.rejected = k;
  result.kept_fraction = double(kept.size()) / double(records.size());
  result.curve = roc_auc(kept);
  return result;
}

RejectionResult rejection_auc_threshold(std::span<const EvalRecord> records,
                                        double tau) {
  check_records(records);
  if (!(tau >= 0.0)) throw ParamError("rejection threshold must be >= 0");
  std::vector<EvalRecord> kept;
  for (const EvalRecord& r : records)
    if (!(r.u > tau)) kept.push_back(r);
  RejectionResult result;
  result.rejected = records.size() - kept.size();
  result.kept_fraction = double(kept.size()) / double(records.size());
  result.curve = roc_auc(kept);
  return result;
}

double pearson(std::span<const double> x, std::span<const double> y,
               bool* degenerate) {
  if (x.size() != y.size()) throw ShapeError("pearson inputs disagree in length");
  if (x.size() < 3) throw ParamError("pearson needs at least 3 pairs");
  const double n = double(x.size());
  KahanSum<double> sx, sy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx.add(x[i]);
    sy.add(y[i]);
  }
  const double mx = sx.value() / n, my = sy.value() / n;
  KahanSum<double> sxx, syy, sxy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx, dy = y[i] - my;
    sxx.add(dx * dx);
    syy.add(dy * dy);
    sxy.add(dx * dy);
  }
  if (degenerate) *degenerate = false;
  if (sxx.value() <= 0.0 || syy.value() <= 0.0) {
    if (degenerate) *degenerate = true;
    return 0.0;
  }
  double r = sxy.value() / std::sqrt(sxx.value() * syy.value());
  if (r > 1.0) r = 1.0;
  if (r < -1.0) r = -1.0;
  return r;
}

double pearson_p_value(double r, std::size_t n) {
  if (n < 3) throw ParamError("p-value needs at least 3 pairs");
  const double df = double(n - 2);
  const double denom = 1.0 - r * r;
  if (denom <= 0.0) return 0.0;
  const double t = std::fabs(r) * std::sqrt(df / denom);
  boost::math::students_t dist(df);
  return 2.0 * boost::math::cdf(boost::math::complement(dist, t));
}

CorrelationReport uncertainty_correlation(std::span<const double> u,
                                          std::span<const double> mean_prob,
                                          double restrict_below) {
  if (u.size() != mean_prob.size())
    throw ShapeError("correlation inputs disagree in length");
  if (u.size() < 3) throw ParamError("correlation needs at least 3 pairs");

  CorrelationReport rep;
  rep.n = u.size();
  rep.r = pearson(u, mean_prob, &rep.degenerate);
  rep.p_value = rep.degenerate ? 1.0 : pearson_p_value(rep.r, rep.n);

  std::vector<double> ru, rp;
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (mean_prob[i] < restrict_below) {
      ru.push_back(u[i]);
      rp.push_back(mean_prob[i]);
    }
  }
  rep.n_restricted = ru.size();
  if (ru.size() < 3) {
    rep.degenerate_restricted = true;
    rep.r_restricted = 0.0;
    rep.p_value_restricted = 1.0;
  } else {
    rep.r_restricted = pearson(ru, rp, &rep.degenerate_restricted);
    rep.p_value_restricted =
        rep.degenerate_restricted
            ? 1.0
            : pearson_p_value(rep.r_restricted, rep.n_restricted);
  }
  return rep;
}

std::vector<EvalRecord> multiclass_to_binary(
    std::span<const MulticlassRecord> records, int target_class) {
  if (target_class < 0) throw ParamError("target class must be non-negative");
  std::vector<EvalRecord> out;
  out.reserve(records.size());
  for (const MulticlassRecord& r : records) {
    if (std::size_t(target_class) >= r.probs.size())
      throw ParamError("target class outside probability vector");
    EvalRecord e;
    e.sample_id = r.sample_id;
    e.h = r.probs[std::size_t(target_class)];
    e.label = r.label == target_class ? 1 : 0;
    e.u = r.u;
    out.push_back(e);
  }
  return out;
}

MacroAuc macro_auc(std::span<const MulticlassRecord> records, int class_count) {
  if (class_count < 2) throw ParamError("macro auc needs at least 2 classes");
  if (records.empty()) throw EvalError("no evaluation records");
  MacroAuc result;
  result.per_class.reserve(std::size_t(class_count));
  KahanSum<double> sum;
  for (int c = 0; c < class_count; ++c) {
    const std::vector<EvalRecord> binary = multiclass_to_binary(records, c);
    const double auc = roc_auc(binary).auc;
    result.per_class.push_back(auc);
    sum.add(auc);
  }
  result.macro = sum.value() / double(class_count);
  return result;
}

MacroRejectionResult macro_rejection_auc(
    std::span<const MulticlassRecord> records, int class_count, double q) {
  if (records.empty()) throw EvalError("no evaluation records");
  const std::size_t k = quantile_count(q, records.size());
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (records[a].u != records[b].u) return records[a].u > records[b].u;
    return records[a].sample_id < records[b].sample_id;
  });
  std::vector<std::size_t> kept_idx(order.begin() + std::ptrdiff_t(k),
                                    order.end());
  std::sort(kept_idx.begin(), kept_idx.end());
  std::vector<MulticlassRecord> kept;
  kept.reserve(kept_idx.size());
  for (std::size_t idx : kept_idx) kept.push_back(records[idx]);

  MacroRejectionResult result;
  result.rejected = k;
  result.kept_fraction = double(kept.size()) / double(records.size());
  result.auc = macro_auc(kept, class_count);
  return result;
}

NormalizeMode normalize_mode_from_string(const std::string& s) {
  if (s == "minmax") return NormalizeMode::MinMax;
  if (s == "raw") return NormalizeMode::Raw;
  if (s == "stddev") return NormalizeMode::StdDev;
  throw ParamError("unknown normalize mode '" + s + "'");
}

std::string to_string(NormalizeMode mode) {
  switch (mode) {
    case NormalizeMode::MinMax: return "minmax";
    case NormalizeMode::Raw: return "raw";
    case NormalizeMode::StdDev: return "stddev";
  }
  throw ParamError("invalid normalize mode value");
}

std::vector<double> normalize_uncertainty(std::span<const double> u,
                                          NormalizeMode mode) {
  std::vector<double> out(u.begin(), u.end());
  for (double v : out)
    if (!(v >= 0.0) || !std::isfinite(v))
      throw ParamError("uncertainty values must be finite and >= 0");
  switch (mode) {
    case NormalizeMode::Raw:
      return out;
    case NormalizeMode::StdDev:
      for (double& v : out) v = std::sqrt(v);
      return out;
    case NormalizeMode::MinMax: {
      if (out.empty()) return out;
      const auto [lo_it, hi_it] = std::minmax_element(out.begin(), out.end());
      const double lo = *lo_it, hi = *hi_it;
      if (hi == lo) {
        std::fill(out.begin(), out.end(), 0.0);
        return out;
      }
      for (double& v : out) v = (v - lo) / (hi - lo);
      return out;
    }
  }
  throw ParamError("invalid normalize mode value");
}

KsResult ks_two_sample(std::span<const double> a, std::span<const double> b) {
  if (a.size() < 2 || b.size() < 2)
    throw ParamError("ks test needs at least 2 values per sample");
  std::vector<double> x(a.begin(), a.end()), y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = double(x.size()), ny = double(y.size());

  double d = 0.0;
  std::size_t i = 0, j = 0;
  while (i < x.size() && j < y.size()) {
    const double v = std::min(x[i], y[j]);
    while (i < x.size() && x[i] == v) ++i;
    while (j < y.size() && y[j] == v) ++j;
    d = std::max(d, std::fabs(double(i) / nx - double(j) / ny));
  }
  KsResult result;
  result.statistic = d;

  const double ne = nx * ny / (nx + ny);
  const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  // Kolmogorov tail: Q = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 lambda^2).
  // When the series has not converged after 100 terms lambda is so small
  // that the tail mass is 1 for any practical purpose.
  double q = 0.0;
  double sign = 1.0;
  bool converged = false;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * double(k) * double(k) * lambda * lambda);
    q += sign * term;
    sign = -sign;
    if (term < 1e-16) {
      converged = true;
      break;
    }
  }
  result.p_value = converged ? std::min(1.0, std::max(0.0, 2.0 * q)) : 1.0;
  return result;
}

void write_roc_csv(const std::string& path, const RocCurve& curve) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << "threshold,fpr,tpr\n";
  for (const RocPoint& p : curve.points)
    out << format_double(p.threshold) << ',' << format_double(p.fpr) << ','
        << format_double(p.tpr) << '\n';
  if (!out) throw FormatError("write failed for '" + path + "'");
}

void write_scatter_csv(const std::string& path,
                       std::span<const std::size_t> sample_ids,
                       std::span<const double> u,
                       std::span<const double> mean_prob) {
  if (sample_ids.size() != u.size() || u.size() != mean_prob.size())
    throw ShapeError("scatter columns disagree in length");
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << "sample_id,var_loss,mean_prob\n";
  for (std::size_t i = 0; i < u.size(); ++i)
    out << sample_ids[i] << ',' << format_double(u[i]) << ','
        << format_double(mean_prob[i]) << '\n';
  if (!out) throw FormatError("write failed for '" + path + "'");
}

}  // namespace lovme
