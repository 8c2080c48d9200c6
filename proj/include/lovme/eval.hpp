#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace lovme {

struct EvalRecord {
  std::size_t sample_id = 0;
  double h = 0.0;      // positive-class score in [0, 1]
  int label = 0;       // 1 positive, 0 negative
  double u = 0.0;      // uncertainty, >= 0
};

struct RocPoint {
  double threshold = 0.0;
  double fpr = 0.0;
  double tpr = 0.0;
};

struct RocCurve {
  std::vector<RocPoint> points;  // from (0,0) at +inf down to (1,1)
  double auc = 0.0;
};

// Threshold sweep over distinct scores, ties collapsed into one step. The
// AUC accumulates an integer numerator equal to twice the Mann-Whitney U
// statistic, so auc == 2U / (2 n_pos n_neg) with a single division.
RocCurve roc_auc(std::span<const EvalRecord> records);

struct BandRoc {
  RocCurve optimistic;   // positives scored h+u, negatives h-u, clamped
  RocCurve pessimistic;  // the reverse
};

// Treats u as a band half-width around h. Every pairwise score difference
// moves one way per curve, so optimistic.auc >= base >= pessimistic.auc.
BandRoc band_roc(std::span<const EvalRecord> records);

struct RejectionResult {
  RocCurve curve;
  double kept_fraction = 1.0;
  std::size_t rejected = 0;
};

// Drops the ceil(q*n) records with highest u (ties by sample_id) and
// recomputes the curve on the remainder.
RejectionResult rejection_auc(std::span<const EvalRecord> records, double q);

// Absolute-threshold variant: rejects records with u > tau.
RejectionResult rejection_auc_threshold(std::span<const EvalRecord> records,
                                        double tau);

struct CorrelationReport {
  double r = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
  bool degenerate = false;
  // Same statistics on the subset with mean_prob < restrict_below.
  double r_restricted = 0.0;
  double p_value_restricted = 1.0;
  std::size_t n_restricted = 0;
  bool degenerate_restricted = false;
};

// Pearson correlation of uncertainty against ensemble-mean correct-class
// probability, plus the same restricted below a probability cutoff. p-values
// are two-sided from the t transform of r.
CorrelationReport uncertainty_correlation(std::span<const double> u,
                                          std::span<const double> mean_prob,
                                          double restrict_below = 1.0);

double pearson(std::span<const double> x, std::span<const double> y,
               bool* degenerate = nullptr);
double pearson_p_value(double r, std::size_t n);

struct MulticlassRecord {
  std::size_t sample_id = 0;
  std::vector<double> probs;
  int label = 0;
  double u = 0.0;
};

// One-vs-rest reduction: h = probs[target_class], label = indicator.
std::vector<EvalRecord> multiclass_to_binary(
    std::span<const MulticlassRecord> records, int target_class);

struct MacroAuc {
  std::vector<double> per_class;
  double macro = 0.0;
};

MacroAuc macro_auc(std::span<const MulticlassRecord> records, int class_count);

struct MacroRejectionResult {
  MacroAuc auc;
  double kept_fraction = 1.0;
  std::size_t rejected = 0;
};

// Rejects the top-q uncertainty quantile once, across classes, then runs the
// one-vs-rest sweep on the retained records.
MacroRejectionResult macro_rejection_auc(
    std::span<const MulticlassRecord> records, int class_count, double q);

enum class NormalizeMode : std::uint8_t {
  MinMax = 0,  // (u - min) / (max - min), constant input maps to 0
  Raw = 1,
  StdDev = 2,  // sqrt(u)
};

NormalizeMode normalize_mode_from_string(const std::string& s);
std::string to_string(NormalizeMode mode);

std::vector<double> normalize_uncertainty(std::span<const double> u,
                                          NormalizeMode mode);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov test with the standard asymptotic p-value.
KsResult ks_two_sample(std::span<const double> a, std::span<const double> b);

void write_roc_csv(const std::string& path, const RocCurve& curve);
void write_scatter_csv(const std::string& path,
                       std::span<const std::size_t> sample_ids,
                       std::span<const double> u,
                       std::span<const double> mean_prob);

}  // namespace lovme
