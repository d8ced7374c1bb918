#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "abp/occ_pipeline.hpp"

namespace abp {

/// Positive class = non_normal.
struct ConfusionMatrix {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  [[nodiscard]] std::size_t total() const noexcept { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

/// `flags[i]` true = predicted suspicious.
ConfusionMatrix score(const std::vector<bool>& flags, std::span<const BinaryLabel> labels);
ConfusionMatrix score(std::span<const HpdDecision> decisions);

struct ProportionInterval {
  double lo = 0.0;
  double hi = 1.0;
};

/// Exact (Clopper-Pearson) interval for k successes in n trials.
ProportionInterval clopper_pearson(std::size_t k, std::size_t n, double level = 0.95);

/// Bits set in Metrics::degenerate when a ratio had a zero denominator (the
/// metric is then reported as 0).
enum DegenerateBits : unsigned {
  kNoPredictedPositives = 1u << 0,  // precision
  kNoActualPositives = 1u << 1,     // sensitivity
  kNoActualNegatives = 1u << 2,     // specificity
  kNoPrecisionRecall = 1u << 3,     // F1
  kEmpty = 1u << 4,                 // overall accuracy
};

struct Metrics {
  double precision = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double f1 = 0.0;
  double g_mean = 0.0;
  double balanced_accuracy = 0.0;
  double overall_accuracy = 0.0;
  ProportionInterval accuracy_ci;
  unsigned degenerate = 0;
};

Metrics metrics(const ConfusionMatrix& cm);

struct CurvePoint {
  double x = 0.0;
  double y = 0.0;
  double threshold = 0.0;
};

struct Curve {
  std::vector<CurvePoint> points;
  double auc = 0.0;
};

/// (FPR, TPR) at every distinct score (predict positive when score >= t),
/// plus (0,0) and (1,1). The AUC is accumulated on integer counts, so it
/// equals the tie-corrected Mann-Whitney statistic exactly.
Curve roc_curve(std::span<const double> scores, std::span<const BinaryLabel> labels);

/// (recall, precision) at every distinct score, starting from recall 0 at the
/// precision of the strictest threshold; trapezoid AUC over recall.
Curve pr_curve(std::span<const double> scores, std::span<const BinaryLabel> labels);

struct EvalReport {
  std::string policy;
  bool oversampled = false;
  ConfusionMatrix cm;
  Metrics m;
  Curve roc;
  Curve pr;
};

/// Scores one policy's decisions; with `oversample` the scored set is first
/// balanced by random_oversample.
EvalReport evaluate(std::span<const HpdDecision> decisions, bool oversample, Rng& rng);

/// Table-1 style table: G-mean, F1, precision, sensitivity, specificity,
/// balanced accuracy, overall accuracy and CI, then counts and AUCs.
void write_report_csv(std::ostream& out, std::span<const EvalReport> reports);
void write_curves_csv(std::ostream& out, std::span<const EvalReport> reports);

/// Self-contained SVG with ROC (left) and PR (right) panels.
void write_curves_svg(std::ostream& out, std::span<const EvalReport> reports);

}  // namespace abp
