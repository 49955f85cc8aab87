#pragma once

#include <optional>
#include <string>
#include <vector>

#include "dmssn/hsi_data.hpp"

namespace dmssn {

struct BinaryMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  // Set when the corresponding denominator was zero and the value defaulted to 0.
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

/// Confusion counts with "predicted positive" meaning y >= threshold.
BinaryMetrics binary_metrics(const SaliencyMask& y, const SaliencyMask& t, double threshold);

/// n uniform interior thresholds j / (n + 1), j = 1..n.
std::vector<double> curve_thresholds(int n);

struct CurveMetrics {
  double avg_f1 = 0.0;
  double auc = 0.0;
};

/// Mean F1 over the threshold sweep and the trapezoidal ROC area over the
/// same sweep plus (0,0) and (1,1).
CurveMetrics curve_metrics(const SaliencyMask& y, const SaliencyMask& t, int n_thresholds = 255);

/// ROC area with every distinct score as a threshold (ties count half).
double roc_auc_exact(const SaliencyMask& y, const SaliencyMask& t);

/// Pearson correlation; DataError if either map has zero variance.
double correlation_coefficient(const SaliencyMask& y, const SaliencyMask& t);
/// Mean standardized y over ground-truth-positive pixels (population std).
double normalized_scanpath_saliency(const SaliencyMask& y, const SaliencyMask& t);

struct DistributionMetrics {
  double mae = 0.0;
  std::optional<double> cc;   // empty when a map has zero variance
  std::optional<double> nss;  // empty when y has zero variance or t has no positives
};

DistributionMetrics distribution_metrics(const SaliencyMask& y, const SaliencyMask& t);

struct EvalReport {
  double mae = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double avg_f1 = 0.0;
  double auc = 0.0;
  std::optional<double> cc;
  std::optional<double> nss;
  int threshold_count = 255;
  double threshold = 0.5;  // for precision / recall
  int images = 1;

  std::string to_json() const;
  /// Aligned text table, columns MAE PRE REC avgF1 AUC CC NSS, preceded by
  /// a comment line stating the conventions.
  std::string to_table() const;
};

struct EvalOptions {
  int n_thresholds = 255;
  double threshold = 0.5;
};

EvalReport evaluate(const SaliencyMask& y, const SaliencyMask& t, const EvalOptions& opts = {});
/// Per-image mean of each metric; CC / NSS average over images where defined.
EvalReport average_reports(const std::vector<EvalReport>& reports);

}  // namespace dmssn
