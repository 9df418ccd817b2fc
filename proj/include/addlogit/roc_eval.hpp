#pragma once

#include <iosfwd>
#include <span>
#include <vector>

namespace addlogit {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

// Staircase ROC curve.  thresholds[k] is the cut c such that points[k] is the
// operating point of "positive iff score >= c"; the (0,0) point carries +inf.
struct RocCurve {
  std::vector<RocPoint> points;
  std::vector<double> thresholds;
  int n_pos = 0;
  int n_neg = 0;
};

struct AveragedRoc {
  std::vector<double> fpr_grid;
  std::vector<double> mean_tpr;
  std::vector<double> ci_lo;
  std::vector<double> ci_hi;
  int n_curves = 0;
};

// Labels are 0/1 (as doubles); both classes must be present.
RocCurve roc_curve(std::span<const double> scores, std::span<const double> labels);

// Mann-Whitney estimate: fraction of (positive, negative) pairs ranked
// correctly, ties counting one half.
double auc(std::span<const double> scores, std::span<const double> labels);

// Trapezoidal area under the curve.
double trapezoid_area(const RocCurve& curve);

double partial_auc(const RocCurve& curve, double fpr_lo, double fpr_hi);

// Linear interpolation of tpr at fpr; on a vertical segment the upper value.
double sensitivity_at_fpr(const RocCurve& curve, double fpr);

// Vertical averaging on an equispaced fpr grid of `grid_size` points over
// [0, 1], with mean +/- 1.96 sd / sqrt(n) clipped to [0, 1].
AveragedRoc average_roc(std::span<const RocCurve> curves, int grid_size);

// Three whitespace-separated columns: fpr tpr threshold.
void write_roc(std::ostream& out, const RocCurve& curve);

}  // namespace addlogit
