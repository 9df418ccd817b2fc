#include "addlogit/roc_eval.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <ostream>
#include <string>

#include "addlogit/error.hpp"

namespace addlogit {

namespace {

void check_inputs(std::span<const double> scores, std::span<const double> labels, int& n_pos, int& n_neg) {
  if (scores.size() != labels.size()) {
    throw Error(ErrorCode::length_mismatch, "scores and labels differ in length");
  }
  n_pos = 0;
  n_neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) {
      throw Error(ErrorCode::non_finite_input, "score " + std::to_string(i) + " is not finite");
    }
    if (labels[i] == 1.0) {
      ++n_pos;
    } else if (labels[i] == 0.0) {
      ++n_neg;
    } else {
      throw Error(ErrorCode::one_class_input, "labels must be 0/1");
    }
  }
  if (n_pos == 0 || n_neg == 0) {
    throw Error(ErrorCode::one_class_input, "ROC analysis needs both classes");
  }
}

std::vector<std::size_t> descending_order(std::span<const double> scores) {
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  return order;
}

}  // namespace

RocCurve roc_curve(std::span<const double> scores, std::span<const double> labels) {
  RocCurve curve;
  check_inputs(scores, labels, curve.n_pos, curve.n_neg);
  const auto order = descending_order(scores);
  curve.points.push_back({0.0, 0.0});
  curve.thresholds.push_back(std::numeric_limits<double>::infinity());
  int tp = 0;
  int fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    // a tied group moves diagonally in one step
    while (i < order.size() && scores[order[i]] == s) {
      if (labels[order[i]] == 1.0) {
        ++tp;
      } else {
        ++fp;
      }
      ++i;
    }
    curve.points.push_back({static_cast<double>(fp) / curve.n_neg, static_cast<double>(tp) / curve.n_pos});
    curve.thresholds.push_back(s);
  }
  // the last group always reaches (1, 1); make the endpoint exact
  curve.points.back() = {1.0, 1.0};
  return curve;
}

double auc(std::span<const double> scores, std::span<const double> labels) {
  int n_pos = 0;
  int n_neg = 0;
  check_inputs(scores, labels, n_pos, n_neg);
  // rank-sum form of the Mann-Whitney statistic with midranks for ties
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);  // mean of ranks i+1..j
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]] == 1.0) pos_rank_sum += midrank;
    }
    i = j;
  }
  const double np = n_pos;
  const double nn = n_neg;
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

double trapezoid_area(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t k = 1; k < curve.points.size(); ++k) {
    const auto& a = curve.points[k - 1];
    const auto& b = curve.points[k];
    area += (b.fpr - a.fpr) * 0.5 * (a.tpr + b.tpr);
  }
  return area;
}

double partial_auc(const RocCurve& curve, double fpr_lo, double fpr_hi) {
  if (!(fpr_lo >= 0.0 && fpr_lo < fpr_hi && fpr_hi <= 1.0)) {
    throw Error(ErrorCode::invalid_range, "partial AUC range must satisfy 0 <= lo < hi <= 1");
  }
  double area = 0.0;
  for (std::size_t k = 1; k < curve.points.size(); ++k) {
    const auto& a = curve.points[k - 1];
    const auto& b = curve.points[k];
    if (b.fpr <= a.fpr) continue;  // vertical segments carry no area
    const double x0 = std::max(a.fpr, fpr_lo);
    const double x1 = std::min(b.fpr, fpr_hi);
    if (x1 <= x0) continue;
    auto tpr_at = [&](double x) { return a.tpr + (b.tpr - a.tpr) * (x - a.fpr) / (b.fpr - a.fpr); };
    area += (x1 - x0) * 0.5 * (tpr_at(x0) + tpr_at(x1));
  }
  return area;
}

double sensitivity_at_fpr(const RocCurve& curve, double fpr) {
  const auto& pts = curve.points;
  if (pts.empty()) return 0.0;
  fpr = std::clamp(fpr, 0.0, 1.0);
  double best = 0.0;
  bool exact = false;
  for (std::size_t k = 0; k < pts.size(); ++k) {
    if (pts[k].fpr == fpr) {
      best = exact ? std::max(best, pts[k].tpr) : pts[k].tpr;
      exact = true;
    }
  }
  if (exact) return best;
  for (std::size_t k = 1; k < pts.size(); ++k) {
    const auto& a = pts[k - 1];
    const auto& b = pts[k];
    if (a.fpr < fpr && fpr < b.fpr) {
      return a.tpr + (b.tpr - a.tpr) * (fpr - a.fpr) / (b.fpr - a.fpr);
    }
  }
  return pts.back().tpr;
}

AveragedRoc average_roc(std::span<const RocCurve> curves, int grid_size) {
  if (curves.empty()) {
    throw Error(ErrorCode::empty_input, "average_roc needs at least one curve");
  }
  const int g = std::max(grid_size, 2);
  AveragedRoc avg;
  avg.n_curves = static_cast<int>(curves.size());
  const double n = static_cast<double>(curves.size());
  for (int i = 0; i < g; ++i) {
    const double fpr = i == g - 1 ? 1.0 : static_cast<double>(i) / (g - 1);
    double sum = 0.0;
    std::vector<double> values;
    values.reserve(curves.size());
    for (const auto& c : curves) {
      values.push_back(sensitivity_at_fpr(c, fpr));
      sum += values.back();
    }
    const double mean = sum / n;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    const double sd = curves.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    const double half = 1.96 * sd / std::sqrt(n);
    avg.fpr_grid.push_back(fpr);
    avg.mean_tpr.push_back(mean);
    avg.ci_lo.push_back(std::clamp(mean - half, 0.0, 1.0));
    avg.ci_hi.push_back(std::clamp(mean + half, 0.0, 1.0));
  }
  return avg;
}

void write_roc(std::ostream& out, const RocCurve& curve) {
  out << "fpr\ttpr\tthreshold\n";
  out << std::setprecision(17);
  for (std::size_t k = 0; k < curve.points.size(); ++k) {
    out << curve.points[k].fpr << '\t' << curve.points[k].tpr << '\t' << curve.thresholds[k] << '\n';
  }
}

}  // namespace addlogit
