#pragma once

#include <Eigen/Dense>
#include <memory>
#include <vector>

#include "addlogit/logistic_glm.hpp"

namespace addlogit {

// One fitted additive component f_j, stored at the sorted unique training
// values of its feature.  Between design points it is linearly interpolated,
// outside the training range it is held constant.
struct SmoothComponent {
  int feature_index = 0;
  std::vector<double> design_x;
  std::vector<double> fitted_values;
  std::vector<double> se_values;  // pointwise SE at design_x (approximate)
  double target_df = 4.0;
  double lambda = 0.0;  // normalized smoothing parameter; +inf for a linear fit
  double df = 0.0;      // trace of the smoother matrix actually achieved
  double removed_mean = 0.0;  // weighted mean subtracted when centering
  bool linear_fallback = false;

  double eval(double x) const;
  double se(double x) const;
};

// Weighted penalized cubic spline smoother with the integrated squared second
// derivative penalty, lambda tuned so that trace(S) hits a target df.  The
// weights are fixed at construction so backfitting can apply the same
// smoother repeatedly.
class WeightedSmoother {
 public:
  WeightedSmoother(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& weights, double target_df);
  ~WeightedSmoother();
  WeightedSmoother(WeightedSmoother&&) noexcept;
  WeightedSmoother& operator=(WeightedSmoother&&) noexcept;

  // Centered fit (weighted mean zero) at the training points.
  Vector apply(const Eigen::Ref<const Vector>& target);

  // Component describing the most recent apply(); se_values at design points.
  SmoothComponent component(int feature_index) const;
  // Same, with caller-supplied values at the design points.
  SmoothComponent component(int feature_index, const Vector& unique_level) const;

  // Values at the unique design points from the most recent apply().
  const Vector& unique_values() const;

  double df() const;
  double lambda() const;
  bool linear_fallback() const;

  // Maps a vector of unique-level values back to training order.
  Vector expand(const Eigen::Ref<const Vector>& unique_level) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

SmoothComponent smooth_weighted(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& target,
                                const Eigen::Ref<const Vector>& weights, double target_df);

// Marks a feature as excluded in a per-feature df list.
inline constexpr double kOmitFeature = 0.0;

struct AdditiveFit {
  double alpha = 0.0;
  std::vector<SmoothComponent> components;
  bool converged = false;
  bool separation = false;
  int outer_iterations = 0;
  int sweeps = 0;  // backfitting sweeps of the last (or only) inner fit
  double deviance = 0.0;
  double effective_df = 1.0;
  std::vector<double> deviance_trace;
  int num_features = 0;

  double predict(const Vector& row) const;
  Vector predict(const Matrix& X) const;
  std::vector<int> kept_features() const;
};

struct BackfitOptions {
  double tol = 1e-6;
  int max_sweeps = 50;
};

struct LocalScoringOptions {
  BackfitOptions backfit;
  double tol = 1e-6;  // relative deviance change
  int max_outer = 25;
  int max_halvings = 10;
};

struct StepwiseOptions {
  LocalScoringOptions scoring;
  double df_scale = 1.0;
  double spline_df = 4.0;
};

// Weighted additive model for a working response; a df of kOmitFeature
// leaves that feature out.
AdditiveFit backfit(const Matrix& X, const Vector& z, const Vector& weights, const std::vector<double>& dfs,
                    const BackfitOptions& opts = {});

AdditiveFit local_scoring(const Matrix& X, const Vector& y, const std::vector<double>& dfs,
                          const LocalScoringOptions& opts = {});

// Greedy single pass over features choosing omit / linear (df 2) / spline
// by AIC with df multiplied by df_scale, then a final refit.
AdditiveFit stepwise_components(const Matrix& X, const Vector& y, const StepwiseOptions& opts = {});

struct ComponentCurve {
  int feature_index = 0;
  std::vector<double> x;
  std::vector<double> f;
  std::vector<double> se;
};

std::vector<ComponentCurve> component_curves(const AdditiveFit& fit, int grid_size);

}  // namespace addlogit
