#include "addlogit/gam_backfit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "addlogit/error.hpp"
#include "addlogit/spline_basis.hpp"

namespace addlogit {

namespace {

double interpolate(const std::vector<double>& xs, const std::vector<double>& ys, double x) {
  if (xs.empty()) return 0.0;
  if (x <= xs.front()) return ys.front();
  if (x >= xs.back()) return ys.back();
  const auto it = std::upper_bound(xs.begin(), xs.end(), x);
  const auto hi = static_cast<std::size_t>(it - xs.begin());
  const std::size_t lo = hi - 1;
  const double t = (x - xs[lo]) / (xs[hi] - xs[lo]);
  return ys[lo] + t * (ys[hi] - ys[lo]);
}

// Integrated squared second derivative penalty for cubic B-splines on evenly
// spaced knots: f'' = sum_i (D2 beta)_i B_{i,2} / h^2, so
// Omega = D2^T G D2 / h^4 with G the Gram matrix of the order-2 basis.
Eigen::MatrixXd curvature_penalty(const BSplineBasis& cubic) {
  const int K = cubic.num_basis();
  const double h = cubic.knot_vector().spacing();
  const BSplineBasis hats(cubic.lo(), cubic.hi(), K - 2, 2);
  Eigen::MatrixXd gram = Eigen::MatrixXd::Zero(K - 2, K - 2);
  const double g = 0.5 / std::sqrt(3.0);
  const int intervals = K - 3;
  for (int k = 0; k < intervals; ++k) {
    const double mid = cubic.lo() + (k + 0.5) * h;
    for (double offset : {-g, g}) {
      const Eigen::VectorXd b = hats.eval(mid + offset * h);
      gram.noalias() += 0.5 * h * b * b.transpose();
    }
  }
  const Eigen::MatrixXd d2 = difference_operator(K, 2);
  return d2.transpose() * gram * d2 / std::pow(h, 4);
}

constexpr double kLogLambdaMin = -8.0;
constexpr double kLogLambdaMax = 8.0;
constexpr int kBisectionSteps = 60;
constexpr int kMaxSmootherBasis = 24;

}  // namespace

double SmoothComponent::eval(double x) const { return interpolate(design_x, fitted_values, x); }

double SmoothComponent::se(double x) const {
  if (se_values.empty()) return 0.0;
  return interpolate(design_x, se_values, x);
}

struct WeightedSmoother::Impl {
  enum class Mode { constant, linear, spline };

  Mode mode = Mode::constant;
  std::vector<int> group_of;
  std::vector<double> ux;
  Vector w;   // per-observation weights
  Vector sw;  // total weight per unique x
  double total_weight = 0.0;
  bool fallback = false;

  // linear mode
  double xbar = 0.0;
  double sxx = 0.0;

  // spline mode
  Matrix basis_at_unique;  // n_u x K
  Matrix transform;        // G = L^{-T} U, so (R + lambda Omega)^{-1} = G diag(shrink) G^T
  Vector shrink;           // 1 / (1 + lambda d_i)
  double lambda_norm = 0.0;
  double trace = 1.0;

  Vector last_unique;
  double last_mean = 0.0;

  Vector se_unique() const {
    const auto nu = static_cast<Eigen::Index>(ux.size());
    Vector se = Vector::Zero(nu);
    switch (mode) {
      case Mode::constant:
        se.setConstant(std::sqrt(1.0 / total_weight));
        break;
      case Mode::linear:
        for (Eigen::Index u = 0; u < nu; ++u) {
          const double dx = ux[static_cast<std::size_t>(u)] - xbar;
          se[u] = std::sqrt(1.0 / total_weight + (sxx > 0.0 ? dx * dx / sxx : 0.0));
        }
        break;
      case Mode::spline: {
        // Cov(beta) = M^{-1} R M^{-1} = G diag(shrink^2) G^T for unit-dispersion
        // working responses with variance 1/w.
        const Matrix t = (basis_at_unique * transform) * shrink.asDiagonal();
        se = t.rowwise().norm();
        break;
      }
    }
    return se;
  }
};

WeightedSmoother::WeightedSmoother(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& weights,
                                   double target_df)
    : impl_(std::make_unique<Impl>()) {
  if (x.size() != weights.size()) {
    throw Error(ErrorCode::length_mismatch, "smoother: x and weights differ in length");
  }
  if (!x.allFinite() || !weights.allFinite()) {
    throw Error(ErrorCode::non_finite_input, "smoother input contains non-finite values");
  }
  Impl& s = *impl_;
  s.w = weights;
  const Eigen::Index n = x.size();

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return x[a] < x[b]; });
  s.group_of.assign(static_cast<std::size_t>(n), 0);
  std::vector<double> sw;
  for (int idx : order) {
    if (s.ux.empty() || x[idx] != s.ux.back()) {
      s.ux.push_back(x[idx]);
      sw.push_back(0.0);
    }
    s.group_of[static_cast<std::size_t>(idx)] = static_cast<int>(s.ux.size()) - 1;
    sw.back() += weights[idx];
  }
  s.sw = Eigen::Map<Vector>(sw.data(), static_cast<Eigen::Index>(sw.size()));
  s.total_weight = s.sw.sum();
  if (!(s.total_weight > 0.0)) {
    throw Error(ErrorCode::empty_input, "smoother weights are all zero");
  }
  const auto nu = static_cast<Eigen::Index>(s.ux.size());
  s.last_unique = Vector::Zero(nu);
  const Eigen::Map<const Vector> uxv(s.ux.data(), nu);

  if (nu == 1) {
    s.mode = Impl::Mode::constant;
    s.fallback = true;
    s.trace = 1.0;
    s.lambda_norm = std::numeric_limits<double>::infinity();
    return;
  }
  s.xbar = s.sw.dot(uxv) / s.total_weight;
  s.sxx = s.sw.dot((uxv.array() - s.xbar).square().matrix());
  if (target_df <= 2.0 + 1e-9 || nu < 4) {
    s.mode = Impl::Mode::linear;
    s.fallback = nu < 4 && target_df > 2.0 + 1e-9;
    s.trace = 2.0;
    s.lambda_norm = std::numeric_limits<double>::infinity();
    return;
  }

  s.mode = Impl::Mode::spline;
  const int K = static_cast<int>(std::min<Eigen::Index>(nu + 2, kMaxSmootherBasis));
  const BSplineBasis basis(s.ux.front(), s.ux.back(), K, 4);
  s.basis_at_unique = eval_basis_matrix(basis, std::span<const double>(s.ux));
  Matrix R = s.basis_at_unique.transpose() * s.sw.asDiagonal() * s.basis_at_unique;
  const Matrix omega = curvature_penalty(basis);
  R.diagonal().array() += 1e-9 * R.trace() / K;
  const Eigen::LLT<Matrix> llt(R);
  const Matrix L = llt.matrixL();
  const Matrix a = L.triangularView<Eigen::Lower>().solve(omega);
  Matrix omega_t = L.triangularView<Eigen::Lower>().solve(a.transpose());
  omega_t = (0.5 * (omega_t + omega_t.transpose())).eval();
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(omega_t);
  const Vector d = eig.eigenvalues().cwiseMax(0.0);
  s.transform = L.transpose().triangularView<Eigen::Upper>().solve(eig.eigenvectors());

  // lambda is reported relative to tr(R) / tr(Omega) so that the search range
  // does not depend on the scale of x or of the weights
  const double scale = R.trace() / omega.trace();
  auto trace_at = [&](double log_lambda) {
    const double lam = std::pow(10.0, log_lambda) * scale;
    return (1.0 / (1.0 + lam * d.array())).sum();
  };
  double lo = kLogLambdaMin;
  double hi = kLogLambdaMax;
  double chosen = 0.0;
  if (trace_at(lo) <= target_df) {
    chosen = lo;
  } else if (trace_at(hi) >= target_df) {
    chosen = hi;
  } else {
    for (int it = 0; it < kBisectionSteps; ++it) {
      const double mid = 0.5 * (lo + hi);
      if (trace_at(mid) > target_df) {
        lo = mid;
      } else {
        hi = mid;
      }
    }
    chosen = 0.5 * (lo + hi);
  }
  s.lambda_norm = std::pow(10.0, chosen);
  s.shrink = (1.0 / (1.0 + s.lambda_norm * scale * d.array())).matrix();
  s.trace = s.shrink.sum();
}

WeightedSmoother::~WeightedSmoother() = default;
WeightedSmoother::WeightedSmoother(WeightedSmoother&&) noexcept = default;
WeightedSmoother& WeightedSmoother::operator=(WeightedSmoother&&) noexcept = default;

Vector WeightedSmoother::apply(const Eigen::Ref<const Vector>& target) {
  Impl& s = *impl_;
  if (target.size() != static_cast<Eigen::Index>(s.group_of.size())) {
    throw Error(ErrorCode::length_mismatch, "smoother target has wrong length");
  }
  if (!target.allFinite()) {
    throw Error(ErrorCode::non_finite_input, "smoother target contains non-finite values");
  }
  const auto nu = static_cast<Eigen::Index>(s.ux.size());
  Vector swt = Vector::Zero(nu);
  for (std::size_t i = 0; i < s.group_of.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    swt[s.group_of[i]] += s.w[ii] * target[ii];
  }
  const double mean = swt.sum() / s.total_weight;
  Vector fitted(nu);
  switch (s.mode) {
    case Impl::Mode::constant:
      fitted.setZero();
      break;
    case Impl::Mode::linear: {
      double slope = 0.0;
      if (s.sxx > 0.0) {
        for (Eigen::Index u = 0; u < nu; ++u) slope += (s.ux[static_cast<std::size_t>(u)] - s.xbar) * swt[u];
        slope /= s.sxx;
      }
      for (Eigen::Index u = 0; u < nu; ++u) fitted[u] = slope * (s.ux[static_cast<std::size_t>(u)] - s.xbar);
      break;
    }
    case Impl::Mode::spline: {
      const Vector rhs = s.basis_at_unique.transpose() * swt;
      const Vector beta = s.transform * (s.shrink.asDiagonal() * (s.transform.transpose() * rhs));
      fitted = s.basis_at_unique * beta;
      fitted.array() -= s.sw.dot(fitted) / s.total_weight;
      break;
    }
  }
  s.last_unique = fitted;
  s.last_mean = mean;
  return expand(fitted);
}

Vector WeightedSmoother::expand(const Eigen::Ref<const Vector>& unique_level) const {
  const Impl& s = *impl_;
  Vector out(static_cast<Eigen::Index>(s.group_of.size()));
  for (std::size_t i = 0; i < s.group_of.size(); ++i) {
    out[static_cast<Eigen::Index>(i)] = unique_level[s.group_of[i]];
  }
  return out;
}

const Vector& WeightedSmoother::unique_values() const { return impl_->last_unique; }
double WeightedSmoother::df() const { return impl_->trace; }
double WeightedSmoother::lambda() const { return impl_->lambda_norm; }
bool WeightedSmoother::linear_fallback() const { return impl_->fallback; }

SmoothComponent WeightedSmoother::component(int feature_index) const {
  return component(feature_index, impl_->last_unique);
}

SmoothComponent WeightedSmoother::component(int feature_index, const Vector& unique_level) const {
  const Impl& s = *impl_;
  SmoothComponent c;
  c.feature_index = feature_index;
  c.design_x = s.ux;
  c.fitted_values.assign(unique_level.data(), unique_level.data() + unique_level.size());
  const Vector se = s.se_unique();
  c.se_values.assign(se.data(), se.data() + se.size());
  c.lambda = s.lambda_norm;
  c.df = s.trace;
  c.removed_mean = s.last_mean;
  c.linear_fallback = s.fallback;
  return c;
}

SmoothComponent smooth_weighted(const Eigen::Ref<const Vector>& x, const Eigen::Ref<const Vector>& target,
                                const Eigen::Ref<const Vector>& weights, double target_df) {
  if (x.size() != target.size()) {
    throw Error(ErrorCode::length_mismatch, "smooth_weighted: x and target differ in length");
  }
  WeightedSmoother smoother(x, weights, target_df);
  smoother.apply(target);
  SmoothComponent c = smoother.component(0);
  c.target_df = target_df;
  return c;
}

// ---------------------------------------------------------------------------
// Additive fits

double AdditiveFit::predict(const Vector& row) const {
  double eta = alpha;
  for (const auto& c : components) eta += c.eval(row[c.feature_index]);
  return eta;
}

Vector AdditiveFit::predict(const Matrix& X) const {
  if (X.cols() != num_features) {
    throw Error(ErrorCode::shape_mismatch, "additive fit expects " + std::to_string(num_features) +
                                               " columns, got " + std::to_string(X.cols()));
  }
  Vector eta = Vector::Constant(X.rows(), alpha);
  for (const auto& c : components) {
    for (Eigen::Index i = 0; i < X.rows(); ++i) eta[i] += c.eval(X(i, c.feature_index));
  }
  return eta;
}

std::vector<int> AdditiveFit::kept_features() const {
  std::vector<int> out;
  for (const auto& c : components) out.push_back(c.feature_index);
  return out;
}

namespace {

struct BackfitState {
  Eigen::Index n = 0;
  double alpha = 0.0;
  std::vector<int> features;
  std::vector<double> target_dfs;
  std::vector<WeightedSmoother> smoothers;
  std::vector<Vector> unique_values;  // per component, at its design points
  std::vector<Vector> train_values;   // per component, at training points
  int sweeps = 0;
  bool converged = false;

  Vector eta() const {
    Vector out = Vector::Constant(n, alpha);
    for (const auto& f : train_values) out += f;
    return out;
  }
};

void check_dfs(const Matrix& X, const std::vector<double>& dfs) {
  if (static_cast<Eigen::Index>(dfs.size()) != X.cols()) {
    throw Error(ErrorCode::shape_mismatch, "need one df per feature: " + std::to_string(dfs.size()) + " vs " +
                                               std::to_string(X.cols()));
  }
  if (!X.allFinite()) {
    throw Error(ErrorCode::non_finite_input, "design matrix contains non-finite values");
  }
}

// Runs backfitting sweeps; `state` may carry warm-start components.
void run_backfit(const Matrix& X, const Vector& z, const Vector& w, BackfitState& state, const BackfitOptions& opts) {
  const Eigen::Index n = X.rows();
  state.alpha = w.dot(z) / w.sum();
  const std::size_t p = state.features.size();
  if (state.smoothers.size() != p) {
    state.smoothers.clear();
    for (std::size_t k = 0; k < p; ++k) {
      state.smoothers.emplace_back(X.col(state.features[k]), w, state.target_dfs[k]);
    }
  }
  if (state.train_values.size() != p) {
    state.train_values.assign(p, Vector::Zero(n));
    state.unique_values.clear();
    for (std::size_t k = 0; k < p; ++k) state.unique_values.push_back(Vector::Zero(state.smoothers[k].unique_values().size()));
  }
  Vector total = Vector::Zero(n);
  for (const auto& f : state.train_values) total += f;

  state.converged = p == 0;
  state.sweeps = 0;
  for (int sweep = 0; sweep < opts.max_sweeps && !state.converged; ++sweep) {
    double max_change = 0.0;
    for (std::size_t k = 0; k < p; ++k) {
      const Vector partial = z.array() - state.alpha - (total - state.train_values[k]).array();
      Vector updated = state.smoothers[k].apply(partial);
      max_change = std::max(max_change, (updated - state.train_values[k]).lpNorm<Eigen::Infinity>());
      total += updated - state.train_values[k];
      state.train_values[k] = std::move(updated);
      state.unique_values[k] = state.smoothers[k].unique_values();
    }
    state.sweeps = sweep + 1;
    if (max_change < opts.tol) state.converged = true;
  }
}

AdditiveFit assemble(const BackfitState& state, int num_features) {
  AdditiveFit fit;
  fit.alpha = state.alpha;
  fit.num_features = num_features;
  fit.sweeps = state.sweeps;
  fit.effective_df = 1.0;
  for (std::size_t k = 0; k < state.features.size(); ++k) {
    SmoothComponent c = state.smoothers[k].component(state.features[k], state.unique_values[k]);
    c.target_df = state.target_dfs[k];
    fit.effective_df += c.df - 1.0;
    fit.components.push_back(std::move(c));
  }
  return fit;
}

BackfitState make_state(const std::vector<double>& dfs, Eigen::Index n) {
  BackfitState state;
  state.n = n;
  for (std::size_t j = 0; j < dfs.size(); ++j) {
    if (dfs[j] > kOmitFeature) {
      state.features.push_back(static_cast<int>(j));
      state.target_dfs.push_back(dfs[j]);
    }
  }
  return state;
}

}  // namespace

AdditiveFit backfit(const Matrix& X, const Vector& z, const Vector& weights, const std::vector<double>& dfs,
                    const BackfitOptions& opts) {
  check_dfs(X, dfs);
  if (z.size() != X.rows() || weights.size() != X.rows()) {
    throw Error(ErrorCode::shape_mismatch, "backfit: response/weights length must match design rows");
  }
  if ((weights.array() < 0.0).any()) {
    throw Error(ErrorCode::invalid_range, "backfit: weights must be nonnegative");
  }
  BackfitState state = make_state(dfs, X.rows());
  run_backfit(X, z, weights, state, opts);
  AdditiveFit fit = assemble(state, static_cast<int>(X.cols()));
  fit.converged = state.converged;
  const Vector resid = z - state.eta();
  fit.deviance = resid.dot(weights.asDiagonal() * resid);
  return fit;
}

AdditiveFit local_scoring(const Matrix& X, const Vector& y, const std::vector<double>& dfs,
                          const LocalScoringOptions& opts) {
  check_dfs(X, dfs);
  if (y.size() != X.rows()) {
    throw Error(ErrorCode::shape_mismatch, "local_scoring: y length must match design rows");
  }
  require_two_classes(y);
  const Eigen::Index n = X.rows();
  const double ybar = y.mean();

  BackfitState state = make_state(dfs, X.rows());
  state.alpha = std::log(ybar / (1.0 - ybar));
  Vector eta = Vector::Constant(n, state.alpha);
  double dev = bernoulli_deviance_eta(y, eta);

  AdditiveFit result;
  result.deviance_trace.push_back(dev);
  bool converged = false;
  bool separation = false;
  int outer = 0;
  for (; outer < opts.max_outer; ++outer) {
    const Vector p = sigmoid(eta);
    const Vector w = (p.array() * (1.0 - p.array())).max(kWeightFloor).matrix();
    const Vector z = eta + ((y - p).array() / w.array()).matrix();

    BackfitState next = make_state(dfs, X.rows());
    next.train_values = state.train_values;
    next.unique_values = state.unique_values;
    run_backfit(X, z, w, next, opts.backfit);
    Vector next_eta = next.eta();
    double next_dev = bernoulli_deviance_eta(y, next_eta);

    // step-halving towards the previous iterate
    const bool has_previous = !state.train_values.empty();
    for (int h = 0; h < opts.max_halvings && !(next_dev <= dev); ++h) {
      next.alpha = 0.5 * (next.alpha + state.alpha);
      for (std::size_t k = 0; k < next.train_values.size(); ++k) {
        if (has_previous) {
          next.train_values[k] = 0.5 * (next.train_values[k] + state.train_values[k]);
          next.unique_values[k] = 0.5 * (next.unique_values[k] + state.unique_values[k]);
        } else {
          next.train_values[k] *= 0.5;
          next.unique_values[k] *= 0.5;
        }
      }
      next_eta = next.eta();
      next_dev = bernoulli_deviance_eta(y, next_eta);
    }
    if (!(next_dev <= dev)) {
      if (!has_previous) {
        // keep the smoothers for assembly, with every component still at zero
        state = std::move(next);
        for (auto& v : state.train_values) v.setZero();
        for (auto& v : state.unique_values) v.setZero();
        state.alpha = std::log(ybar / (1.0 - ybar));
      }
      break;
    }
    const double change = std::abs(dev - next_dev) / (std::abs(next_dev) + 0.1);
    state = std::move(next);
    eta = std::move(next_eta);
    dev = next_dev;
    result.deviance_trace.push_back(dev);
    if (dev < 1e-6) {
      separation = true;
      ++outer;
      break;
    }
    if (change < opts.tol) {
      converged = true;
      ++outer;
      break;
    }
  }

  AdditiveFit fit = assemble(state, static_cast<int>(X.cols()));
  fit.deviance_trace = std::move(result.deviance_trace);
  fit.deviance = dev;
  fit.converged = converged;
  fit.separation = separation;
  fit.outer_iterations = outer;
  return fit;
}

AdditiveFit stepwise_components(const Matrix& X, const Vector& y, const StepwiseOptions& opts) {
  const auto p = static_cast<std::size_t>(X.cols());
  std::vector<double> dfs(p, opts.spline_df);
  const std::vector<double> options = {kOmitFeature, 2.0, opts.spline_df};
  auto score = [&](const AdditiveFit& f) { return f.deviance + 2.0 * opts.df_scale * f.effective_df; };

  for (std::size_t j = 0; j < p; ++j) {
    double best_aic = std::numeric_limits<double>::infinity();
    double best_option = dfs[j];
    for (double option : options) {
      std::vector<double> trial = dfs;
      trial[j] = option;
      const double aic = score(local_scoring(X, y, trial, opts.scoring));
      if (aic < best_aic - 1e-9) {
        best_aic = aic;
        best_option = option;
      }
    }
    dfs[j] = best_option;
  }
  return local_scoring(X, y, dfs, opts.scoring);
}

std::vector<ComponentCurve> component_curves(const AdditiveFit& fit, int grid_size) {
  std::vector<ComponentCurve> curves;
  const int g = std::max(grid_size, 2);
  for (const auto& c : fit.components) {
    ComponentCurve curve;
    curve.feature_index = c.feature_index;
    if (c.design_x.empty()) continue;
    const double lo = c.design_x.front();
    const double hi = c.design_x.back();
    for (int i = 0; i < g; ++i) {
      const double x = i == g - 1 ? hi : lo + (hi - lo) * static_cast<double>(i) / (g - 1);
      curve.x.push_back(x);
      curve.f.push_back(c.eval(x));
      curve.se.push_back(c.se(x));
    }
    curves.push_back(std::move(curve));
  }
  return curves;
}

}  // namespace addlogit
