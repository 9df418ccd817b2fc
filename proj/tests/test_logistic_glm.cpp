#include <doctest.h>

#include <cmath>
#include <numbers>

#include "addlogit/error.hpp"
#include "addlogit/logistic_glm.hpp"
#include "addlogit/roc_eval.hpp"
#include "test_support.hpp"

using namespace addlogit;
using addlogit::testing::as_span;

namespace {

double normal(CounterRng& rng) {
  const double u1 = 1.0 - rng.uniform();
  const double u2 = rng.uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

TEST_CASE("sigmoid values") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(std::abs(sigmoid(40.0) - 1.0) < 1e-12);
  CHECK(sigmoid(-2.1) == doctest::Approx(1.0 / (1.0 + std::exp(2.1))).epsilon(1e-14));
  CHECK(sigmoid(-2.1) == doctest::Approx(0.10909682119561293).epsilon(1e-12));
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(std::isfinite(sigmoid(-800.0)));
  for (double e : {-30.0, -3.0, -0.5, 0.7, 12.0}) CHECK(sigmoid(e) + sigmoid(-e) == doctest::Approx(1.0));
}

TEST_CASE("bernoulli deviance") {
  Eigen::Vector2d y(1.0, 0.0);
  CHECK(bernoulli_deviance(y, y) == 0.0);
  CHECK(bernoulli_deviance(y, Eigen::Vector2d(0.5, 0.5)) == doctest::Approx(4.0 * std::log(2.0)));
  CHECK(bernoulli_deviance(y, Eigen::Vector2d(0.5, 0.5)) == doctest::Approx(2.77258872224));
  CHECK_THROWS_AS(bernoulli_deviance(y, Eigen::Vector3d(0.1, 0.2, 0.3)), Error);

  CounterRng rng(2);
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::VectorXd yy(6);
    Eigen::VectorXd eta(6);
    for (int i = 0; i < 6; ++i) {
      yy[i] = rng.uniform() < 0.5 ? 1.0 : 0.0;
      eta[i] = rng.uniform(-6.0, 6.0);
    }
    const double d = bernoulli_deviance(yy, sigmoid(eta));
    CHECK(d >= 0.0);
    CHECK(d == doctest::Approx(addlogit::testing::direct_deviance(yy, eta)).epsilon(1e-10));
    CHECK(bernoulli_deviance_eta(yy, eta) == doctest::Approx(d).epsilon(1e-10));
  }
}

TEST_CASE("intercept-only fit is the logit of the mean") {
  Eigen::VectorXd y(8);
  y << 1, 1, 1, 0, 1, 1, 0, 1;
  const Matrix X(8, 0);
  const GlmFit fit = fit_glm_irls(X, y);
  CHECK(fit.converged);
  CHECK(fit.coefficients[0] == doctest::Approx(std::log(3.0)).epsilon(1e-9));
  CHECK(fit.aic == doctest::Approx(fit.deviance + 2.0));
}

TEST_CASE("one-class input is rejected") {
  const Matrix X = Matrix::Random(10, 2);
  try {
    fit_glm_irls(X, Vector::Ones(10));
    FAIL("expected one-class-input");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::one_class_input);
  }
}

TEST_CASE("IRLS matches a brute-force lattice search") {
  CounterRng rng(21);
  const Eigen::Index n = 60;
  Matrix X(n, 1);
  Vector eta(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = rng.uniform(-2.0, 2.0);
    eta[i] = 0.4 + 1.2 * X(i, 0);
  }
  const Vector y = addlogit::testing::draw_labels(rng, eta);
  const GlmFit fit = fit_glm_irls(X, y);
  REQUIRE(fit.converged);

  double best = -std::numeric_limits<double>::infinity();
  double best_a = 0.0;
  double best_b = 0.0;
  for (int ia = 0; ia <= 1000; ++ia) {
    const double a = -5.0 + 0.01 * ia;
    for (int ib = 0; ib <= 1000; ++ib) {
      const double b = -5.0 + 0.01 * ib;
      double ll = 0.0;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double e = a + b * X(i, 0);
        ll += y[i] * e - std::log1p(std::exp(e));
      }
      if (ll > best) {
        best = ll;
        best_a = a;
        best_b = b;
      }
    }
  }
  CHECK(std::abs(fit.coefficients[0] - best_a) <= 0.01 + 1e-12);
  CHECK(std::abs(fit.coefficients[1] - best_b) <= 0.01 + 1e-12);
}

TEST_CASE("coefficient recovery over seeds") {
  int hits = 0;
  double mean_intercept_score = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    CounterRng rng(CounterRng::stream_key(seed, 77));
    Matrix X(200, 1);
    Vector eta(200);
    for (int i = 0; i < 200; ++i) {
      X(i, 0) = normal(rng);
      eta[i] = 1.5 * X(i, 0);
    }
    const Vector y = addlogit::testing::draw_labels(rng, eta);
    const GlmFit fit = fit_glm_irls(X, y);
    if (std::abs(fit.coefficients[0]) <= 0.5 && std::abs(fit.coefficients[1] - 1.5) <= 0.5) ++hits;
    mean_intercept_score += predict_scores(fit, Matrix::Zero(1, 1))[0] / 100.0;
  }
  CHECK(hits >= 95);
  CHECK(std::abs(mean_intercept_score) < 0.1);
}

TEST_CASE("separated data is flagged") {
  Matrix X(10, 1);
  Vector y(10);
  for (int i = 0; i < 10; ++i) {
    X(i, 0) = i - 4.5;
    y[i] = i < 5 ? 0.0 : 1.0;
  }
  const GlmFit fit = fit_glm_irls(X, y);
  CHECK(fit.separation);
  CHECK_FALSE(fit.converged);
}

TEST_CASE("collinear design uses the ridge fallback") {
  CounterRng rng(4);
  Matrix X(40, 2);
  for (int i = 0; i < 40; ++i) {
    X(i, 0) = rng.uniform(-1.0, 1.0);
    X(i, 1) = X(i, 0);
  }
  const Vector y = addlogit::testing::draw_labels(rng, 2.0 * X.col(0));
  const GlmFit fit = fit_glm_irls(X, y);
  CHECK(fit.ridge_fallback);
  CHECK(fit.coefficients.allFinite());
}

TEST_CASE("score matches finite differences and vanishes at the optimum") {
  CounterRng rng(8);
  const Matrix X = addlogit::testing::uniform_matrix(rng, 80, 3);
  const Vector y = addlogit::testing::draw_labels(rng, X * Eigen::Vector3d(1.0, -2.0, 0.5));
  const GlmFit fit = fit_glm_irls(X, y);
  REQUIRE(fit.converged);
  CHECK(logistic_score(X, y, fit.coefficients).lpNorm<Eigen::Infinity>() < GlmOptions{}.tol);

  for (int rep = 0; rep < 20; ++rep) {
    Vector beta(4);
    for (int k = 0; k < 4; ++k) beta[k] = rng.uniform(-2.0, 2.0);
    const Vector g = logistic_score(X, y, beta);
    Vector fd(4);
    const double h = 1e-5;
    for (int k = 0; k < 4; ++k) {
      Vector up = beta;
      Vector dn = beta;
      up[k] += h;
      dn[k] -= h;
      fd[k] = (logistic_loglik(X, y, up) - logistic_loglik(X, y, dn)) / (2.0 * h);
    }
    CHECK((g - fd).norm() / g.norm() < 1e-5);
  }
}

TEST_CASE("deviance never increases across iterations") {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    CounterRng rng(seed);
    const Matrix X = addlogit::testing::uniform_matrix(rng, 50, 4, -3.0, 3.0);
    const Vector y = addlogit::testing::draw_labels(rng, X * Eigen::Vector4d(2.0, -1.0, 0.0, 3.0));
    try {
      const GlmFit fit = fit_glm_irls(X, y);
      for (std::size_t k = 1; k < fit.deviance_trace.size(); ++k) {
        CHECK(fit.deviance_trace[k] <= fit.deviance_trace[k - 1]);
      }
    } catch (const Error&) {
      // one-class draw
    }
  }
}

TEST_CASE("fits are bit-identical on repeat") {
  CounterRng rng(17);
  const Matrix X = addlogit::testing::uniform_matrix(rng, 70, 3);
  const Vector y = addlogit::testing::draw_labels(rng, X.col(0) - X.col(2));
  const GlmFit a = fit_glm_irls(X, y);
  const GlmFit b = fit_glm_irls(X, y);
  CHECK(a.coefficients == b.coefficients);
  CHECK(a.deviance == b.deviance);
}

TEST_CASE("prediction shapes and monotone invariance") {
  CounterRng rng(12);
  const Matrix X = addlogit::testing::uniform_matrix(rng, 100, 3);
  const Vector y = addlogit::testing::draw_labels(rng, 2.0 * X.col(1));
  GlmFit fit = fit_glm_irls(X, y);
  const Vector s = predict_scores(fit, X);
  CHECK(auc(as_span(s), as_span(y)) == auc(as_span(Vector(sigmoid(s))), as_span(y)));
  CHECK_THROWS_AS(predict_scores(fit, Matrix::Zero(5, 2)), Error);

  fit.coefficients.setZero();
  CHECK(predict_scores(fit, X).cwiseAbs().maxCoeff() == 0.0);

  const GlmFit sub = fit_glm_subset(X, y, {1});
  CHECK((predict_scores(sub, X) - predict_scores(sub, Matrix(X.col(1)))).norm() < 1e-14);
}

TEST_CASE("backward elimination keeps the active feature") {
  int kept_active = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    CounterRng rng(CounterRng::stream_key(seed, 5));
    const Matrix X = addlogit::testing::uniform_matrix(rng, 100, 5);
    const Vector eta = (3.0 * (-0.7 + X.col(0).array())).matrix();
    const Vector y = addlogit::testing::draw_labels(rng, eta);
    GlmOptions opts;
    opts.df_scale = 1.4;
    const GlmFit fit = backward_eliminate(X, y, opts);
    if (std::find(fit.kept_features.begin(), fit.kept_features.end(), 0) != fit.kept_features.end()) ++kept_active;
  }
  CHECK(kept_active >= 90);
}

TEST_CASE("backward elimination on pure noise ends intercept-only in most seeds") {
  int empty = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    CounterRng rng(CounterRng::stream_key(seed, 6));
    const Matrix X = addlogit::testing::uniform_matrix(rng, 500, 5);
    const Vector y = addlogit::testing::draw_labels(rng, Vector::Zero(500));
    GlmOptions opts;
    opts.df_scale = 1.4;
    if (backward_eliminate(X, y, opts).kept_features.empty()) ++empty;
  }
  CHECK(empty > 50);
}

TEST_CASE("backward elimination leaves a minimal model unchanged") {
  CounterRng rng(31);
  const Matrix X = addlogit::testing::uniform_matrix(rng, 200, 1);
  const Vector y = addlogit::testing::draw_labels(rng, 4.0 * X.col(0));
  const GlmFit full = fit_glm_irls(X, y);
  const GlmFit sel = backward_eliminate(X, y);
  CHECK(sel.kept_features == std::vector<int>{0});
  CHECK(sel.coefficients == full.coefficients);
}
