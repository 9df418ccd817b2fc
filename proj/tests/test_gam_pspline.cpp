#include <doctest.h>

#include <cmath>

#include "addlogit/error.hpp"
#include "addlogit/gam_pspline.hpp"
#include "addlogit/roc_eval.hpp"
#include "addlogit/simgen.hpp"
#include "test_support.hpp"

using namespace addlogit;
using addlogit::testing::as_span;

namespace {

std::vector<Matrix> basis_matrices(const PsplineFit& fit, const Matrix& X) {
  std::vector<Matrix> out;
  for (std::size_t j = 0; j < fit.bases.size(); ++j) {
    out.push_back(eval_basis_matrix(fit.bases[j], X.col(static_cast<Eigen::Index>(j))));
  }
  return out;
}

struct Instance {
  std::vector<Vector> beta;
  double alpha = 0.0;
  std::vector<Matrix> bases;
  Vector y;
  std::vector<double> lambdas;
  PenaltyMatrix penalty;
};

Instance random_instance(CounterRng& rng, int n, int p, int K) {
  Instance in;
  in.alpha = rng.uniform(-1.0, 1.0);
  const BSplineBasis basis(-1.0, 1.0, K, 4);
  in.y.resize(n);
  for (int i = 0; i < n; ++i) in.y[i] = rng.uniform() < 0.4 ? 1.0 : 0.0;
  for (int j = 0; j < p; ++j) {
    Vector x(n);
    for (int i = 0; i < n; ++i) x[i] = rng.uniform(-1.0, 1.0);
    in.bases.push_back(eval_basis_matrix(basis, x));
    Vector b(K);
    for (int k = 0; k < K; ++k) b[k] = rng.uniform(-1.5, 1.5);
    in.beta.push_back(b);
    in.lambdas.push_back(rng.uniform(0.0, 3.0));
  }
  in.penalty = difference_penalty(K, 1);
  return in;
}

}  // namespace

TEST_CASE("penalized log-likelihood against a two-term oracle") {
  CounterRng rng(1);
  for (int rep = 0; rep < 20; ++rep) {
    const Instance in = random_instance(rng, 15, 3, 6);
    Vector eta = Vector::Constant(15, in.alpha);
    double pen = 0.0;
    for (std::size_t j = 0; j < 3; ++j) {
      eta += in.bases[j] * in.beta[j];
      for (int k = 0; k + 1 < 6; ++k) {
        const double d = in.beta[j][k + 1] - in.beta[j][k];
        pen += in.lambdas[j] * d * d;
      }
    }
    double ll = 0.0;
    for (int i = 0; i < 15; ++i) ll += in.y[i] * eta[i] - std::log1p(std::exp(eta[i]));
    const double got = penalized_loglik(in.beta, in.alpha, in.bases, in.y, in.lambdas, in.penalty);
    CHECK(std::abs(got - (ll - 0.5 * pen)) < 1e-12 * std::max(1.0, std::abs(got)));

    const std::vector<double> zero(3, 0.0);
    CHECK(penalized_loglik(in.beta, in.alpha, in.bases, in.y, zero, in.penalty) == doctest::Approx(ll).epsilon(1e-12));
    std::vector<Vector> flat(3, Vector::Constant(6, 0.7));
    double ll_flat = 0.0;
    for (int i = 0; i < 15; ++i) {
      const double e = in.alpha + 3 * 0.7;
      ll_flat += in.y[i] * e - std::log1p(std::exp(e));
    }
    CHECK(penalized_loglik(flat, in.alpha, in.bases, in.y, in.lambdas, in.penalty) ==
          doctest::Approx(ll_flat).epsilon(1e-12));
  }
  Instance bad = random_instance(rng, 10, 2, 5);
  bad.beta.pop_back();
  CHECK_THROWS_AS(penalized_loglik(bad.beta, bad.alpha, bad.bases, bad.y, bad.lambdas, bad.penalty), Error);
}

TEST_CASE("penalized gradient matches central differences") {
  CounterRng rng(2);
  for (int rep = 0; rep < 10; ++rep) {
    Instance in = random_instance(rng, 30, 2, 5);
    const Vector g = penalized_gradient(in.beta, in.alpha, in.bases, in.y, in.lambdas, in.penalty);
    Vector fd(g.size());
    const double h = 1e-5;
    auto f = [&](const std::vector<Vector>& b, double a) {
      return penalized_loglik(b, a, in.bases, in.y, in.lambdas, in.penalty);
    };
    fd[0] = (f(in.beta, in.alpha + h) - f(in.beta, in.alpha - h)) / (2.0 * h);
    for (std::size_t j = 0; j < 2; ++j) {
      for (int k = 0; k < 5; ++k) {
        auto up = in.beta;
        auto dn = in.beta;
        up[j][k] += h;
        dn[j][k] -= h;
        fd[1 + static_cast<Eigen::Index>(j) * 5 + k] = (f(up, in.alpha) - f(dn, in.alpha)) / (2.0 * h);
      }
    }
    CHECK((g - fd).norm() / g.norm() < 1e-5);
  }
}

TEST_CASE("analytic and numeric gradients vanish at the fitted optimum") {
  GeneratorSpec spec;
  spec.seed = 3;
  const Dataset d = gen_dataset(spec);
  const PsplineFit fit = fit_pspline(d.X, d.y, std::vector<double>(5, 2.0));
  REQUIRE(fit.converged);
  const auto B = basis_matrices(fit, d.X);
  const Vector g = penalized_gradient(fit.beta, fit.alpha, B, d.y, fit.lambdas, fit.penalty);
  const double h = 1e-5;
  Vector fd(g.size());
  auto f = [&](const std::vector<Vector>& b, double a) {
    return penalized_loglik(b, a, B, d.y, fit.lambdas, fit.penalty);
  };
  fd[0] = (f(fit.beta, fit.alpha + h) - f(fit.beta, fit.alpha - h)) / (2.0 * h);
  for (std::size_t j = 0; j < fit.beta.size(); ++j) {
    for (Eigen::Index k = 0; k < fit.beta[j].size(); ++k) {
      auto up = fit.beta;
      auto dn = fit.beta;
      up[j][k] += h;
      dn[j][k] -= h;
      fd[1 + static_cast<Eigen::Index>(j) * 10 + k] = (f(up, fit.alpha) - f(dn, fit.alpha)) / (2.0 * h);
    }
  }
  // the gradient vanishes here, so compare both against the solver tolerance
  const double tol = PsplineOptions{}.tol;
  CHECK(g.cwiseAbs().maxCoeff() <= tol);
  CHECK(fd.cwiseAbs().maxCoeff() <= tol);
  CHECK((g - fd).cwiseAbs().maxCoeff() < 1e-7);
  CHECK(f(fit.beta, fit.alpha) == doctest::Approx(fit.penalized_loglik).epsilon(1e-10));
}

TEST_CASE("components sum to zero over the training data") {
  GeneratorSpec spec;
  spec.seed = 4;
  const Dataset d = gen_dataset(spec);
  const PsplineFit fit = fit_pspline(d.X, d.y, std::vector<double>(5, 1.0));
  for (int j = 0; j < 5; ++j) {
    double s = 0.0;
    for (Eigen::Index i = 0; i < d.rows(); ++i) s += fit.component(j, d.X(i, j));
    CHECK(std::abs(s) < 1e-8);
  }
  const Vector eta = fit.predict(d.X);
  for (Eigen::Index i = 0; i < 5; ++i) {
    double sum = fit.alpha;
    for (int j = 0; j < 5; ++j) sum += fit.component(j, d.X(i, j));
    CHECK(eta[i] == doctest::Approx(sum).epsilon(1e-12));
  }
  CHECK(fit.effective_df >= 1.0);
  CHECK(fit.effective_df <= 1.0 + 5 * 10);
}

TEST_CASE("penalized deviance never increases") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    GeneratorSpec spec;
    spec.seed = seed;
    const Dataset d = gen_dataset(spec);
    for (double lambda : {0.01, 1.0, 100.0}) {
      const PsplineFit fit = fit_pspline(d.X, d.y, std::vector<double>(5, lambda));
      for (std::size_t k = 1; k < fit.penalized_deviance_trace.size(); ++k) {
        CHECK(fit.penalized_deviance_trace[k] <= fit.penalized_deviance_trace[k - 1]);
      }
    }
  }
}

TEST_CASE("huge lambda shrinks every component to a constant") {
  CounterRng rng(5);
  const Matrix X = addlogit::testing::uniform_matrix(rng, 300, 3);
  const Vector y = addlogit::testing::draw_labels(rng, Vector::Zero(300));
  const PsplineFit fit = fit_pspline(X, y, std::vector<double>(3, 1e8));
  for (int j = 0; j < 3; ++j) {
    for (double x : {-1.0, -0.5, 0.0, 0.5, 1.0}) CHECK(std::abs(fit.component(j, x)) < 1e-4);
  }
  CHECK(std::abs(fit.alpha - std::log(y.mean() / (1.0 - y.mean()))) < 1e-4);
  const Matrix Xt = addlogit::testing::uniform_matrix(rng, 2000, 3);
  const Vector yt = addlogit::testing::draw_labels(rng, Vector::Zero(2000));
  CHECK(std::abs(auc(as_span(fit.predict(Xt)), as_span(yt)) - 0.5) < 0.05);
}

TEST_CASE("unpenalized indicator basis reproduces the expanded logistic regression") {
  CounterRng rng(6);
  const Matrix X = addlogit::testing::uniform_matrix(rng, 400, 2);
  const Vector y = addlogit::testing::draw_labels(rng, (X.col(0).array().square() * 2.0 - X.col(1).array()).matrix());
  PsplineOptions opts;
  opts.num_basis = 4;
  opts.order = 1;
  const PsplineFit fit = fit_pspline(X, y, {0.0, 0.0}, opts);
  REQUIRE(fit.converged);

  // indicator expansion with the first cell of each feature as reference
  Matrix E(400, 6);
  for (int j = 0; j < 2; ++j) {
    const Matrix B = eval_basis_matrix(fit.bases[static_cast<std::size_t>(j)], X.col(j));
    E.middleCols(3 * j, 3) = B.rightCols(3);
  }
  const GlmFit glm = fit_glm_irls(E, y);
  REQUIRE(glm.converged);
  CHECK((fit.predict(X) - predict_scores(glm, E)).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("pspline beats the linear model on Set 1") {
  double gam = 0.0;
  double lin = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    GeneratorSpec train;
    train.seed = seed;
    GeneratorSpec test = train;
    test.stream = 1;
    test.n = 1000;
    const Dataset tr = gen_dataset(train);
    const Dataset te = gen_dataset(test);
    gam += auc(as_span(fit_pspline(tr.X, tr.y, std::vector<double>(5, 1.0)).predict(te.X)), as_span(te.y));
    lin += auc(as_span(predict_scores(fit_glm_irls(tr.X, tr.y), te.X)), as_span(te.y));
  }
  CHECK(gam > lin);
}

TEST_CASE("single-point grid equals a direct fit") {
  GeneratorSpec spec;
  spec.seed = 7;
  const Dataset d = gen_dataset(spec);
  const PsplineFit a = select_lambda_aic(d.X, d.y, {3.0});
  const PsplineFit b = fit_pspline(d.X, d.y, std::vector<double>(5, 3.0));
  CHECK(a.alpha == b.alpha);
  for (std::size_t j = 0; j < 5; ++j) CHECK(a.beta[j] == b.beta[j]);
  REQUIRE(a.selection.size() == 1);
  CHECK(a.selection[0].aic == b.aic);
  CHECK_THROWS_AS(select_lambda_aic(d.X, d.y, {}), Error);
}

TEST_CASE("AIC selection reacts to signal") {
  const std::vector<double> grid = {0.01, 1.0, 100.0};
  int not_largest = 0;
  int largest_on_noise = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    CounterRng rng(CounterRng::stream_key(seed, 61));
    const Matrix X = addlogit::testing::uniform_matrix(rng, 200, 1);
    const Vector eta = X.col(0).array().unaryExpr([](double v) { return 3.0 * std::sin(4.0 * v); }).matrix();
    const Vector y = addlogit::testing::draw_labels(rng, eta);
    if (select_lambda_aic(X, y, grid).lambdas[0] != 100.0) ++not_largest;

    const Matrix Xn = addlogit::testing::uniform_matrix(rng, 200, 1);
    const Vector yn = addlogit::testing::draw_labels(rng, Vector::Zero(200));
    if (select_lambda_aic(Xn, yn, grid).lambdas[0] == 100.0) ++largest_on_noise;
  }
  CHECK(not_largest >= 90);
  CHECK(largest_on_noise > 50);
}

TEST_CASE("AIC-selected fit is not degenerate") {
  double selected = 0.0;
  double shrunk = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    GeneratorSpec train;
    train.seed = seed;
    GeneratorSpec test = train;
    test.stream = 1;
    test.n = 1000;
    const Dataset tr = gen_dataset(train);
    const Dataset te = gen_dataset(test);
    selected += auc(as_span(select_lambda_aic(tr.X, tr.y, default_lambda_grid()).predict(te.X)), as_span(te.y));
    shrunk += auc(as_span(fit_pspline(tr.X, tr.y, std::vector<double>(5, 1e8)).predict(te.X)), as_span(te.y));
  }
  CHECK(selected / 10.0 >= shrunk / 10.0 - 0.02);
}

TEST_CASE("default grid") {
  const auto grid = default_lambda_grid();
  REQUIRE(grid.size() == 13);
  CHECK(grid.front() == doctest::Approx(1e-4));
  CHECK(grid.back() == doctest::Approx(1e4));
}

TEST_CASE("fit_pspline input checks") {
  const Matrix X = Matrix::Random(20, 2);
  Vector y = Vector::Zero(20);
  y[0] = 1.0;
  y[1] = 1.0;
  CHECK_THROWS_AS(fit_pspline(X, y, {1.0}), Error);
  CHECK_THROWS_AS(fit_pspline(X, y, {1.0, -1.0}), Error);
  try {
    fit_pspline(X, Vector::Zero(20), {1.0, 1.0});
    FAIL("expected one-class-input");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::one_class_input);
  }
}
