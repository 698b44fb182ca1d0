#include <doctest.h>

#include <cmath>
#include <vector>

#include <nlohmann/json.hpp>

#include "fairsel/error.hpp"
#include "fairsel/metrics.hpp"
#include "fairsel/models.hpp"
#include "fairsel/random.hpp"
#include "oracles.hpp"

using namespace fairsel;

TEST_CASE("loss matches the term-by-term objective") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = static_cast<Eigen::Index>(5 + rng.below(40));
    const auto p = static_cast<Eigen::Index>(1 + rng.below(5));
    Eigen::MatrixXd X(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < p; ++j) X(i, j) = rng.uniform() * 4 - 2;
    const auto y = oracle::random_bits(rng, static_cast<std::size_t>(n));
    std::vector<double> w(static_cast<std::size_t>(n));
    for (auto& v : w) v = 0.1 + rng.uniform() * 2;
    Eigen::VectorXd coef(p);
    for (Eigen::Index j = 0; j < p; ++j) coef[j] = rng.uniform() * 2 - 1;
    const double l2 = rng.uniform() * 3;
    CHECK(logistic_loss(X, y, w, coef, 0.3, l2) ==
          doctest::Approx(oracle::logistic_objective(X, y, w, coef, 0.3, l2)).epsilon(1e-12));
  }
}

TEST_CASE("gradient matches central differences") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    const auto n = static_cast<Eigen::Index>(2 + rng.below(49));
    const auto p = static_cast<Eigen::Index>(1 + rng.below(5));
    Eigen::MatrixXd X(n, p);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < p; ++j) X(i, j) = rng.uniform() * 2 - 1;
    const auto y = oracle::random_bits(rng, static_cast<std::size_t>(n));
    std::vector<double> w(static_cast<std::size_t>(n));
    for (auto& v : w) v = rng.uniform() * 3;
    Eigen::VectorXd coef(p);
    for (Eigen::Index j = 0; j < p; ++j) coef[j] = rng.uniform() * 2 - 1;
    const double b0 = rng.uniform() - 0.5;
    const double l2 = rng.uniform();
    const auto g = logistic_gradient(X, y, w, coef, b0, l2);
    REQUIRE(g.size() == p + 1);
    const double h = 1e-5;
    for (Eigen::Index k = 0; k <= p; ++k) {
      Eigen::VectorXd cp = coef, cm = coef;
      double bp = b0, bm = b0;
      if (k < p) {
        cp[k] += h;
        cm[k] -= h;
      } else {
        bp += h;
        bm -= h;
      }
      const double fd = (logistic_loss(X, y, w, cp, bp, l2) - logistic_loss(X, y, w, cm, bm, l2)) / (2 * h);
      const double rel = std::abs(fd - g[k]) / std::max(1.0, std::abs(fd));
      CHECK(rel < 1e-4);
    }
  }
}

TEST_CASE("training converges to a stationary point") {
  Rng rng(23);
  const Eigen::Index n = 200;
  Eigen::MatrixXd X(n, 2);
  std::vector<int> y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X(i, 0) = rng.uniform();
    X(i, 1) = rng.uniform();
    y[static_cast<std::size_t>(i)] = rng.bernoulli(X(i, 0) > 0.5 ? 0.85 : 0.15) ? 1 : 0;
  }
  const std::vector<double> w(n, 1.0);
  const auto m = train_logistic(X, y, w);
  CHECK(m.converged);
  CHECK(logistic_gradient(X, y, w, m.coefficients, m.intercept, 1.0).norm() < 1e-6);
  CHECK(m.coefficients[0] > 1.0);
  for (std::size_t i = 1; i < m.loss_history.size(); ++i) CHECK(m.loss_history[i] <= m.loss_history[i - 1]);
  const auto labels = predict_labels(m, X);
  int correct = 0;
  for (Eigen::Index i = 0; i < n; ++i) correct += labels[static_cast<std::size_t>(i)] == y[static_cast<std::size_t>(i)];
  CHECK(correct > 140);

  const auto again = LogisticModel::from_json(m.to_json());
  CHECK(again.coefficients == m.coefficients);
  CHECK(again.intercept == m.intercept);

  CHECK_THROWS_AS(predict_labels(m, Eigen::MatrixXd::Zero(2, 3)), std::invalid_argument);
  CHECK_THROWS_AS(train_logistic(X, y, std::vector<double>(n, 0.0)), std::invalid_argument);
  CHECK_THROWS_AS(train_logistic(Eigen::MatrixXd(0, 2), std::vector<int>{}, {}), std::invalid_argument);
}

TEST_CASE("separable data stays finite under the penalty") {
  Eigen::MatrixXd X(6, 1);
  X << 0, 0.1, 0.2, 0.8, 0.9, 1.0;
  const std::vector<int> y{0, 0, 0, 1, 1, 1};
  const auto m = train_logistic(X, y, {});
  CHECK(std::isfinite(m.coefficients[0]));
  CHECK(predict_labels(m, X) == y);
}

TEST_CASE("weighted fit equals duplicated rows") {
  Eigen::MatrixXd X(4, 1), Xd(5, 1);
  X << 0, 1, 2, 3;
  Xd << 0, 1, 2, 3, 3;
  const std::vector<int> y{0, 1, 0, 1}, yd{0, 1, 0, 1, 1};
  const auto a = train_logistic(X, y, std::vector<double>{1, 1, 1, 2});
  const auto b = train_logistic(Xd, yd, {});
  CHECK(a.coefficients[0] == doctest::Approx(b.coefficients[0]).epsilon(1e-6));
  CHECK(a.intercept == doctest::Approx(b.intercept).epsilon(1e-6));
}

TEST_CASE("reweighing worked values") {
  // n = 6; privileged labels (1,1,0), unprivileged (1,0,0).
  const std::vector<int> y{1, 1, 0, 1, 0, 0};
  const std::vector<int> s{1, 1, 1, 0, 0, 0};
  const auto w = reweigh(y, s);
  CHECK(w.weight(1, 1) == doctest::Approx(0.75));
  CHECK(w.weight(1, 0) == doctest::Approx(1.5));
  CHECK(w.weight(0, 1) == doctest::Approx(1.5));
  CHECK(w.weight(0, 0) == doctest::Approx(0.75));

  // n = 8; privileged (1,1,1,0), unprivileged (1,0,0,0).
  const std::vector<int> y8{1, 1, 1, 0, 1, 0, 0, 0};
  const std::vector<int> s8{1, 1, 1, 1, 0, 0, 0, 0};
  const auto w8 = reweigh(y8, s8);
  CHECK(w8.weight(1, 1) == doctest::Approx(2.0 / 3.0));
  CHECK(w8.weight(1, 0) == doctest::Approx(2.0));
  const auto per_row = w8.apply(y8, s8);
  const auto d = dataset_rate_metrics(y8, s8, per_row);
  CHECK(std::abs(*d[1].value) < 1e-12);
  CHECK(std::abs(*d[2].value - 1.0) < 1e-12);

  CHECK_THROWS_AS(reweigh(std::vector<int>{1, 1, 0}, std::vector<int>{1, 0, 0}), DataError);
}

TEST_CASE("mitigators") {
  CHECK(make_mitigator("baseline")->name() == "baseline");
  CHECK(make_mitigator("rw")->name() == "reweighing");
  CHECK(make_mitigator("reweighing")->name() == "reweighing");
  CHECK_THROWS_AS(make_mitigator("adversarial"), std::invalid_argument);

  Eigen::MatrixXd X(6, 1);
  X << 0, 1, 2, 3, 4, 5;
  const std::vector<int> y{1, 1, 0, 1, 0, 0};
  const std::vector<int> s{1, 1, 1, 0, 0, 0};
  const TrainView view{X, y, s};
  const auto unit = make_mitigator("baseline")->pre_process(view);
  CHECK(unit == std::vector<double>(6, 1.0));
  const auto rw = make_mitigator("rw")->pre_process(view);
  CHECK(rw[0] == doctest::Approx(0.75));
  CHECK(rw[2] == doctest::Approx(1.5));
}
