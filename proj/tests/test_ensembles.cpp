#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "glassbox/ensemble.hpp"
#include "glassbox/error.hpp"
#include "glassbox/model_io.hpp"
#include "support.hpp"

using namespace glassbox;

namespace {

Matrix pair_x() {
  Matrix x(2, 1);
  x(0, 0) = 0.0;
  x(1, 0) = 1.0;
  return x;
}

double sigma(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace

TEST_CASE("one boosting round on two points matches the hand computation") {
  BoostingParams p;
  p.n_estimators = 1;
  p.max_depth = 1;
  p.learning_rate = 0.3;
  p.reg_lambda = 1.0;
  const std::vector<int> y{0, 1};
  const auto m = fit_gradient_boosting(pair_x(), y, p);
  REQUIRE(m.trees().size() == 1);
  CHECK(m.base_score() == 0.0);
  // g = [0.5, -0.5], h = [0.25, 0.25], leaves -0.5/1.25 and 0.5/1.25
  const auto& t = m.trees()[0];
  CHECK(std::abs(t.predict(std::vector<double>{0.0}) - (-0.4)) < 1e-12);
  CHECK(std::abs(t.predict(std::vector<double>{1.0}) - 0.4) < 1e-12);
  CHECK(std::abs(m.predict_raw(std::vector<double>{0.0}) - (-0.12)) < 1e-12);
  CHECK(std::abs(m.predict_proba(std::vector<double>{0.0}) - sigma(-0.12)) < 1e-12);
  CHECK(std::abs(m.predict_proba(std::vector<double>{1.0}) - sigma(0.12)) < 1e-12);
  CHECK(sigma(-0.12) == doctest::Approx(0.4700).epsilon(1e-4));
}

TEST_CASE("100 rounds on the two points follow the scalar recurrence") {
  // By symmetry the two scores stay at -z and z, with
  // z += eta * (1 - p) / (p (1 - p) + lambda), p = sigma(z).
  auto recurrence = [](double eta, double lambda, int rounds) {
    double z = 0.0;
    for (int r = 0; r < rounds; ++r) {
      const double p = sigma(z);
      z += eta * (1.0 - p) / (p * (1.0 - p) + lambda);
    }
    return z;
  };
  const std::vector<int> y{0, 1};
  for (double lambda : {1.0, 0.0}) {
    BoostingParams p;
    p.max_depth = 1;
    p.reg_lambda = lambda;
    const auto m = fit_gradient_boosting(pair_x(), y, p);
    const double z = recurrence(0.3, lambda, 100);
    CHECK(m.predict_raw(std::vector<double>{1.0}) == doctest::Approx(z).epsilon(1e-9));
    CHECK(m.predict_raw(std::vector<double>{0.0}) == doctest::Approx(-z).epsilon(1e-9));
  }
  // lambda = 1 damps the steps once p(1-p) is small: still short of 0.99
  BoostingParams p;
  p.max_depth = 1;
  CHECK(fit_gradient_boosting(pair_x(), y, p).predict_proba(std::vector<double>{1.0}) ==
        doctest::Approx(0.962).epsilon(1e-3));
  p.reg_lambda = 0.0;
  const auto m = fit_gradient_boosting(pair_x(), y, p);
  CHECK(m.predict_proba(std::vector<double>{0.0}) < 0.01);
  CHECK(m.predict_proba(std::vector<double>{1.0}) > 0.99);
}

TEST_CASE("training loss never increases over 100 rounds") {
  Rng rng(21);
  for (int ds = 0; ds < 5; ++ds) {
    const std::size_t n = 60 + 40 * static_cast<std::size_t>(ds);
    const std::size_t d = 2 + static_cast<std::size_t>(ds);
    const auto x = testsupport::random_matrix(rng, n, d);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double z = 3.0 * (x(i, 0) - 0.5) + normal(rng, 0, 1);
      y[i] = z > 0 ? 1 : 0;
    }
    std::vector<double> losses;
    const auto m = fit_gradient_boosting(x, y, {}, [&](std::size_t, double loss) { losses.push_back(loss); });
    REQUIRE(losses.size() == 100);
    std::vector<double> base(n, m.base_score());
    double prev = logistic_loss(base, y);
    for (double l : losses) {
      CHECK(l <= prev + 1e-12);
      prev = l;
    }
  }
}

TEST_CASE("base score is the log-odds of prevalence") {
  Rng rng(22);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 20 + uniform_index(rng, 100);
    const auto x = testsupport::random_matrix(rng, n, 3);
    const auto y = testsupport::random_labels(rng, n);
    BoostingParams p;
    p.n_estimators = 0;
    const auto m = fit_gradient_boosting(x, y, p);
    const double prevalence = std::accumulate(y.begin(), y.end(), 0.0) / static_cast<double>(n);
    CHECK(std::abs(sigmoid(m.base_score()) - prevalence) < 1e-12);
    CHECK(m.predict_proba(x.row(0)) == sigmoid(m.base_score()));
  }
  std::vector<int> balanced{0, 1, 0, 1};
  Rng r2(1);
  BoostingParams p;
  p.n_estimators = 0;
  const auto m = fit_gradient_boosting(testsupport::random_matrix(r2, 4, 2), balanced, p);
  CHECK(m.predict_proba(std::vector<double>{0.3, 0.7}) == 0.5);
}

TEST_CASE("single-class labels are rejected") {
  Rng rng(23);
  const auto x = testsupport::random_matrix(rng, 10, 2);
  std::vector<int> y(10, 1);
  CHECK_THROWS_AS(fit_gradient_boosting(x, y, {}), ConfigError);
  CHECK_THROWS_AS(fit_random_forest(x, y, {}), ConfigError);
}

TEST_CASE("boosting is invariant to training row order") {
  Rng rng(24);
  for (int trial = 0; trial < 5; ++trial) {
    const std::size_t n = 80;
    const auto x = testsupport::random_matrix(rng, n, 4);
    const auto y = testsupport::random_labels(rng, n);
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    shuffle(perm.begin(), perm.end(), rng);
    Matrix px(n, 4);
    std::vector<int> py(n);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t c = 0; c < 4; ++c) px(i, c) = x(perm[i], c);
      py[i] = y[perm[i]];
    }
    BoostingParams p;
    p.n_estimators = 30;
    const auto a = fit_gradient_boosting(x, y, p);
    const auto b = fit_gradient_boosting(px, py, p);
    const auto probe = testsupport::random_matrix(rng, 200, 4);
    for (std::size_t r = 0; r < probe.rows(); ++r)
      CHECK(a.predict_raw(probe.row(r)) == doctest::Approx(b.predict_raw(probe.row(r))).epsilon(1e-12));
  }
}

TEST_CASE("forest with one full tree fits a separable set") {
  Matrix x(4, 2);
  const double pts[4][2] = {{0, 0}, {0, 1}, {1, 0}, {1, 1}};
  for (int i = 0; i < 4; ++i) x(i, 0) = pts[i][0], x(i, 1) = pts[i][1];
  const std::vector<int> y{0, 0, 1, 1};
  ForestParams p;
  p.n_estimators = 1;
  p.bootstrap = false;
  p.max_features = {MaxFeatures::Kind::All, 0};
  const auto m = fit_random_forest(x, y, p);
  for (int i = 0; i < 4; ++i) CHECK((m.predict_proba(x.row(i)) > 0.5 ? 1 : 0) == y[i]);
}

TEST_CASE("forest on constant features predicts the class prior") {
  Matrix x(30, 3, 2.5);
  std::vector<int> y(30, 0);
  for (int i = 0; i < 10; ++i) y[i] = 1;
  ForestParams p;
  p.bootstrap = false;
  const auto m = fit_random_forest(x, y, p);
  CHECK(m.predict_proba(std::vector<double>{0.0, 100.0, -3.0}) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  // with bootstrap the prior holds on average
  p.bootstrap = true;
  p.seed = 4;
  const auto mb = fit_random_forest(x, y, p);
  CHECK(mb.predict_proba(std::vector<double>{0.0, 0.0, 0.0}) == doctest::Approx(1.0 / 3.0).epsilon(0.05));
}

TEST_CASE("forest probability is the mean tree vote and is seeded") {
  Rng rng(25);
  const auto x = testsupport::random_matrix(rng, 100, 5);
  const auto y = testsupport::random_labels(rng, 100);
  ForestParams p;
  p.n_estimators = 25;
  p.seed = 77;
  const auto a = fit_random_forest(x, y, p);
  const auto b = fit_random_forest(x, y, p);
  REQUIRE(a.trees().size() == 25);
  for (std::size_t t = 0; t < 25; ++t) CHECK(a.trees()[t] == b.trees()[t]);
  for (std::size_t r = 0; r < 20; ++r) {
    double votes = 0;
    for (const auto& t : a.trees()) votes += t.predict(x.row(r));
    CHECK(a.predict_proba(x.row(r)) == votes / 25.0);
    const double p1 = a.predict_proba(x.row(r));
    CHECK(p1 >= 0.0);
    CHECK(p1 <= 1.0);
  }
  p.seed = 78;
  const auto c = fit_random_forest(x, y, p);
  bool differs = false;
  for (std::size_t t = 0; t < 25; ++t) differs = differs || !(a.trees()[t] == c.trees()[t]);
  CHECK(differs);
}

TEST_CASE("predict errors") {
  ForestModel empty;
  CHECK_THROWS_AS(empty.predict_proba(std::vector<double>{}), ConfigError);
  Rng rng(26);
  const auto x = testsupport::random_matrix(rng, 20, 3);
  const auto y = testsupport::random_labels(rng, 20);
  const auto m = fit_gradient_boosting(x, y, {});
  CHECK_THROWS_AS(m.predict_proba(std::vector<double>{1.0, 2.0}), ConfigError);
  // duplicated row, identical output
  CHECK(m.predict_proba(x.row(3)) == m.predict_proba(std::vector<double>(x.row(3).begin(), x.row(3).end())));
}

TEST_CASE("model files round trip bit-exactly") {
  Rng rng(27);
  const auto x = testsupport::random_matrix(rng, 80, 4);
  const auto y = testsupport::random_labels(rng, 80);
  ForestParams fp;
  fp.n_estimators = 10;
  std::vector<Model> models{fit_random_forest(x, y, fp), fit_gradient_boosting(x, y, {})};
  for (const auto& model : models) {
    std::stringstream buf;
    write_model(buf, model);
    const auto back = read_model(buf);
    CHECK(model_kind_tag(back) == model_kind_tag(model));
    CHECK(predict_proba(back, x) == predict_proba(model, x));
  }
}

TEST_CASE("broken model files") {
  Rng rng(28);
  const auto x = testsupport::random_matrix(rng, 30, 2);
  const auto y = testsupport::random_labels(rng, 30);
  std::stringstream buf;
  write_model(buf, fit_gradient_boosting(x, y, {}));
  const auto text = buf.str();

  std::istringstream truncated(text.substr(0, text.size() / 2));
  CHECK_THROWS_AS(read_model(truncated), CorruptModelError);

  auto unknown = text;
  const auto at = unknown.find("\"boosted\"");
  REQUIRE(at != std::string::npos);
  unknown.replace(at, 9, "\"mystery\"");
  std::istringstream in(unknown);
  CHECK_THROWS_AS(read_model(in), ModelVersionError);

  std::istringstream other("{\"hello\": 1}");
  CHECK_THROWS_AS(read_model(other), CorruptModelError);
}
