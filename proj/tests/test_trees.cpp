#include <cmath>
#include <limits>

#include "doctest.h"
#include "glassbox/error.hpp"
#include "glassbox/tree.hpp"
#include "support.hpp"

using namespace glassbox;

namespace {

Matrix column(std::initializer_list<double> v) {
  Matrix m(0, 1);
  for (double x : v) m.append_row(std::span<const double>(&x, 1));
  return m;
}

void check_cover(const Tree& t, double tol) {
  for (const auto& n : t.nodes()) {
    if (n.is_leaf()) continue;
    const double sum = t.node(n.left).cover + t.node(n.right).cover;
    if (tol == 0.0) {
      CHECK(n.cover == sum);
    } else {
      CHECK(n.cover == doctest::Approx(sum).epsilon(tol));
    }
  }
}

}  // namespace

TEST_CASE("constant targets give a single leaf") {
  Rng rng(1);
  const auto x = testsupport::random_matrix(rng, 12, 3);
  std::vector<double> t(12, 3.0);
  const auto tree = fit_regression_tree(x, t, {});
  REQUIRE(tree.size() == 1);
  CHECK(tree.node(0).value == 3.0);
  CHECK(tree.node(0).cover == 12.0);
  CHECK(tree.predict(std::vector<double>{9.0, -1.0, 0.5}) == 3.0);
}

TEST_CASE("perfect stump on two points") {
  const auto x = column({0.0, 1.0});
  std::vector<double> t{0.0, 1.0};
  TreeParams p;
  p.max_depth = 1;
  const auto tree = fit_regression_tree(x, t, p);
  REQUIRE(tree.size() == 3);
  const auto& root = tree.node(0);
  CHECK(root.threshold > 0.0);
  CHECK(root.threshold < 1.0);
  CHECK(tree.node(root.left).value == 0.0);
  CHECK(tree.node(root.right).value == 1.0);
  CHECK(tree.predict(std::vector<double>{0.0}) == 0.0);
  // strict less-than goes left, so the threshold itself goes right
  CHECK(tree.predict(std::vector<double>{root.threshold}) == 1.0);
  CHECK(tree.predict(std::vector<double>{std::nextafter(root.threshold, 0.0)}) == 0.0);
}

TEST_CASE("Newton leaves follow -G/(H+lambda)") {
  const auto x = column({0.0, 1.0});
  std::vector<double> g{-0.5, 0.5}, h{0.25, 0.25};
  TreeParams p;
  p.max_depth = 1;
  p.reg_lambda = 1.0;
  const auto tree = fit_newton_tree(x, g, h, p);
  REQUIRE(tree.size() == 3);
  // hand values: 0.5 / 1.25 and -0.5 / 1.25
  CHECK(tree.predict(std::vector<double>{0.0}) == doctest::Approx(0.4).epsilon(1e-15));
  CHECK(tree.predict(std::vector<double>{1.0}) == doctest::Approx(-0.4).epsilon(1e-15));
}

TEST_CASE("fit and predict errors") {
  Matrix empty(0, 2);
  std::vector<double> none;
  CHECK_THROWS_AS(fit_regression_tree(empty, none, {}), ConfigError);

  const auto x = column({0.0, 1.0});
  std::vector<double> bad{0.0, std::numeric_limits<double>::quiet_NaN()};
  CHECK_THROWS_AS(fit_regression_tree(x, bad, {}), ConfigError);

  std::vector<double> t{0.0, 1.0};
  const auto tree = fit_regression_tree(x, t, {});
  CHECK_THROWS_AS(tree.predict(std::vector<double>{std::numeric_limits<double>::infinity()}), ConfigError);
  CHECK_THROWS_AS(tree.predict(std::vector<double>{}), ConfigError);
}

TEST_CASE("cover is conserved at every internal node") {
  Rng rng(2);
  for (int trial = 0; trial < 30; ++trial) {
    const auto x = testsupport::random_matrix(rng, 60, 4);
    std::vector<double> t(60);
    for (auto& v : t) v = normal(rng, 0, 1);
    TreeParams p;
    p.max_depth = 5;
    check_cover(fit_regression_tree(x, t, p), 0.0);

    std::vector<double> w(60);
    for (auto& v : w) v = uniform01(rng) * 3.0;
    const auto wt = fit_regression_tree(x, t, p, w);
    check_cover(wt, 1e-12);
    double total = 0;
    for (double v : w) total += v;
    CHECK(wt.node(0).cover == doctest::Approx(total).epsilon(1e-12));
  }
}

TEST_CASE("unlimited depth memorizes distinct points") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto x = testsupport::random_matrix(rng, 80, 3);
    std::vector<double> t(80);
    for (auto& v : t) v = normal(rng, 0, 1);
    const auto tree = fit_regression_tree(x, t, {});
    for (std::size_t r = 0; r < 80; ++r) CHECK(tree.predict(x.row(r)) == t[r]);
  }
}

TEST_CASE("huge lambda drives Newton leaves to zero") {
  Rng rng(4);
  const auto x = testsupport::random_matrix(rng, 50, 3);
  std::vector<double> g(50), h(50);
  for (std::size_t i = 0; i < 50; ++i) {
    g[i] = normal(rng, 0, 1);
    h[i] = 0.05 + uniform01(rng) * 0.2;
  }
  TreeParams p;
  p.max_depth = 4;
  double prev = std::numeric_limits<double>::infinity();
  for (double lambda : {1.0, 1e3, 1e6, 1e12}) {
    p.reg_lambda = lambda;
    const auto tree = fit_newton_tree(x, g, h, p);
    double worst = 0;
    for (const auto& n : tree.nodes())
      if (n.is_leaf()) worst = std::max(worst, std::abs(n.value));
    CHECK(worst <= prev);
    prev = worst;
  }
  CHECK(prev < 1e-9);
}

TEST_CASE("strictly increasing transform of a feature keeps the partition") {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = testsupport::random_matrix(rng, 70, 3);
    std::vector<double> t(70);
    for (auto& v : t) v = normal(rng, 0, 1);
    Matrix fx = x;
    const std::size_t f = uniform_index(rng, 3);
    for (std::size_t r = 0; r < 70; ++r) fx(r, f) = std::exp(3.0 * x(r, f)) + x(r, f);
    TreeParams p;
    p.max_depth = 4;
    const auto a = fit_regression_tree(x, t, p);
    const auto b = fit_regression_tree(fx, t, p);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a.node(i).feature == b.node(i).feature);
      CHECK(a.node(i).left == b.node(i).left);
    }
    for (std::size_t r = 0; r < 70; ++r) CHECK(a.leaf_index(x.row(r)) == b.leaf_index(fx.row(r)));
  }
}

TEST_CASE("min_samples_leaf is respected") {
  Rng rng(6);
  const auto x = testsupport::random_matrix(rng, 100, 2);
  std::vector<double> t(100);
  for (auto& v : t) v = normal(rng, 0, 1);
  TreeParams p;
  p.min_samples_leaf = 7;
  const auto tree = fit_regression_tree(x, t, p);
  std::vector<int> hits(tree.size(), 0);
  for (std::size_t r = 0; r < 100; ++r) ++hits[tree.leaf_index(x.row(r))];
  for (std::size_t i = 0; i < tree.size(); ++i)
    if (tree.node(i).is_leaf()) CHECK(hits[i] >= 7);
}

TEST_CASE("invalid node arrays are rejected") {
  std::vector<TreeNode> nodes(1);
  nodes[0].feature = 0;
  nodes[0].left = 1;
  nodes[0].right = 5;
  CHECK_THROWS_AS(Tree{nodes}, ConfigError);
  CHECK_THROWS_AS(Tree{std::vector<TreeNode>{}}, ConfigError);
}
