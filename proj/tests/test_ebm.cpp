#include <cmath>
#include <numeric>
#include <sstream>

#include "doctest.h"
#include "glassbox/ebm.hpp"
#include "glassbox/ensemble.hpp"
#include "glassbox/error.hpp"
#include "glassbox/model_io.hpp"
#include "support.hpp"

using namespace glassbox;

namespace {

struct Data {
  Matrix x;
  std::vector<int> y;
};

double sigma(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// y ~ Bernoulli(sigma(f(x))), features uniform on [0, 1).
template <typename F>
Data simulate(Rng& rng, std::size_t n, std::size_t d, F f) {
  Data out{testsupport::random_matrix(rng, n, d), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) out.y[i] = uniform01(rng) < sigma(f(out.x.row(i))) ? 1 : 0;
  return out;
}

Data xor_data(Rng& rng, std::size_t n) {
  Data out{testsupport::random_matrix(rng, n, 3), std::vector<int>(n)};
  for (std::size_t i = 0; i < n; ++i) out.y[i] = ((out.x(i, 0) > 0.5) != (out.x(i, 1) > 0.5)) ? 1 : 0;
  return out;
}

double accuracy(const EbmModel& m, const Data& d) {
  std::size_t ok = 0;
  for (std::size_t i = 0; i < d.x.rows(); ++i) ok += ((m.predict_proba(d.x.row(i)) > 0.5 ? 1 : 0) == d.y[i]);
  return static_cast<double>(ok) / static_cast<double>(d.x.rows());
}

std::vector<std::string> names(std::size_t d) {
  std::vector<std::string> out;
  for (std::size_t j = 0; j < d; ++j) out.push_back("x" + std::to_string(j + 1));
  return out;
}

void check_invariants(const EbmModel& m, const Matrix& x) {
  for (const auto& t : m.mains()) {
    double acc = 0.0;
    for (std::size_t b = 0; b < t.scores.size(); ++b) acc += t.counts[b] * t.scores[b];
    CHECK(std::abs(acc) < 1e-9);
  }
  for (const auto& t : m.pairs()) {
    double acc = 0.0;
    for (std::size_t b = 0; b < t.scores.size(); ++b) acc += t.counts[b] * t.scores[b];
    CHECK(std::abs(acc) < 1e-9);
  }
  const auto n = names(x.cols());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto e = ebm_explain(m, x.row(i), n);
    double sum = e.intercept;
    for (const auto& t : e.terms) sum += t.value;
    CHECK(std::abs(sum - m.predict_raw(x.row(i))) <= 1e-12);
    CHECK(e.raw_score == m.predict_raw(x.row(i)));
  }
}

EbmParams fast_params() {
  EbmParams p;
  p.outer_rounds = 150;
  p.pair_rounds = 150;
  p.learning_rate = 0.03;
  return p;
}

}  // namespace

TEST_CASE("quantile bins") {
  std::vector<double> v{3, 1, 2, 2, 5};
  const auto b = BinEdges::quantile(v, 256);
  CHECK(b.cuts() == std::vector<double>{1.5, 2.5, 4.0});
  CHECK(b.bin_of(-100) == 0);
  CHECK(b.bin_of(1.5) == 1);
  CHECK(b.bin_of(100) == 3);

  Rng rng(31);
  std::vector<double> many(1000);
  for (auto& x : many) x = normal(rng, 0, 1);
  const auto q = BinEdges::quantile(many, 16);
  CHECK(q.bin_count() <= 16);
  CHECK(q.bin_count() >= 12);
  for (std::size_t i = 1; i < q.cuts().size(); ++i) CHECK(q.cuts()[i] > q.cuts()[i - 1]);
  std::vector<double> one(10, 4.0);
  CHECK(BinEdges::quantile(one, 16).bin_count() == 1);
  CHECK_THROWS_AS(BinEdges(std::vector<double>{1.0, 1.0}), ConfigError);
  CHECK_THROWS_AS(BinEdges::quantile(many, 1), ConfigError);
}

TEST_CASE("centering and exact additivity") {
  Rng rng(32);
  for (int trial = 0; trial < 4; ++trial) {
    auto d = simulate(rng, 300, 4, [](auto x) { return 2 * x[0] - 3 * x[1] * x[1] + std::sin(6 * x[2]); });
    const auto m = fit_ebm(d.x, d.y, fast_params());
    check_invariants(m, d.x);
    const auto mi = fit_ebm_with_interactions(d.x, d.y, fast_params());
    CHECK(mi.pairs().size() == 6);
    check_invariants(mi, d.x);
    const auto probe = testsupport::random_matrix(rng, 50, 4, -0.5, 1.5);
    check_invariants(mi, probe);
  }
}

TEST_CASE("training loss is non-increasing per outer round") {
  Rng rng(33);
  auto d = simulate(rng, 400, 3, [](auto x) { return 4 * (x[0] - 0.5) + std::cos(5 * x[1]); });
  std::vector<double> losses;
  EbmParams p;
  p.outer_rounds = 300;
  fit_ebm(d.x, d.y, p, [&](std::size_t, double l) { losses.push_back(l); });
  REQUIRE(losses.size() == 300);
  for (std::size_t r = 1; r < losses.size(); ++r) CHECK(losses[r] <= losses[r - 1] + 1e-12);
}

TEST_CASE("feature visiting order barely matters at a low learning rate") {
  Rng rng(34);
  auto d = simulate(rng, 500, 2, [](auto x) { return 3 * (x[0] - 0.5) - 2 * std::sin(4 * x[1]); });
  EbmParams a;  // learning rate 0.01, 500 rounds
  EbmParams b = a;
  b.feature_order = {1, 0};
  const auto ma = fit_ebm(d.x, d.y, a);
  const auto mb = fit_ebm(d.x, d.y, b);
  const auto probe = testsupport::random_matrix(rng, 400, 2);
  double worst = 0.0;
  for (std::size_t i = 0; i < d.x.rows(); ++i)
    worst = std::max(worst, std::abs(ma.predict_proba(d.x.row(i)) - mb.predict_proba(d.x.row(i))));
  for (std::size_t i = 0; i < probe.rows(); ++i)
    worst = std::max(worst, std::abs(ma.predict_proba(probe.row(i)) - mb.predict_proba(probe.row(i))));
  CHECK(worst < 1e-2);
}

TEST_CASE("a constant feature gets a zero term") {
  Rng rng(35);
  auto d = simulate(rng, 200, 2, [](auto x) { return 5 * (x[0] - 0.5); });
  for (std::size_t i = 0; i < 200; ++i) d.x(i, 1) = 7.0;
  const auto m = fit_ebm(d.x, d.y, fast_params());
  for (double s : m.mains()[1].scores) CHECK(s == 0.0);
  const auto g = ebm_global(m, names(2));
  CHECK(g.ranking.front().term == "x1");
  CHECK(g.ranking.back().importance == 0.0);
  for (const auto& pt : g.curves[1]) CHECK(pt.score == 0.0);
}

TEST_CASE("on one feature the EBM equals boosting with the same trees") {
  Rng rng(36);
  auto d = simulate(rng, 120, 1, [](auto x) { return 6 * (x[0] - 0.5); });
  EbmParams ep;
  ep.outer_rounds = 500;
  BoostingParams bp;
  bp.learning_rate = ep.learning_rate;
  bp.n_estimators = ep.outer_rounds;
  bp.max_depth = ep.max_depth;
  bp.reg_lambda = ep.reg_lambda;
  bp.min_samples_leaf = ep.min_samples_leaf;
  const auto em = fit_ebm(d.x, d.y, ep);
  const auto bm = fit_gradient_boosting(d.x, d.y, bp);
  for (std::size_t i = 0; i < d.x.rows(); ++i)
    CHECK(std::abs(em.predict_proba(d.x.row(i)) - bm.predict_proba(d.x.row(i))) < 1e-6);
}

TEST_CASE("learned shapes follow the generating functions") {
  Rng rng(37);
  auto a = [](double x) { return 2.0 * std::sin(5.0 * x); };
  auto b = [](double x) { return 3.0 * (x - 0.5) * (x - 0.5) * 4.0 - 1.0; };
  auto d = simulate(rng, 2000, 2, [&](auto x) { return a(x[0]) + b(x[1]); });
  const auto m = fit_ebm(d.x, d.y, {});
  std::vector<double> fa, ta, fb, tb;
  for (std::size_t i = 0; i < d.x.rows(); ++i) {
    fa.push_back(m.main_contribution(0, d.x.row(i)));
    ta.push_back(a(d.x(i, 0)));
    fb.push_back(m.main_contribution(1, d.x.row(i)));
    tb.push_back(b(d.x(i, 1)));
  }
  CHECK(testsupport::spearman(fa, ta) > 0.9);
  CHECK(testsupport::spearman(fb, tb) > 0.9);
}

TEST_CASE("a dominant feature ranks first and importances follow their feature") {
  Rng rng(38);
  auto d = simulate(rng, 400, 4, [](auto x) { return 6 * (x[2] - 0.5) + 0.5 * x[0]; });
  const auto p = fast_params();
  const auto m = fit_ebm(d.x, d.y, p);
  const auto g = ebm_global(m, names(4));
  CHECK(g.ranking.front().term == "x3");

  // permuting columns and the visiting order together gives the same model
  const std::vector<std::size_t> perm{3, 1, 0, 2};  // new column j holds old feature perm[j]
  Matrix px(d.x.rows(), 4);
  for (std::size_t i = 0; i < d.x.rows(); ++i)
    for (std::size_t j = 0; j < 4; ++j) px(i, j) = d.x(i, perm[j]);
  auto pp = p;
  pp.feature_order = {2, 1, 3, 0};  // visits old features 0, 1, 2, 3
  std::vector<std::string> pnames;
  for (auto j : perm) pnames.push_back(names(4)[j]);
  const auto gm = ebm_global(fit_ebm(px, d.y, pp), pnames);
  for (const auto& t : g.ranking) {
    const auto it = std::find_if(gm.ranking.begin(), gm.ranking.end(), [&](auto& o) { return o.term == t.term; });
    REQUIRE(it != gm.ranking.end());
    CHECK(it->importance == doctest::Approx(t.importance).epsilon(1e-9));
  }
}

TEST_CASE("XOR needs the pair term") {
  Rng rng(39);
  const auto d = xor_data(rng, 600);
  const auto p = fast_params();
  const auto mains = fit_ebm(d.x, d.y, p);
  const auto pairs = detect_interactions(d.x, d.y, mains, 3);
  REQUIRE(pairs.size() == 3);
  CHECK(pairs[0].first == 0);
  CHECK(pairs[0].second == 1);
  CHECK_FALSE(pairs[0].weak);
  const auto full = fit_pair_terms(d.x, d.y, mains, std::span(pairs).first(1));
  CHECK(accuracy(mains, d) < 0.8);
  CHECK(accuracy(full, d) > 0.95);
  check_invariants(full, d.x);

  const auto g = ebm_global(full, names(3));
  CHECK(g.ranking.front().term == pair_term_name("x1", "x2"));
  REQUIRE(g.pair_maps.size() == 1);
}

TEST_CASE("additive data gives weak and small pair terms") {
  Rng rng(40);
  auto d = simulate(rng, 1000, 3, [](auto x) { return 4 * (x[0] - 0.5) - 3 * (x[1] - 0.5); });
  const auto p = fast_params();
  const auto mains = fit_ebm(d.x, d.y, p);
  const auto pairs = detect_interactions(d.x, d.y, mains, 3);
  REQUIRE(pairs.size() == 3);
  for (const auto& c : pairs) CHECK(c.weak);
  const auto full = fit_pair_terms(d.x, d.y, mains, pairs);
  const auto g = ebm_global(full, names(3));
  double top_main = 0.0;
  for (const auto& t : g.ranking)
    if (t.term.find(" x ") == std::string::npos) top_main = std::max(top_main, t.importance);
  for (const auto& t : g.ranking)
    if (t.term.find(" x ") != std::string::npos) CHECK(t.importance < 0.1 * top_main);
}

TEST_CASE("interaction request edge cases") {
  Rng rng(41);
  const auto d = xor_data(rng, 200);
  const auto m = fit_ebm(d.x, d.y, fast_params());
  CHECK(detect_interactions(d.x, d.y, m, 0).empty());
  CHECK_THROWS_AS(detect_interactions(d.x, d.y, m, 4), ConfigError);
  const auto same = fit_pair_terms(d.x, d.y, m, {});
  CHECK(same.pairs().empty());
  CHECK(same.intercept() == m.intercept());
  std::vector<InteractionCandidate> dup{{0, 1, 1.0, false}, {1, 0, 1.0, false}};
  CHECK_THROWS_AS(fit_pair_terms(d.x, d.y, m, dup), ConfigError);
  std::vector<int> one(d.y.size(), 0);
  CHECK_THROWS_AS(fit_ebm(d.x, one, {}), ConfigError);
  EbmParams bad;
  bad.max_bins = 1;
  CHECK_THROWS_AS(fit_ebm(d.x, d.y, bad), ConfigError);
}

TEST_CASE("explanations") {
  // zero tables: everything is the intercept
  MainTerm t0{BinEdges(std::vector<double>{0.5}), {0.0, 0.0}, {1.0, 1.0}};
  EbmModel zero(-0.7, {t0, t0}, {}, {}, {});
  const std::vector<double> x{0.2, 0.9};
  const auto e = ebm_explain(zero, x, names(2));
  for (const auto& t : e.terms) CHECK(t.value == 0.0);
  CHECK(zero.predict_proba(x) == sigmoid(-0.7));

  MainTerm ta{BinEdges(std::vector<double>{0.5}), {-0.2, 0.3}, {1.0, 1.0}};
  MainTerm tb{BinEdges(std::vector<double>{0.5}), {1.1, -0.4}, {1.0, 1.0}};
  EbmModel m(0.1, {ta, tb}, {}, {}, {});
  const auto sorted = ebm_explain(m, x, names(2)).sorted_by_magnitude();
  REQUIRE(sorted.size() == 2);
  CHECK(sorted[0].term == "x2");
  CHECK(sorted[0].value == -0.4);
  CHECK(sorted[1].value == -0.2);
}

TEST_CASE("EBM model files round trip") {
  Rng rng(42);
  const auto d = xor_data(rng, 200);
  const Model m = fit_ebm_with_interactions(d.x, d.y, fast_params());
  std::stringstream buf;
  write_model(buf, m);
  const auto back = read_model(buf);
  CHECK(predict_proba(back, d.x) == predict_proba(m, d.x));
}
