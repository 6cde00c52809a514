#include "glassbox/ensemble.hpp"

#include <cmath>

#include <fmt/format.h>

#include "glassbox/error.hpp"
#include "glassbox/random.hpp"

namespace glassbox {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p / (1.0 - p)); }

double logistic_loss(std::span<const double> scores, std::span<const int> labels) {
  double acc = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    // log(1 + exp(-m)) with margin m = +-score, computed without overflow.
    const double m = labels[i] == 1 ? scores[i] : -scores[i];
    acc += m > 0.0 ? std::log1p(std::exp(-m)) : -m + std::log1p(std::exp(m));
  }
  return acc / static_cast<double>(scores.size());
}

namespace {

void check_binary(const Matrix& x, std::span<const int> y) {
  if (x.rows() != y.size()) throw ConfigError("label count does not match row count");
  std::size_t pos = 0;
  for (int v : y) {
    if (v != 0 && v != 1) throw ConfigError("labels must be 0 or 1");
    pos += static_cast<std::size_t>(v);
  }
  if (pos == 0 || pos == y.size()) {
    throw ConfigError("training labels hold a single class; both MS and HC are required");
  }
}

void check_width(std::span<const double> x, std::size_t d) {
  if (x.size() != d) {
    throw ConfigError(fmt::format("model expects {} features, input has {}", d, x.size()));
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Random forest

ForestModel::ForestModel(std::vector<Tree> trees, ForestParams params, std::size_t n_features)
    : trees_(std::move(trees)), params_(params), n_features_(n_features) {}

double ForestModel::predict_proba(std::span<const double> x) const {
  if (trees_.empty()) throw ConfigError("forest has no trees");
  check_width(x, n_features_);
  double votes = 0.0;
  for (const auto& t : trees_) votes += t.predict(x);
  return votes / static_cast<double>(trees_.size());
}

std::vector<double> ForestModel::predict_proba(const Matrix& x) const {
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict_proba(x.row(i));
  return out;
}

ForestModel fit_random_forest(const Matrix& x, std::span<const int> y,
                              const ForestParams& params) {
  check_binary(x, y);
  if (params.n_estimators == 0) throw ConfigError("n_estimators must be >= 1");
  const std::size_t n = x.rows();
  const ColumnOrder order(x);
  std::vector<double> targets(y.begin(), y.end());

  TreeParams tp;
  tp.max_depth = params.max_depth;
  tp.min_samples_leaf = params.min_samples_leaf;
  tp.min_samples_split = params.min_samples_split;
  tp.max_features = params.max_features;

  std::vector<Tree> trees;
  trees.reserve(params.n_estimators);
  std::vector<double> weights(n);
  for (std::size_t t = 0; t < params.n_estimators; ++t) {
    const std::uint64_t tree_seed = derive_seed(params.seed, t);
    if (params.bootstrap) {
      Rng rng(derive_seed(tree_seed, "bootstrap"));
      std::fill(weights.begin(), weights.end(), 0.0);
      for (std::size_t draw = 0; draw < n; ++draw) weights[uniform_index(rng, n)] += 1.0;
    } else {
      std::fill(weights.begin(), weights.end(), 1.0);
    }
    tp.seed = derive_seed(tree_seed, "features");
    trees.push_back(fit_regression_tree(x, order, targets, tp, weights));
  }
  return ForestModel(std::move(trees), params, x.cols());
}

// ---------------------------------------------------------------------------
// Gradient boosting

BoostedModel::BoostedModel(double base_score, std::vector<Tree> trees, BoostingParams params,
                           std::size_t n_features)
    : base_score_(base_score), trees_(std::move(trees)), params_(params), n_features_(n_features) {}

double BoostedModel::predict_raw(std::span<const double> x) const {
  check_width(x, n_features_);
  double acc = 0.0;
  for (const auto& t : trees_) acc += t.predict(x);
  return base_score_ + params_.learning_rate * acc;
}

std::vector<double> BoostedModel::predict_proba(const Matrix& x) const {
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict_proba(x.row(i));
  return out;
}

BoostedModel fit_gradient_boosting(const Matrix& x, std::span<const int> y,
                                   const BoostingParams& params, const RoundObserver& observer) {
  check_binary(x, y);
  if (!(params.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  const std::size_t n = x.rows();
  double positives = 0.0;
  for (int v : y) positives += v;
  const double base = logit(positives / static_cast<double>(n));

  const ColumnOrder order(x);
  TreeParams tp;
  tp.max_depth = params.max_depth;
  tp.min_samples_leaf = params.min_samples_leaf;
  tp.min_samples_split = 2;
  tp.reg_lambda = params.reg_lambda;

  // Tree sums are tracked separately from the base so that the training
  // scores use the same arithmetic as predict_raw.
  std::vector<double> tree_sum(n, 0.0), scores(n, base), g(n), h(n);
  std::vector<Tree> trees;
  trees.reserve(params.n_estimators);
  for (std::size_t round = 1; round <= params.n_estimators; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(scores[i]);
      g[i] = p - y[i];
      h[i] = p * (1.0 - p);
    }
    Tree tree = fit_newton_tree(x, order, g, h, tp);
    for (std::size_t i = 0; i < n; ++i) {
      tree_sum[i] += tree.predict(x.row(i));
      scores[i] = base + params.learning_rate * tree_sum[i];
    }
    trees.push_back(std::move(tree));
    if (observer) observer(round, logistic_loss(scores, y));
  }
  return BoostedModel(base, std::move(trees), params, x.cols());
}

}  // namespace glassbox
