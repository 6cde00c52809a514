#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "glassbox/matrix.hpp"
#include "glassbox/tree.hpp"

namespace glassbox {

double sigmoid(double z);
double logit(double p);

// Mean binary cross-entropy of raw log-odds scores.
double logistic_loss(std::span<const double> scores, std::span<const int> labels);

struct ForestParams {
  std::size_t n_estimators = 100;
  bool bootstrap = true;
  std::optional<int> max_depth;  // None
  MaxFeatures max_features{MaxFeatures::Kind::Sqrt, 0};  // "auto" for classifiers
  std::size_t min_samples_leaf = 1;
  std::size_t min_samples_split = 2;
  std::uint64_t seed = 0;
};

// Random forest classifier. Each tree is a regression tree on the 0/1
// label (variance reduction is Gini reduction up to a factor of two), so
// a leaf holds the MS fraction of its bootstrap sample and the tree's
// vote is that fraction.
class ForestModel {
 public:
  ForestModel() = default;
  ForestModel(std::vector<Tree> trees, ForestParams params, std::size_t n_features);

  const std::vector<Tree>& trees() const { return trees_; }
  const ForestParams& params() const { return params_; }
  std::size_t n_features() const { return n_features_; }

  // Sum of votes over n_estimators.
  double predict_proba(std::span<const double> x) const;
  std::vector<double> predict_proba(const Matrix& x) const;

 private:
  std::vector<Tree> trees_;
  ForestParams params_;
  std::size_t n_features_ = 0;
};

// Throws ConfigError unless y holds both classes.
ForestModel fit_random_forest(const Matrix& x, std::span<const int> y, const ForestParams& params);

struct BoostingParams {
  double learning_rate = 0.3;
  int max_depth = 6;
  std::size_t n_estimators = 100;
  double reg_lambda = 1.0;
  std::size_t min_samples_leaf = 1;
};

// Newton boosting on the logistic loss; raw score is
// base_score + learning_rate * sum of tree outputs.
class BoostedModel {
 public:
  BoostedModel() = default;
  BoostedModel(double base_score, std::vector<Tree> trees, BoostingParams params,
               std::size_t n_features);

  double base_score() const { return base_score_; }
  const std::vector<Tree>& trees() const { return trees_; }
  const BoostingParams& params() const { return params_; }
  std::size_t n_features() const { return n_features_; }

  double predict_raw(std::span<const double> x) const;
  double predict_proba(std::span<const double> x) const { return sigmoid(predict_raw(x)); }
  std::vector<double> predict_proba(const Matrix& x) const;

 private:
  double base_score_ = 0.0;
  std::vector<Tree> trees_;
  BoostingParams params_;
  std::size_t n_features_ = 0;
};

// Called after every boosting round with the 1-based round number and the
// training log-loss at that point.
using RoundObserver = std::function<void(std::size_t round, double loss)>;

BoostedModel fit_gradient_boosting(const Matrix& x, std::span<const int> y,
                                   const BoostingParams& params,
                                   const RoundObserver& observer = {});

}  // namespace glassbox
