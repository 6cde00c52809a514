#pragma once

#include <span>
#include <string>
#include <vector>

#include "glassbox/data_model.hpp"
#include "glassbox/ensemble.hpp"
#include "glassbox/matrix.hpp"
#include "glassbox/tree.hpp"

namespace glassbox {

enum class OutputSpace { RawScore, Probability };
std::string_view to_string(OutputSpace s);

// Per-feature contributions of one prediction:
// base_value + sum(phi) == output.
struct Attribution {
  double base_value = 0.0;
  std::vector<double> phi;
  double output = 0.0;
  OutputSpace space = OutputSpace::RawScore;

  double reconstruction_error() const;
};

// A tree ensemble seen as offset + scale * sum of tree outputs. Boosted
// models map to (base_score, learning_rate) in log-odds, forests to
// (0, 1/n_trees) in vote space. The view does not own the trees.
struct TreeEnsembleView {
  double offset = 0.0;
  double scale = 1.0;
  std::vector<const Tree*> trees;
  std::size_t n_features = 0;
  OutputSpace space = OutputSpace::RawScore;

  static TreeEnsembleView of(const ForestModel& model);
  static TreeEnsembleView of(const BoostedModel& model);

  double output(std::span<const double> x) const;
  double expected_value() const;
};

// Exact path-dependent TreeSHAP: Shapley values of
// v(S) = E[f(x) | x_S] where unknown splits average their children by
// cover. Polynomial in tree size. Throws ConfigError when a node lacks a
// positive finite cover.
Attribution tree_shap(const TreeEnsembleView& model, std::span<const double> x);
Attribution tree_shap(const ForestModel& model, std::span<const double> x);
Attribution tree_shap(const BoostedModel& model, std::span<const double> x);

// Same quantity by enumerating all 2^d coalitions. Test oracle; refuses
// d > max_features.
Attribution brute_force_shap(const TreeEnsembleView& model, std::span<const double> x,
                             std::size_t max_features = 20);

// The conditional-expectation game used by both routes.
double conditional_expectation(const TreeEnsembleView& model, std::span<const double> x,
                               std::span<const char> known);

struct GlobalShapSummary {
  std::vector<std::string> feature_names;
  double base_value = 0.0;
  OutputSpace space = OutputSpace::RawScore;
  Matrix phi;     // n x d
  Matrix values;  // n x d, the explained feature values
  std::vector<double> mean_abs_phi;
  std::vector<std::size_t> ranking;  // by mean |phi| descending, ties by index
};

GlobalShapSummary global_summary(const TreeEnsembleView& model, const Matrix& background,
                                 std::span<const std::string> feature_names);

// 8x8 map of a 64-feature grid model: mean |phi| for a summary, signed
// phi for one attribution. Cells are placed by their "r.c" names.
// Throws ConfigError unless d == 64 and every name is a grid cell.
Grid shap_grid(const GlobalShapSummary& summary);
Grid shap_grid(const Attribution& attribution, std::span<const std::string> feature_names);

struct WaterfallItem {
  std::string feature;
  std::size_t index = 0;
  double phi = 0.0;
};

struct Waterfall {
  double base_value = 0.0;
  std::vector<WaterfallItem> items;  // by |phi| descending, ties by index
  std::size_t folded_count = 0;
  double folded_sum = 0.0;
  double output = 0.0;
  OutputSpace space = OutputSpace::RawScore;
};

// Nonzero contributions, the largest max_items shown individually, the
// rest folded into one remainder.
Waterfall waterfall(const Attribution& attribution, std::span<const std::string> feature_names,
                    std::size_t max_items);

struct DependencePoint {
  double value = 0.0;
  double phi = 0.0;
};

std::vector<DependencePoint> dependence_data(const GlobalShapSummary& summary, std::size_t feature);

}  // namespace glassbox
