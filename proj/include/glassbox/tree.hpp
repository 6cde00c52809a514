#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "glassbox/matrix.hpp"

namespace glassbox {

// One node of a binary regression tree. Internal nodes route
// x[feature] < threshold to the left child, everything else right.
struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  int left = -1;
  int right = -1;
  double value = 0.0;  // leaf output (also kept on internal nodes)
  double cover = 0.0;  // training weight reaching the node

  bool is_leaf() const { return feature < 0; }
  friend bool operator==(const TreeNode&, const TreeNode&) = default;
};

// Flat node array; node 0 is the root.
class Tree {
 public:
  Tree() = default;
  explicit Tree(std::vector<TreeNode> nodes);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(std::size_t i) const { return nodes_[i]; }
  std::size_t size() const { return nodes_.size(); }
  std::size_t leaf_count() const;
  std::size_t depth() const;

  // Throws ConfigError on a non-finite feature value or a feature index
  // outside x.
  double predict(std::span<const double> x) const;
  std::size_t leaf_index(std::span<const double> x) const;

  // Cover-weighted mean of the leaf values.
  double expected_value() const;

  friend bool operator==(const Tree&, const Tree&) = default;

 private:
  std::vector<TreeNode> nodes_;
};

struct MaxFeatures {
  enum class Kind { All, Sqrt, Count };
  Kind kind = Kind::All;
  std::size_t count = 0;

  std::size_t resolve(std::size_t d) const;
};

struct TreeParams {
  std::optional<int> max_depth;  // nullopt = unlimited
  std::size_t min_samples_leaf = 1;
  std::size_t min_samples_split = 2;
  MaxFeatures max_features;
  // L2 leaf penalty of the NewtonGain objective. The objective itself is
  // chosen by the entry point (fit_regression_tree / fit_newton_tree).
  double reg_lambda = 0.0;
  std::uint64_t seed = 0;
};

// Per-feature ascending row order, computed once per design matrix and
// shared by every tree fitted on it.
class ColumnOrder {
 public:
  explicit ColumnOrder(const Matrix& x);
  std::span<const std::uint32_t> column(std::size_t f) const { return order_[f]; }
  // Rows sorted lexicographically by value. Node totals are summed in this
  // order so that they do not depend on how the training rows were listed.
  std::span<const std::uint32_t> rows() const { return rows_; }

 private:
  std::vector<std::vector<std::uint32_t>> order_;
  std::vector<std::uint32_t> rows_;
};

// Greedy exact split search, grown level by level. Variance minimizes
// squared error (leaf = weighted mean). Row weights default to 1; rows
// with weight 0 are excluded, and leaf-size limits count rows, not weight.
Tree fit_regression_tree(const Matrix& x, std::span<const double> targets,
                         const TreeParams& params, std::span<const double> weights = {});

// NewtonGain on gradient/hessian pairs: leaf = -G/(H+lambda), split gain
// 1/2 [G_L^2/(H_L+l) + G_R^2/(H_R+l) - G^2/(H+l)].
Tree fit_newton_tree(const Matrix& x, std::span<const double> gradients,
                     std::span<const double> hessians, const TreeParams& params,
                     std::span<const double> weights = {});

// Same, reusing a precomputed ColumnOrder of x.
Tree fit_newton_tree(const Matrix& x, const ColumnOrder& order,
                     std::span<const double> gradients, std::span<const double> hessians,
                     const TreeParams& params, std::span<const double> weights = {});
Tree fit_regression_tree(const Matrix& x, const ColumnOrder& order,
                         std::span<const double> targets, const TreeParams& params,
                         std::span<const double> weights = {});

namespace newton {

inline double leaf_weight(double g, double h, double lambda) { return -g / (h + lambda); }
inline double score(double g, double h, double lambda) {
  const double denom = h + lambda;
  return denom > 0.0 ? g * g / denom : 0.0;
}

// Gains below this fraction of the children's total score are treated as
// zero; this absorbs rounding on pure nodes.
inline constexpr double kRelativeGainFloor = 1e-10;

}  // namespace newton

}  // namespace glassbox
