#include "glassbox/shap.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "glassbox/error.hpp"

namespace glassbox {

std::string_view to_string(OutputSpace s) {
  return s == OutputSpace::RawScore ? "log-odds" : "probability";
}

double Attribution::reconstruction_error() const {
  const double total = base_value + std::accumulate(phi.begin(), phi.end(), 0.0);
  return std::abs(total - output);
}

TreeEnsembleView TreeEnsembleView::of(const ForestModel& model) {
  TreeEnsembleView v;
  v.offset = 0.0;
  v.scale = 1.0 / static_cast<double>(model.trees().size());
  for (const auto& t : model.trees()) v.trees.push_back(&t);
  v.n_features = model.n_features();
  v.space = OutputSpace::Probability;
  return v;
}

TreeEnsembleView TreeEnsembleView::of(const BoostedModel& model) {
  TreeEnsembleView v;
  v.offset = model.base_score();
  v.scale = model.params().learning_rate;
  for (const auto& t : model.trees()) v.trees.push_back(&t);
  v.n_features = model.n_features();
  v.space = OutputSpace::RawScore;
  return v;
}

double TreeEnsembleView::output(std::span<const double> x) const {
  double acc = 0.0;
  for (const Tree* t : trees) acc += t->predict(x);
  return offset + scale * acc;
}

double TreeEnsembleView::expected_value() const {
  double acc = 0.0;
  for (const Tree* t : trees) acc += t->expected_value();
  return offset + scale * acc;
}

namespace {

void check_input(const TreeEnsembleView& model, std::span<const double> x) {
  if (x.size() != model.n_features) {
    throw ConfigError(fmt::format("model expects {} features, input has {}", model.n_features, x.size()));
  }
}

void check_covers(const Tree& tree) {
  for (const auto& n : tree.nodes()) {
    if (!std::isfinite(n.cover) || !(n.cover > 0.0)) {
      throw ConfigError("tree node has no usable cover; TreeSHAP needs cover on every node");
    }
  }
}

struct PathElement {
  int feature = -1;
  double zero_fraction = 0.0;
  double one_fraction = 0.0;
  double pweight = 0.0;
};

// Polynomial bookkeeping of the fraction of coalitions of each size that
// flow down the current path (Lundberg et al., "Consistent individualized
// feature attribution for tree ensembles", algorithm 2).
void extend_path(std::vector<PathElement>& path, std::size_t depth, double zero_fraction,
                 double one_fraction, int feature) {
  path[depth] = PathElement{feature, zero_fraction, one_fraction, depth == 0 ? 1.0 : 0.0};
  const double d1 = static_cast<double>(depth + 1);
  for (std::size_t i = depth; i-- > 0;) {
    path[i + 1].pweight += one_fraction * path[i].pweight * static_cast<double>(i + 1) / d1;
    path[i].pweight = zero_fraction * path[i].pweight * static_cast<double>(depth - i) / d1;
  }
}

void unwind_path(std::vector<PathElement>& path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  const double d1 = static_cast<double>(depth + 1);
  double next_one_portion = path[depth].pweight;
  for (std::size_t i = depth; i-- > 0;) {
    if (one != 0.0) {
      const double tmp = path[i].pweight;
      path[i].pweight = next_one_portion * d1 / (static_cast<double>(i + 1) * one);
      next_one_portion = tmp - path[i].pweight * zero * static_cast<double>(depth - i) / d1;
    } else {
      path[i].pweight = path[i].pweight * d1 / (zero * static_cast<double>(depth - i));
    }
  }
  for (std::size_t i = index; i < depth; ++i) {
    path[i].feature = path[i + 1].feature;
    path[i].zero_fraction = path[i + 1].zero_fraction;
    path[i].one_fraction = path[i + 1].one_fraction;
  }
}

double unwound_path_sum(const std::vector<PathElement>& path, std::size_t depth, std::size_t index) {
  const double one = path[index].one_fraction;
  const double zero = path[index].zero_fraction;
  double next_one_portion = path[depth].pweight;
  double total = 0.0;
  if (one != 0.0) {
    for (std::size_t i = depth; i-- > 0;) {
      const double tmp = next_one_portion / (static_cast<double>(i + 1) * one);
      total += tmp;
      next_one_portion = path[i].pweight - tmp * zero * static_cast<double>(depth - i);
    }
  } else {
    for (std::size_t i = depth; i-- > 0;) {
      total += path[i].pweight / (zero * static_cast<double>(depth - i));
    }
  }
  return total * static_cast<double>(depth + 1);
}

class TreeShapRecursion {
 public:
  TreeShapRecursion(const Tree& tree, std::span<const double> x, std::span<double> phi, double scale)
      : tree_(tree), x_(x), phi_(phi), scale_(scale) {}

  void run() {
    std::vector<PathElement> path(tree_.depth() + 2);
    recurse(0, path, 0, 1.0, 1.0, -1);
  }

 private:
  void recurse(std::size_t node_index, std::vector<PathElement> path, std::size_t depth,
               double parent_zero, double parent_one, int parent_feature) {
    extend_path(path, depth, parent_zero, parent_one, parent_feature);
    const TreeNode& node = tree_.node(node_index);
    if (node.is_leaf()) {
      for (std::size_t i = 1; i <= depth; ++i) {
        const double w = unwound_path_sum(path, depth, i);
        const auto& el = path[i];
        phi_[static_cast<std::size_t>(el.feature)] +=
            scale_ * w * (el.one_fraction - el.zero_fraction) * node.value;
      }
      return;
    }
    const auto f = static_cast<std::size_t>(node.feature);
    const double v = x_[f];
    if (!std::isfinite(v)) throw ConfigError(fmt::format("feature {} is not finite", f));
    const auto hot = static_cast<std::size_t>(v < node.threshold ? node.left : node.right);
    const auto cold = static_cast<std::size_t>(v < node.threshold ? node.right : node.left);
    const double hot_zero = tree_.node(hot).cover / node.cover;
    const double cold_zero = tree_.node(cold).cover / node.cover;

    double incoming_zero = 1.0, incoming_one = 1.0;
    std::size_t k = 1;
    for (; k <= depth; ++k) {
      if (path[k].feature == node.feature) break;
    }
    if (k <= depth) {
      incoming_zero = path[k].zero_fraction;
      incoming_one = path[k].one_fraction;
      unwind_path(path, depth, k);
      --depth;
    }
    recurse(hot, path, depth + 1, hot_zero * incoming_zero, incoming_one, node.feature);
    recurse(cold, path, depth + 1, cold_zero * incoming_zero, 0.0, node.feature);
  }

  const Tree& tree_;
  std::span<const double> x_;
  std::span<double> phi_;
  double scale_;
};

double tree_conditional(const Tree& tree, std::size_t node_index, std::span<const double> x,
                        std::span<const char> known) {
  const TreeNode& node = tree.node(node_index);
  if (node.is_leaf()) return node.value;
  const auto f = static_cast<std::size_t>(node.feature);
  const auto left = static_cast<std::size_t>(node.left);
  const auto right = static_cast<std::size_t>(node.right);
  if (known[f]) return tree_conditional(tree, x[f] < node.threshold ? left : right, x, known);
  return (tree.node(left).cover * tree_conditional(tree, left, x, known) +
          tree.node(right).cover * tree_conditional(tree, right, x, known)) /
         node.cover;
}

}  // namespace

Attribution tree_shap(const TreeEnsembleView& model, std::span<const double> x) {
  check_input(model, x);
  Attribution a;
  a.space = model.space;
  a.phi.assign(model.n_features, 0.0);
  for (const Tree* t : model.trees) {
    check_covers(*t);
    TreeShapRecursion(*t, x, a.phi, model.scale).run();
  }
  a.base_value = model.expected_value();
  a.output = model.output(x);
  return a;
}

Attribution tree_shap(const ForestModel& model, std::span<const double> x) {
  return tree_shap(TreeEnsembleView::of(model), x);
}

Attribution tree_shap(const BoostedModel& model, std::span<const double> x) {
  return tree_shap(TreeEnsembleView::of(model), x);
}

double conditional_expectation(const TreeEnsembleView& model, std::span<const double> x,
                               std::span<const char> known) {
  double acc = 0.0;
  for (const Tree* t : model.trees) acc += tree_conditional(*t, 0, x, known);
  return model.offset + model.scale * acc;
}

Attribution brute_force_shap(const TreeEnsembleView& model, std::span<const double> x,
                             std::size_t max_features) {
  check_input(model, x);
  const std::size_t d = model.n_features;
  if (d > max_features) {
    throw ConfigError(fmt::format("brute-force Shapley enumeration is limited to {} features, got {}",
                                  max_features, d));
  }
  for (const Tree* t : model.trees) check_covers(*t);

  const std::size_t subsets = std::size_t{1} << d;
  std::vector<double> value(subsets);
  std::vector<char> known(d);
  for (std::size_t mask = 0; mask < subsets; ++mask) {
    for (std::size_t j = 0; j < d; ++j) known[j] = (mask >> j) & 1U;
    value[mask] = conditional_expectation(model, x, known);
  }
  // |S|! (d - |S| - 1)! / d!
  std::vector<double> weight(d, 0.0);
  for (std::size_t s = 0; s < d; ++s) {
    weight[s] = std::exp(std::lgamma(static_cast<double>(s + 1)) +
                         std::lgamma(static_cast<double>(d - s)) -
                         std::lgamma(static_cast<double>(d + 1)));
  }
  Attribution a;
  a.space = model.space;
  a.phi.assign(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    for (std::size_t mask = 0; mask < subsets; ++mask) {
      if (mask & bit) continue;
      const auto size = static_cast<std::size_t>(__builtin_popcountll(mask));
      a.phi[i] += weight[size] * (value[mask | bit] - value[mask]);
    }
  }
  a.base_value = value[0];
  a.output = model.output(x);
  return a;
}

GlobalShapSummary global_summary(const TreeEnsembleView& model, const Matrix& background,
                                 std::span<const std::string> feature_names) {
  if (feature_names.size() != model.n_features) throw ConfigError("feature names do not match the model");
  if (!background.empty() && background.cols() != model.n_features) {
    throw ConfigError("background width does not match the model");
  }
  GlobalShapSummary s;
  const std::size_t d = model.n_features;
  s.feature_names.assign(feature_names.begin(), feature_names.end());
  s.space = model.space;
  s.base_value = model.expected_value();
  s.phi = Matrix(background.rows(), d);
  s.values = Matrix(background.rows(), d);
  s.mean_abs_phi.assign(d, 0.0);
  for (std::size_t i = 0; i < background.rows(); ++i) {
    const auto a = tree_shap(model, background.row(i));
    for (std::size_t j = 0; j < d; ++j) {
      s.phi(i, j) = a.phi[j];
      s.values(i, j) = background(i, j);
      s.mean_abs_phi[j] += std::abs(a.phi[j]);
    }
  }
  if (background.rows() > 0) {
    for (double& m : s.mean_abs_phi) m /= static_cast<double>(background.rows());
  }
  s.ranking.resize(d);
  std::iota(s.ranking.begin(), s.ranking.end(), 0);
  std::stable_sort(s.ranking.begin(), s.ranking.end(), [&](std::size_t a, std::size_t b) {
    return s.mean_abs_phi[a] > s.mean_abs_phi[b];
  });
  return s;
}

namespace {

Grid place_on_grid(std::span<const double> values, std::span<const std::string> names) {
  if (values.size() != kGridCells || names.size() != kGridCells) {
    throw ConfigError(fmt::format("grid maps need the 64-cell feature set, got {} features", values.size()));
  }
  Grid g{};
  for (std::size_t j = 0; j < kGridCells; ++j) {
    const auto cell = parse_cell_name(names[j]);
    if (!cell) throw ConfigError(fmt::format("feature '{}' is not a grid cell", names[j]));
    g[*cell] = values[j];
  }
  return g;
}

}  // namespace

Grid shap_grid(const GlobalShapSummary& summary) {
  return place_on_grid(summary.mean_abs_phi, summary.feature_names);
}

Grid shap_grid(const Attribution& attribution, std::span<const std::string> feature_names) {
  return place_on_grid(attribution.phi, feature_names);
}

Waterfall waterfall(const Attribution& attribution, std::span<const std::string> feature_names,
                    std::size_t max_items) {
  if (feature_names.size() != attribution.phi.size()) {
    throw ConfigError("feature names do not match the attribution");
  }
  Waterfall w;
  w.base_value = attribution.base_value;
  w.output = attribution.output;
  w.space = attribution.space;
  std::vector<std::size_t> order;
  for (std::size_t j = 0; j < attribution.phi.size(); ++j) {
    if (attribution.phi[j] != 0.0) order.push_back(j);
  }
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(attribution.phi[a]) > std::abs(attribution.phi[b]);
  });
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t j = order[k];
    if (k < max_items) {
      w.items.push_back(WaterfallItem{feature_names[j], j, attribution.phi[j]});
    } else {
      ++w.folded_count;
      w.folded_sum += attribution.phi[j];
    }
  }
  return w;
}

std::vector<DependencePoint> dependence_data(const GlobalShapSummary& summary, std::size_t feature) {
  if (feature >= summary.feature_names.size()) {
    throw ConfigError(fmt::format("feature {} out of range", feature));
  }
  std::vector<DependencePoint> out;
  out.reserve(summary.phi.rows());
  for (std::size_t i = 0; i < summary.phi.rows(); ++i) {
    out.push_back(DependencePoint{summary.values(i, feature), summary.phi(i, feature)});
  }
  return out;
}

}  // namespace glassbox
