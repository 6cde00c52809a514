#include "glassbox/tree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "glassbox/error.hpp"
#include "glassbox/random.hpp"

namespace glassbox {

Tree::Tree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
  if (nodes_.empty()) throw ConfigError("tree has no nodes");
  const int n = static_cast<int>(nodes_.size());
  for (const auto& node : nodes_) {
    if (node.is_leaf()) continue;
    if (node.left <= 0 || node.left >= n || node.right <= 0 || node.right >= n) {
      throw ConfigError("tree node has an invalid child index");
    }
  }
}

std::size_t Tree::leaf_count() const {
  return static_cast<std::size_t>(
      std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

std::size_t Tree::depth() const {
  std::vector<std::size_t> d(nodes_.size(), 0);
  std::size_t best = 0;
  // Children always follow their parent in the node array.
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    best = std::max(best, d[i]);
    if (!nodes_[i].is_leaf()) {
      d[static_cast<std::size_t>(nodes_[i].left)] = d[i] + 1;
      d[static_cast<std::size_t>(nodes_[i].right)] = d[i] + 1;
    }
  }
  return best;
}

std::size_t Tree::leaf_index(std::span<const double> x) const {
  std::size_t i = 0;
  while (!nodes_[i].is_leaf()) {
    const auto& n = nodes_[i];
    const auto f = static_cast<std::size_t>(n.feature);
    if (f >= x.size()) {
      throw ConfigError(fmt::format("tree splits on feature {} but input has {}", f, x.size()));
    }
    const double v = x[f];
    if (!std::isfinite(v)) throw ConfigError(fmt::format("feature {} is not finite", f));
    i = static_cast<std::size_t>(v < n.threshold ? n.left : n.right);
  }
  return i;
}

double Tree::predict(std::span<const double> x) const { return nodes_[leaf_index(x)].value; }

double Tree::expected_value() const {
  double acc = 0.0;
  for (const auto& n : nodes_) {
    if (n.is_leaf()) acc += n.cover * n.value;
  }
  return acc / nodes_.front().cover;
}

std::size_t MaxFeatures::resolve(std::size_t d) const {
  switch (kind) {
    case Kind::All:
      return d;
    case Kind::Sqrt:
      return std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))));
    case Kind::Count:
      return std::clamp<std::size_t>(count, 1, d);
  }
  return d;
}

ColumnOrder::ColumnOrder(const Matrix& x) : order_(x.cols()) {
  for (std::size_t f = 0; f < x.cols(); ++f) {
    auto& ord = order_[f];
    ord.resize(x.rows());
    std::iota(ord.begin(), ord.end(), 0u);
    std::stable_sort(ord.begin(), ord.end(),
                     [&](std::uint32_t a, std::uint32_t b) { return x(a, f) < x(b, f); });
  }
  rows_.resize(x.rows());
  std::iota(rows_.begin(), rows_.end(), 0u);
  std::stable_sort(rows_.begin(), rows_.end(), [&](std::uint32_t a, std::uint32_t b) {
    const auto ra = x.row(a), rb = x.row(b);
    return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
  });
}

namespace {

struct Stats {
  double g = 0.0;
  double h = 0.0;
  double w = 0.0;
  std::size_t count = 0;
};

struct Candidate {
  double gain = 0.0;
  int feature = -1;
  double threshold = 0.0;
};

struct OpenNode {
  std::size_t tree_index;
  int depth;
  Stats stats;
  std::vector<char> considers;  // per feature
  bool splittable = false;
  Candidate best;
};

double split_threshold(double lo, double hi) {
  double t = lo + (hi - lo) / 2.0;
  // Adjacent doubles: the midpoint can round onto lo, which would send lo
  // right under the strict less-than rule.
  if (t <= lo) t = hi;
  return t;
}

class LevelwiseBuilder {
 public:
  LevelwiseBuilder(const Matrix& x, const ColumnOrder& order, std::vector<double> g,
                   std::vector<double> h, std::vector<double> w, double lambda, double gain_scale,
                   const TreeParams& params)
      : x_(x),
        order_(order),
        g_(std::move(g)),
        h_(std::move(h)),
        w_(std::move(w)),
        lambda_(lambda),
        gain_scale_(gain_scale),
        params_(params),
        rng_(params.seed) {}

  Tree build() {
    const std::size_t n = x_.rows();
    const std::size_t d = x_.cols();
    node_of_.assign(n, -1);
    Stats root;
    for (const std::size_t i : order_.rows()) {
      if (w_[i] <= 0.0) continue;
      node_of_[i] = 0;
      accumulate(root, i);
    }
    if (root.count == 0) throw ConfigError("cannot fit a tree on zero rows");

    nodes_.clear();
    nodes_.push_back(make_node(root));
    std::vector<OpenNode> open;
    open.push_back(OpenNode{0, 0, root, {}, false, {}});

    const std::size_t k = params_.max_features.resolve(d);
    while (!open.empty()) {
      for (auto& node : open) prepare(node, d, k);
      for (std::size_t f = 0; f < d; ++f) scan_feature(f, open);

      std::vector<OpenNode> next;
      std::vector<int> child_slot(open.size() * 2, -1);
      for (std::size_t slot = 0; slot < open.size(); ++slot) {
        auto& node = open[slot];
        if (node.best.feature < 0) continue;
        const std::size_t left = nodes_.size();
        {
          auto& tn = nodes_[node.tree_index];
          tn.feature = node.best.feature;
          tn.threshold = node.best.threshold;
          tn.left = static_cast<int>(left);
          tn.right = static_cast<int>(left + 1);
        }
        nodes_.resize(left + 2);
        child_slot[2 * slot] = static_cast<int>(next.size());
        next.push_back(OpenNode{left, node.depth + 1, {}, {}, false, {}});
        child_slot[2 * slot + 1] = static_cast<int>(next.size());
        next.push_back(OpenNode{left + 1, node.depth + 1, {}, {}, false, {}});
      }
      // Reroute rows and recompute child statistics from scratch.
      for (const std::size_t i : order_.rows()) {
        const int slot = node_of_[i];
        if (slot < 0) continue;
        const auto& node = open[static_cast<std::size_t>(slot)];
        if (node.best.feature < 0) {
          node_of_[i] = -1;
          continue;
        }
        const bool left = x_(i, static_cast<std::size_t>(node.best.feature)) < node.best.threshold;
        const int child = child_slot[2 * static_cast<std::size_t>(slot) + (left ? 0 : 1)];
        node_of_[i] = child;
        accumulate(next[static_cast<std::size_t>(child)].stats, i);
      }
      for (auto& child : next) {
        auto& tn = nodes_[child.tree_index];
        tn = make_node(child.stats);
      }
      open = std::move(next);
    }
    fix_covers();
    return Tree(std::move(nodes_));
  }

 private:
  void accumulate(Stats& s, std::size_t i) const {
    s.g += g_[i];
    s.h += h_[i];
    s.w += w_[i];
    ++s.count;
  }

  TreeNode make_node(const Stats& s) const {
    TreeNode tn;
    tn.value = newton::leaf_weight(s.g, s.h, lambda_);
    tn.cover = s.w;
    return tn;
  }

  void prepare(OpenNode& node, std::size_t d, std::size_t k) {
    node.best = Candidate{};
    const bool depth_ok = !params_.max_depth || node.depth < *params_.max_depth;
    node.splittable = depth_ok && node.stats.count >= params_.min_samples_split &&
                      node.stats.count >= 2 * params_.min_samples_leaf;
    node.considers.assign(d, 0);
    if (!node.splittable) return;
    if (k >= d) {
      std::fill(node.considers.begin(), node.considers.end(), 1);
      return;
    }
    std::vector<std::size_t> features(d);
    std::iota(features.begin(), features.end(), 0);
    for (std::size_t j = 0; j < k; ++j) {
      const std::size_t pick = j + uniform_index(rng_, d - j);
      std::swap(features[j], features[pick]);
      node.considers[features[j]] = 1;
    }
  }

  void scan_feature(std::size_t f, std::vector<OpenNode>& open) {
    const std::size_t m = open.size();
    left_.assign(m, Stats{});
    last_.assign(m, 0.0);
    for (std::uint32_t i : order_.column(f)) {
      const int slot = node_of_[i];
      if (slot < 0) continue;
      auto& node = open[static_cast<std::size_t>(slot)];
      if (!node.splittable || !node.considers[f]) continue;
      const double v = x_(i, f);
      auto& left = left_[static_cast<std::size_t>(slot)];
      if (left.count > 0 && v > last_[static_cast<std::size_t>(slot)]) {
        evaluate(node, left, f, last_[static_cast<std::size_t>(slot)], v);
      }
      accumulate(left, i);
      last_[static_cast<std::size_t>(slot)] = v;
    }
  }

  void evaluate(OpenNode& node, const Stats& left, std::size_t f, double lo, double hi) {
    const std::size_t right_count = node.stats.count - left.count;
    if (left.count < params_.min_samples_leaf || right_count < params_.min_samples_leaf) return;
    const double gl = left.g, hl = left.h;
    const double gr = node.stats.g - gl, hr = node.stats.h - hl;
    const double children = newton::score(gl, hl, lambda_) + newton::score(gr, hr, lambda_);
    const double gain = gain_scale_ * (children - newton::score(node.stats.g, node.stats.h, lambda_));
    if (!(gain > newton::kRelativeGainFloor * gain_scale_ * children)) return;
    if (gain > node.best.gain) {
      node.best = Candidate{gain, static_cast<int>(f), split_threshold(lo, hi)};
    }
  }

  void fix_covers() {
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      auto& n = nodes_[i];
      if (!n.is_leaf()) {
        n.cover = nodes_[static_cast<std::size_t>(n.left)].cover +
                  nodes_[static_cast<std::size_t>(n.right)].cover;
      }
    }
  }

  const Matrix& x_;
  const ColumnOrder& order_;
  std::vector<double> g_, h_, w_;
  double lambda_;
  double gain_scale_;
  const TreeParams& params_;
  Rng rng_;
  std::vector<int> node_of_;
  std::vector<TreeNode> nodes_;
  std::vector<Stats> left_;
  std::vector<double> last_;
};

std::vector<double> resolve_weights(std::span<const double> weights, std::size_t n) {
  if (weights.empty()) return std::vector<double>(n, 1.0);
  if (weights.size() != n) throw ConfigError("weight count does not match row count");
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("row weights must be finite and >= 0");
  }
  return {weights.begin(), weights.end()};
}

void check_inputs(const Matrix& x, std::span<const double> values, const TreeParams& params) {
  if (x.rows() == 0) throw ConfigError("cannot fit a tree on zero rows");
  if (values.size() != x.rows()) throw ConfigError("target count does not match row count");
  for (double v : values) {
    if (!std::isfinite(v)) throw ConfigError("tree targets must be finite");
  }
  if (params.min_samples_leaf < 1) throw ConfigError("min_samples_leaf must be >= 1");
  if (params.min_samples_split < 2) throw ConfigError("min_samples_split must be >= 2");
}

}  // namespace

Tree fit_regression_tree(const Matrix& x, const ColumnOrder& order,
                         std::span<const double> targets, const TreeParams& params,
                         std::span<const double> weights) {
  check_inputs(x, targets, params);
  auto w = resolve_weights(weights, x.rows());
  // Squared error as a Newton problem: g = -w*y, h = w, lambda = 0. The
  // gain is then exactly the reduction in weighted SSE.
  std::vector<double> g(x.rows()), h(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    g[i] = -w[i] * targets[i];
    h[i] = w[i];
  }
  LevelwiseBuilder builder(x, order, std::move(g), std::move(h), std::move(w), 0.0, 1.0, params);
  return builder.build();
}

Tree fit_regression_tree(const Matrix& x, std::span<const double> targets,
                         const TreeParams& params, std::span<const double> weights) {
  ColumnOrder order(x);
  return fit_regression_tree(x, order, targets, params, weights);
}

Tree fit_newton_tree(const Matrix& x, const ColumnOrder& order,
                     std::span<const double> gradients, std::span<const double> hessians,
                     const TreeParams& params, std::span<const double> weights) {
  check_inputs(x, gradients, params);
  check_inputs(x, hessians, params);
  if (params.reg_lambda < 0.0) throw ConfigError("reg_lambda must be >= 0");
  auto w = resolve_weights(weights, x.rows());
  std::vector<double> g(x.rows()), h(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) {
    g[i] = w[i] * gradients[i];
    h[i] = w[i] * hessians[i];
  }
  LevelwiseBuilder builder(x, order, std::move(g), std::move(h), std::move(w), params.reg_lambda,
                           0.5, params);
  return builder.build();
}

Tree fit_newton_tree(const Matrix& x, std::span<const double> gradients,
                     std::span<const double> hessians, const TreeParams& params,
                     std::span<const double> weights) {
  ColumnOrder order(x);
  return fit_newton_tree(x, order, gradients, hessians, params, weights);
}

}  // namespace glassbox
