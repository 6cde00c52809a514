#pragma once

// Independent reference computations shared by the unit and acceptance
// tests.

#include <cmath>
#include <span>
#include <vector>

#include "glassbox/shap.hpp"
#include "support.hpp"

namespace testsupport {

using namespace glassbox;

// v(S) by direct recursion: known features follow x, unknown ones average
// the children by cover.
inline double cond_exp(const Tree& t, std::size_t node, std::span<const double> x, unsigned mask) {
  const auto& n = t.node(node);
  if (n.is_leaf()) return n.value;
  if (mask & (1u << n.feature)) {
    return cond_exp(t, static_cast<std::size_t>(x[n.feature] < n.threshold ? n.left : n.right), x, mask);
  }
  const auto& l = t.node(n.left);
  const auto& r = t.node(n.right);
  return (l.cover * cond_exp(t, n.left, x, mask) + r.cover * cond_exp(t, n.right, x, mask)) / n.cover;
}

inline double game(const TreeEnsembleView& m, std::span<const double> x, unsigned mask) {
  double acc = 0.0;
  for (const Tree* t : m.trees) acc += cond_exp(*t, 0, x, mask);
  return m.offset + m.scale * acc;
}

inline std::vector<double> oracle_shapley(const TreeEnsembleView& m, std::span<const double> x) {
  const std::size_t d = m.n_features;
  std::vector<double> fact(d + 1, 1.0);
  for (std::size_t i = 1; i <= d; ++i) fact[i] = fact[i - 1] * static_cast<double>(i);
  std::vector<double> v(1u << d);
  for (unsigned s = 0; s < v.size(); ++s) v[s] = game(m, x, s);
  std::vector<double> phi(d, 0.0);
  for (std::size_t i = 0; i < d; ++i) {
    for (unsigned s = 0; s < v.size(); ++s) {
      if (s & (1u << i)) continue;
      const auto k = static_cast<std::size_t>(__builtin_popcount(s));
      phi[i] += fact[k] * fact[d - k - 1] / fact[d] * (v[s | (1u << i)] - v[s]);
    }
  }
  return phi;
}

struct RandomEnsemble {
  std::vector<Tree> trees;
  TreeEnsembleView view;
};

inline RandomEnsemble random_ensemble(Rng& rng) {
  RandomEnsemble e;
  const std::size_t d = 1 + uniform_index(rng, 8);
  const std::size_t n_trees = 1 + uniform_index(rng, 5);
  for (std::size_t t = 0; t < n_trees; ++t)
    e.trees.push_back(testsupport::random_tree(rng, d, 1 + static_cast<int>(uniform_index(rng, 4))));
  e.view.offset = normal(rng, 0, 1);
  e.view.scale = 0.1 + uniform01(rng);
  e.view.n_features = d;
  for (const auto& t : e.trees) e.view.trees.push_back(&t);
  return e;
}

// AUC as the fraction of positive/negative pairs ranked correctly, ties
// counting one half.
inline double oracle_auc(std::span<const double> s, std::span<const int> y) {
  double good = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      if (y[i] == 1 && y[j] == 0) {
        pairs += 1;
        good += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return good / pairs;
}

}  // namespace testsupport
