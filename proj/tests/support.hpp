#pragma once

// Shared fixtures and generators for the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "glassbox/data_model.hpp"
#include "glassbox/matrix.hpp"
#include "glassbox/random.hpp"
#include "glassbox/tree.hpp"

namespace testsupport {

using namespace glassbox;

inline ZoneMap default_zones() { return ZoneMap::load(default_zone_map_path()); }

inline EyeSample make_sample(std::string id, Group g, Laterality eye, Layer layer, double fill = 30.0) {
  EyeSample s;
  s.subject_id = std::move(id);
  s.group = g;
  s.age = 40.0;
  s.sex = Sex::F;
  s.eye = eye;
  s.layer = layer;
  s.grid.fill(fill);
  s.quality = 30.0;
  return s;
}

inline Matrix random_matrix(Rng& rng, std::size_t n, std::size_t d, double lo = 0.0, double hi = 1.0) {
  Matrix m(n, d);
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < d; ++c) m(r, c) = lo + (hi - lo) * uniform01(rng);
  return m;
}

inline std::vector<int> random_labels(Rng& rng, std::size_t n) {
  std::vector<int> y(n);
  for (auto& v : y) v = uniform01(rng) < 0.5 ? 0 : 1;
  y[0] = 0;
  y[1] = 1;
  return y;
}

// Random tree with positive covers, built top-down: each internal node
// splits its cover at a random fraction. Depth is at most max_depth.
inline void grow_random(Rng& rng, std::vector<TreeNode>& nodes, std::size_t at, int depth, int max_depth,
                        std::size_t d, std::size_t& leaves, std::size_t max_leaves) {
  const bool split = depth < max_depth && leaves + 1 <= max_leaves && uniform01(rng) < 0.75;
  if (!split) {
    nodes[at].value = normal(rng, 0.0, 1.0);
    return;
  }
  ++leaves;  // one leaf becomes two
  const int left = static_cast<int>(nodes.size());
  nodes[at].feature = static_cast<int>(uniform_index(rng, d));
  nodes[at].threshold = uniform01(rng);
  nodes[at].left = left;
  nodes[at].right = left + 1;
  const double frac = 0.05 + 0.9 * uniform01(rng);
  const double cover = nodes[at].cover;
  nodes.resize(nodes.size() + 2);
  nodes[left].cover = cover * frac;
  nodes[left + 1].cover = cover - nodes[left].cover;
  grow_random(rng, nodes, left, depth + 1, max_depth, d, leaves, max_leaves);
  grow_random(rng, nodes, left + 1, depth + 1, max_depth, d, leaves, max_leaves);
}

inline Tree random_tree(Rng& rng, std::size_t d, int max_depth, std::size_t max_leaves = 16) {
  std::vector<TreeNode> nodes(1);
  nodes[0].cover = 10.0 + 90.0 * uniform01(rng);
  std::size_t leaves = 1;
  grow_random(rng, nodes, 0, 0, max_depth, d, leaves, max_leaves);
  return Tree(std::move(nodes));
}

inline std::vector<double> random_point(Rng& rng, std::size_t d) {
  std::vector<double> x(d);
  for (auto& v : x) v = uniform01(rng);
  return x;
}

// Average ranks (ties share the mean rank), then Pearson on the ranks.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  auto ranks = [](const std::vector<double>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto x, auto y) { return v[x] < v[y]; });
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t t = i; t <= j; ++t) r[idx[t]] = 0.5 * static_cast<double>(i + j);
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) ma += ra[i], mb += rb[i];
  ma /= static_cast<double>(ra.size());
  mb /= static_cast<double>(rb.size());
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

}  // namespace testsupport
