#include "glassbox/ebm.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <set>

#include <boost/math/distributions/chi_squared.hpp>
#include <fmt/format.h>

#include "glassbox/ensemble.hpp"
#include "glassbox/error.hpp"
#include "glassbox/tree.hpp"

namespace glassbox {

// ---------------------------------------------------------------------------
// Binning

BinEdges::BinEdges(std::vector<double> cuts) : cuts_(std::move(cuts)) {
  for (std::size_t i = 0; i < cuts_.size(); ++i) {
    if (!std::isfinite(cuts_[i])) throw ConfigError("bin cut is not finite");
    if (i > 0 && !(cuts_[i] > cuts_[i - 1])) throw ConfigError("bin cuts must be strictly increasing");
  }
}

namespace {

double midpoint(double lo, double hi) {
  double t = lo + (hi - lo) / 2.0;
  if (t <= lo) t = hi;
  return t;
}

}  // namespace

BinEdges BinEdges::quantile(std::span<const double> values, std::size_t max_bins) {
  if (max_bins < 2) throw ConfigError("at least two bins are required");
  std::vector<double> sorted(values.begin(), values.end());
  for (double v : sorted) {
    if (!std::isfinite(v)) throw ConfigError("cannot bin a non-finite value");
  }
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> distinct = sorted;
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());

  std::vector<double> cuts;
  if (distinct.size() <= max_bins) {
    for (std::size_t i = 1; i < distinct.size(); ++i) cuts.push_back(midpoint(distinct[i - 1], distinct[i]));
    return BinEdges(std::move(cuts));
  }
  const std::size_t n = sorted.size();
  for (std::size_t k = 1; k < max_bins; ++k) {
    const std::size_t pos = std::max<std::size_t>(1, k * n / max_bins);
    // Cut above the run of values containing sorted[pos - 1].
    const double below = sorted[pos - 1];
    auto above = std::upper_bound(sorted.begin(), sorted.end(), below);
    if (above == sorted.end()) continue;
    const double cut = midpoint(below, *above);
    if (cuts.empty() || cut > cuts.back()) cuts.push_back(cut);
  }
  return BinEdges(std::move(cuts));
}

std::size_t BinEdges::bin_of(double value) const {
  if (!std::isfinite(value)) throw ConfigError("cannot bin a non-finite value");
  return static_cast<std::size_t>(std::upper_bound(cuts_.begin(), cuts_.end(), value) -
                                  cuts_.begin());
}

// ---------------------------------------------------------------------------
// Model

EbmModel::EbmModel(double intercept, std::vector<MainTerm> mains, std::vector<BinEdges> pair_bins,
                   std::vector<PairTerm> pairs, EbmParams params)
    : intercept_(intercept),
      mains_(std::move(mains)),
      pair_bins_(std::move(pair_bins)),
      pairs_(std::move(pairs)),
      params_(std::move(params)) {
  for (const auto& m : mains_) {
    if (m.scores.size() != m.bins.bin_count() || m.counts.size() != m.bins.bin_count()) {
      throw ConfigError("main term table does not match its bins");
    }
  }
  if (!pairs_.empty() && pair_bins_.size() != mains_.size()) {
    throw ConfigError("pair bins must cover every feature");
  }
  for (const auto& p : pairs_) {
    if (p.first >= mains_.size() || p.second >= mains_.size() || p.first == p.second) {
      throw ConfigError("pair term refers to an invalid feature");
    }
    const std::size_t cells = pair_bins_[p.first].bin_count() * pair_bins_[p.second].bin_count();
    if (p.scores.size() != cells || p.counts.size() != cells) {
      throw ConfigError("pair term table does not match its bins");
    }
  }
}

double EbmModel::main_contribution(std::size_t feature, std::span<const double> x) const {
  const auto& m = mains_[feature];
  return m.scores[m.bins.bin_of(x[feature])];
}

double EbmModel::pair_contribution(std::size_t pair, std::span<const double> x) const {
  const auto& p = pairs_[pair];
  const std::size_t a = pair_bins_[p.first].bin_of(x[p.first]);
  const std::size_t b = pair_bins_[p.second].bin_of(x[p.second]);
  return p.scores[a * pair_bins_[p.second].bin_count() + b];
}

double EbmModel::predict_raw(std::span<const double> x) const {
  if (x.size() != mains_.size()) {
    throw ConfigError(fmt::format("model expects {} features, input has {}", mains_.size(), x.size()));
  }
  double acc = intercept_;
  for (std::size_t j = 0; j < mains_.size(); ++j) acc += main_contribution(j, x);
  for (std::size_t p = 0; p < pairs_.size(); ++p) acc += pair_contribution(p, x);
  return acc;
}

double EbmModel::predict_proba(std::span<const double> x) const { return sigmoid(predict_raw(x)); }

std::vector<double> EbmModel::predict_proba(const Matrix& x) const {
  std::vector<double> out(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) out[i] = predict_proba(x.row(i));
  return out;
}

// ---------------------------------------------------------------------------
// Training

namespace {

struct Histogram {
  std::vector<double> g, h, c;
  explicit Histogram(std::size_t bins) : g(bins, 0.0), h(bins, 0.0), c(bins, 0.0) {}
};

void check_training_data(const Matrix& x, std::span<const int> y) {
  if (x.rows() != y.size()) throw ConfigError("label count does not match row count");
  if (x.rows() == 0) throw ConfigError("cannot fit on zero rows");
  std::size_t pos = 0;
  for (int v : y) {
    if (v != 0 && v != 1) throw ConfigError("labels must be 0 or 1");
    pos += static_cast<std::size_t>(v);
  }
  if (pos == 0 || pos == y.size()) {
    throw ConfigError("training labels hold a single class; both MS and HC are required");
  }
}

// Greedy depth-limited tree over a contiguous bin range, with the same
// gain rule as fit_newton_tree. Writes the leaf weight of every bin.
void grow_bin_tree(const Histogram& hist, std::size_t lo, std::size_t hi, int depth,
                   const EbmParams& p, std::vector<double>& leaf) {
  double g = 0.0, h = 0.0, c = 0.0;
  for (std::size_t b = lo; b < hi; ++b) {
    g += hist.g[b];
    h += hist.h[b];
    c += hist.c[b];
  }
  const double min_leaf = static_cast<double>(p.min_samples_leaf);
  std::optional<std::size_t> best_cut;
  if (depth < p.max_depth && c >= std::max(2.0, 2.0 * min_leaf)) {
    const double parent = newton::score(g, h, p.reg_lambda);
    double best_gain = 0.0;
    double gl = 0.0, hl = 0.0, cl = 0.0;
    for (std::size_t cut = lo + 1; cut < hi; ++cut) {
      gl += hist.g[cut - 1];
      hl += hist.h[cut - 1];
      cl += hist.c[cut - 1];
      if (hist.c[cut - 1] == 0.0) continue;  // same partition as the previous cut
      if (cl < min_leaf || c - cl < min_leaf) continue;
      if (hl < p.min_hessian || h - hl < p.min_hessian) continue;
      const double children =
          newton::score(gl, hl, p.reg_lambda) + newton::score(g - gl, h - hl, p.reg_lambda);
      const double gain = 0.5 * (children - parent);
      if (!(gain > newton::kRelativeGainFloor * 0.5 * children)) continue;
      if (gain > best_gain) {
        best_gain = gain;
        best_cut = cut;
      }
    }
  }
  if (best_cut) {
    grow_bin_tree(hist, lo, *best_cut, depth + 1, p, leaf);
    grow_bin_tree(hist, *best_cut, hi, depth + 1, p, leaf);
    return;
  }
  const double w = h + p.reg_lambda >= p.min_hessian && h + p.reg_lambda > 0.0
                       ? newton::leaf_weight(g, h, p.reg_lambda)
                       : 0.0;
  for (std::size_t b = lo; b < hi; ++b) leaf[b] = w;
}

void compute_gradients(std::span<const double> scores, std::span<const int> y,
                       std::vector<double>& g, std::vector<double>& h) {
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double p = sigmoid(scores[i]);
    g[i] = p - y[i];
    h[i] = p * (1.0 - p);
  }
}

// Count-weighted mean of a table; subtracting it leaves the table
// centered over the training distribution.
double weighted_mean(std::span<const double> scores, std::span<const double> counts) {
  double num = 0.0, den = 0.0;
  for (std::size_t b = 0; b < scores.size(); ++b) {
    num += counts[b] * scores[b];
    den += counts[b];
  }
  return den > 0.0 ? num / den : 0.0;
}

struct QuadrantSplit {
  std::size_t cut_first = 0;   // rows [0, cut_first) are "low"
  std::size_t cut_second = 0;
  double gain = 0.0;
  std::array<double, 4> leaves{};  // (low,low), (low,high), (high,low), (high,high)
};

// Best single cut on each axis of a 2-D gradient histogram.
class PairHistogram {
 public:
  PairHistogram(std::size_t rows, std::size_t cols)
      : rows_(rows), cols_(cols), g_(rows * cols, 0.0), h_(rows * cols, 0.0), c_(rows * cols, 0.0) {}

  void clear() {
    std::fill(g_.begin(), g_.end(), 0.0);
    std::fill(h_.begin(), h_.end(), 0.0);
    std::fill(c_.begin(), c_.end(), 0.0);
  }
  void add(std::size_t a, std::size_t b, double g, double h) {
    const std::size_t k = a * cols_ + b;
    g_[k] += g;
    h_[k] += h;
    c_[k] += 1.0;
  }
  std::span<const double> counts() const { return c_; }

  std::optional<QuadrantSplit> best_split(double min_leaf, double min_hessian, double lambda) {
    prefix(g_, pg_);
    prefix(h_, ph_);
    prefix(c_, pc_);
    const std::size_t R = rows_, C = cols_;
    auto at = [&](const std::vector<double>& p, std::size_t a, std::size_t b) {
      return p[a * (C + 1) + b];
    };
    const double g = at(pg_, R, C), h = at(ph_, R, C), c = at(pc_, R, C);
    const double parent = newton::score(g, h, lambda);
    std::optional<QuadrantSplit> best;
    for (std::size_t a = 1; a < R; ++a) {
      for (std::size_t b = 1; b < C; ++b) {
        const std::array<double, 4> qc = quadrants(pc_, a, b, c);
        if (qc[0] < min_leaf || qc[1] < min_leaf || qc[2] < min_leaf || qc[3] < min_leaf) continue;
        const std::array<double, 4> qg = quadrants(pg_, a, b, g);
        const std::array<double, 4> qh = quadrants(ph_, a, b, h);
        if (qh[0] < min_hessian || qh[1] < min_hessian || qh[2] < min_hessian || qh[3] < min_hessian) continue;
        double children = 0.0;
        for (int q = 0; q < 4; ++q) children += newton::score(qg[q], qh[q], lambda);
        const double gain = 0.5 * (children - parent);
        if (!(gain > newton::kRelativeGainFloor * 0.5 * children)) continue;
        if (!best || gain > best->gain) {
          QuadrantSplit s;
          s.cut_first = a;
          s.cut_second = b;
          s.gain = gain;
          for (int q = 0; q < 4; ++q) s.leaves[q] = newton::leaf_weight(qg[q], qh[q], lambda);
          best = s;
        }
      }
    }
    return best;
  }

 private:
  void prefix(const std::vector<double>& v, std::vector<double>& p) const {
    const std::size_t C = cols_ + 1;
    p.assign((rows_ + 1) * C, 0.0);
    for (std::size_t a = 0; a < rows_; ++a) {
      for (std::size_t b = 0; b < cols_; ++b) {
        p[(a + 1) * C + b + 1] = v[a * cols_ + b] + p[a * C + b + 1] + p[(a + 1) * C + b] - p[a * C + b];
      }
    }
  }

  std::array<double, 4> quadrants(const std::vector<double>& p, std::size_t a, std::size_t b,
                                  double total) const {
    const std::size_t C = cols_ + 1;
    const double ll = p[a * C + b];
    const double lh = p[a * C + cols_] - ll;
    const double hl = p[rows_ * C + b] - ll;
    return {ll, lh, hl, total - ll - lh - hl};
  }

  std::size_t rows_, cols_;
  std::vector<double> g_, h_, c_;
  std::vector<double> pg_, ph_, pc_;
};

// Twice the best quadrant gain is roughly chi-square with 3 dof when the
// pair carries no signal; Bonferroni over the candidate cuts, 5% level.
double noise_gain_bound(std::size_t rows, std::size_t cols) {
  const double cuts = static_cast<double>((rows - 1) * (cols - 1));
  boost::math::chi_squared dist(3.0);
  return 0.5 * boost::math::quantile(boost::math::complement(dist, 0.05 / cuts));
}

std::vector<BinEdges> make_pair_bins(const Matrix& x, std::size_t max_bins) {
  std::vector<BinEdges> bins;
  bins.reserve(x.cols());
  for (std::size_t j = 0; j < x.cols(); ++j) bins.push_back(BinEdges::quantile(x.column(j), max_bins));
  return bins;
}

std::vector<double> raw_scores(const EbmModel& model, const Matrix& x) {
  std::vector<double> s(x.rows());
  for (std::size_t i = 0; i < x.rows(); ++i) s[i] = model.predict_raw(x.row(i));
  return s;
}

}  // namespace

EbmModel fit_ebm(const Matrix& x, std::span<const int> y, const EbmParams& params,
                 const EbmRoundObserver& observer) {
  check_training_data(x, y);
  if (params.max_bins < 2) throw ConfigError("EBM needs at least two bins per feature");
  if (!(params.learning_rate > 0.0)) throw ConfigError("learning_rate must be > 0");
  const std::size_t n = x.rows(), d = x.cols();

  std::vector<std::size_t> order = params.feature_order;
  if (order.empty()) {
    order.resize(d);
    std::iota(order.begin(), order.end(), 0);
  } else {
    auto sorted = order;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t j = 0; j < sorted.size(); ++j) {
      if (sorted.size() != d || sorted[j] != j) throw ConfigError("feature_order must be a permutation");
    }
  }

  std::vector<MainTerm> mains(d);
  std::vector<std::vector<std::uint32_t>> bin_index(d, std::vector<std::uint32_t>(n));
  for (std::size_t j = 0; j < d; ++j) {
    mains[j].bins = BinEdges::quantile(x.column(j), params.max_bins);
    const std::size_t bins = mains[j].bins.bin_count();
    mains[j].scores.assign(bins, 0.0);
    mains[j].counts.assign(bins, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      bin_index[j][i] = static_cast<std::uint32_t>(mains[j].bins.bin_of(x(i, j)));
      mains[j].counts[bin_index[j][i]] += 1.0;
    }
  }

  double positives = 0.0;
  for (int v : y) positives += v;
  double intercept = logit(positives / static_cast<double>(n));
  std::vector<double> scores(n, intercept), g(n), h(n), leaf;

  for (std::size_t round = 1; round <= params.outer_rounds; ++round) {
    for (std::size_t j : order) {
      compute_gradients(scores, y, g, h);
      auto& term = mains[j];
      Histogram hist(term.bins.bin_count());
      for (std::size_t i = 0; i < n; ++i) {
        const auto b = bin_index[j][i];
        hist.g[b] += g[i];
        hist.h[b] += h[i];
        hist.c[b] += 1.0;
      }
      leaf.assign(hist.g.size(), 0.0);
      grow_bin_tree(hist, 0, hist.g.size(), 0, params, leaf);
      for (std::size_t b = 0; b < leaf.size(); ++b) term.scores[b] += params.learning_rate * leaf[b];
      for (std::size_t i = 0; i < n; ++i) scores[i] += params.learning_rate * leaf[bin_index[j][i]];
    }
    if (observer) observer(round, logistic_loss(scores, y));
  }

  for (auto& term : mains) {
    const double mean = weighted_mean(term.scores, term.counts);
    for (double& s : term.scores) s -= mean;
    intercept += mean;
  }
  return EbmModel(intercept, std::move(mains), {}, {}, params);
}

std::vector<InteractionCandidate> detect_interactions(const Matrix& x, std::span<const int> y,
                                                      const EbmModel& model, std::size_t k) {
  check_training_data(x, y);
  const std::size_t n = x.rows(), d = x.cols();
  if (d != model.n_features()) throw ConfigError("model and matrix disagree on feature count");
  const std::size_t total_pairs = d * (d - 1) / 2;
  if (k > total_pairs) {
    throw ConfigError(fmt::format("requested {} interactions but only {} pairs exist", k, total_pairs));
  }
  if (k == 0) return {};

  const auto& params = model.params();
  const auto bins = make_pair_bins(x, params.max_pair_bins);
  std::vector<std::vector<std::uint32_t>> bin_index(d, std::vector<std::uint32_t>(n));
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < n; ++i) bin_index[j][i] = static_cast<std::uint32_t>(bins[j].bin_of(x(i, j)));
  }
  std::vector<double> g(n), h(n);
  compute_gradients(raw_scores(model, x), y, g, h);

  const double min_leaf = static_cast<double>(std::max<std::size_t>(1, params.min_samples_leaf));
  std::vector<InteractionCandidate> all;
  all.reserve(total_pairs);
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a + 1; b < d; ++b) {
      const std::size_t ra = bins[a].bin_count(), rb = bins[b].bin_count();
      PairHistogram hist(ra, rb);
      for (std::size_t i = 0; i < n; ++i) hist.add(bin_index[a][i], bin_index[b][i], g[i], h[i]);
      const auto split = hist.best_split(min_leaf, params.min_hessian, params.reg_lambda);
      InteractionCandidate cand{a, b, split ? split->gain : 0.0, true};
      if (ra > 1 && rb > 1) cand.weak = cand.gain < noise_gain_bound(ra, rb);
      all.push_back(cand);
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const InteractionCandidate& l, const InteractionCandidate& r) {
    return l.gain > r.gain;
  });
  all.resize(k);
  return all;
}

EbmModel fit_pair_terms(const Matrix& x, std::span<const int> y, const EbmModel& model,
                        std::span<const InteractionCandidate> pairs) {
  if (pairs.empty()) return model;
  check_training_data(x, y);
  const std::size_t n = x.rows(), d = x.cols();
  if (d != model.n_features()) throw ConfigError("model and matrix disagree on feature count");
  const auto& params = model.params();

  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& p : model.pairs()) seen.emplace(p.first, p.second);
  std::vector<PairTerm> terms = model.pairs();
  const std::size_t first_new = terms.size();
  for (const auto& c : pairs) {
    const auto lo = std::min(c.first, c.second), hi = std::max(c.first, c.second);
    if (lo == hi || hi >= d) throw ConfigError(fmt::format("invalid feature pair ({}, {})", c.first, c.second));
    if (!seen.emplace(lo, hi).second) {
      throw ConfigError(fmt::format("feature pair ({}, {}) requested twice", lo, hi));
    }
    terms.push_back(PairTerm{lo, hi, {}, {}});
  }

  std::vector<BinEdges> bins = model.pair_bins().empty() ? make_pair_bins(x, params.max_pair_bins)
                                                         : model.pair_bins();
  std::vector<std::vector<std::uint32_t>> bin_index(d, std::vector<std::uint32_t>(n));
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t i = 0; i < n; ++i) bin_index[j][i] = static_cast<std::uint32_t>(bins[j].bin_of(x(i, j)));
  }
  for (std::size_t t = first_new; t < terms.size(); ++t) {
    auto& term = terms[t];
    const std::size_t cols = bins[term.second].bin_count();
    term.scores.assign(bins[term.first].bin_count() * cols, 0.0);
    term.counts.assign(term.scores.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      term.counts[bin_index[term.first][i] * cols + bin_index[term.second][i]] += 1.0;
    }
  }

  std::vector<double> scores = raw_scores(model, x), g(n), h(n);
  const double min_leaf = static_cast<double>(std::max<std::size_t>(1, params.min_samples_leaf));
  for (std::size_t round = 0; round < params.pair_rounds; ++round) {
    for (std::size_t t = first_new; t < terms.size(); ++t) {
      auto& term = terms[t];
      const std::size_t rows = bins[term.first].bin_count(), cols = bins[term.second].bin_count();
      compute_gradients(scores, y, g, h);
      PairHistogram hist(rows, cols);
      for (std::size_t i = 0; i < n; ++i) {
        hist.add(bin_index[term.first][i], bin_index[term.second][i], g[i], h[i]);
      }
      const auto split = hist.best_split(min_leaf, params.min_hessian, params.reg_lambda);
      // Once the best cut is no better than noise the pair stops growing.
      if (!split || rows < 2 || cols < 2 || split->gain < noise_gain_bound(rows, cols)) continue;
      auto quadrant = [&](std::size_t a, std::size_t b) {
        return (a < split->cut_first ? 0 : 2) + (b < split->cut_second ? 0 : 1);
      };
      for (std::size_t a = 0; a < rows; ++a) {
        for (std::size_t b = 0; b < cols; ++b) {
          term.scores[a * cols + b] += params.learning_rate * split->leaves[quadrant(a, b)];
        }
      }
      for (std::size_t i = 0; i < n; ++i) {
        scores[i] += params.learning_rate *
                     split->leaves[quadrant(bin_index[term.first][i], bin_index[term.second][i])];
      }
    }
  }

  double intercept = model.intercept();
  for (std::size_t t = first_new; t < terms.size(); ++t) {
    auto& term = terms[t];
    const double mean = weighted_mean(term.scores, term.counts);
    for (double& s : term.scores) s -= mean;
    intercept += mean;
  }
  return EbmModel(intercept, model.mains(), std::move(bins), std::move(terms), params);
}

EbmModel fit_ebm_with_interactions(const Matrix& x, std::span<const int> y,
                                   const EbmParams& params) {
  EbmModel mains = fit_ebm(x, y, params);
  const std::size_t d = x.cols();
  const std::size_t k = std::min(params.interactions, d * (d - 1) / 2);
  const auto pairs = detect_interactions(x, y, mains, k);
  return fit_pair_terms(x, y, mains, pairs);
}

// ---------------------------------------------------------------------------
// Explanations

std::string pair_term_name(std::string_view first, std::string_view second) {
  return fmt::format("{} x {}", first, second);
}

namespace {

void check_names(const EbmModel& model, std::span<const std::string> names) {
  if (names.size() != model.n_features()) {
    throw ConfigError(fmt::format("expected {} feature names, got {}", model.n_features(), names.size()));
  }
}

}  // namespace

std::vector<TermContribution> EbmExplanation::sorted_by_magnitude() const {
  std::vector<TermContribution> out = terms;
  std::stable_sort(out.begin(), out.end(), [](const TermContribution& a, const TermContribution& b) {
    return std::abs(a.value) > std::abs(b.value);
  });
  return out;
}

EbmExplanation ebm_explain(const EbmModel& model, std::span<const double> x,
                           std::span<const std::string> feature_names) {
  check_names(model, feature_names);
  if (x.size() != model.n_features()) throw ConfigError("input width does not match the model");
  EbmExplanation e;
  e.intercept = model.intercept();
  double acc = model.intercept();
  for (std::size_t j = 0; j < model.n_features(); ++j) {
    const double v = model.main_contribution(j, x);
    e.terms.push_back(TermContribution{feature_names[j], {j}, v});
    acc += v;
  }
  for (std::size_t p = 0; p < model.pairs().size(); ++p) {
    const auto& term = model.pairs()[p];
    const double v = model.pair_contribution(p, x);
    e.terms.push_back(TermContribution{pair_term_name(feature_names[term.first], feature_names[term.second]),
                                       {term.first, term.second},
                                       v});
    acc += v;
  }
  e.raw_score = acc;
  return e;
}

EbmGlobal ebm_global(const EbmModel& model, std::span<const std::string> feature_names) {
  check_names(model, feature_names);
  EbmGlobal out;
  auto mean_abs = [](std::span<const double> scores, std::span<const double> counts) {
    double num = 0.0, den = 0.0;
    for (std::size_t b = 0; b < scores.size(); ++b) {
      num += counts[b] * std::abs(scores[b]);
      den += counts[b];
    }
    return den > 0.0 ? num / den : 0.0;
  };
  constexpr double inf = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < model.n_features(); ++j) {
    const auto& m = model.mains()[j];
    out.ranking.push_back(TermImportance{feature_names[j], mean_abs(m.scores, m.counts)});
    std::vector<CurvePoint> curve;
    const auto& cuts = m.bins.cuts();
    for (std::size_t b = 0; b < m.scores.size(); ++b) {
      curve.push_back(CurvePoint{b == 0 ? -inf : cuts[b - 1], b == cuts.size() ? inf : cuts[b],
                                 m.scores[b], m.counts[b]});
    }
    out.curves.push_back(std::move(curve));
  }
  for (const auto& p : model.pairs()) {
    const auto name = pair_term_name(feature_names[p.first], feature_names[p.second]);
    out.ranking.push_back(TermImportance{name, mean_abs(p.scores, p.counts)});
    const auto& rows = model.pair_bins()[p.first];
    const auto& cols = model.pair_bins()[p.second];
    PairMap map{name, p.first, p.second, rows.cuts(), cols.cuts(),
                Matrix(rows.bin_count(), cols.bin_count())};
    for (std::size_t a = 0; a < rows.bin_count(); ++a) {
      for (std::size_t b = 0; b < cols.bin_count(); ++b) map.scores(a, b) = p.scores[a * cols.bin_count() + b];
    }
    out.pair_maps.push_back(std::move(map));
  }
  std::stable_sort(out.ranking.begin(), out.ranking.end(),
                   [](const TermImportance& a, const TermImportance& b) { return a.importance > b.importance; });
  return out;
}

}  // namespace glassbox
