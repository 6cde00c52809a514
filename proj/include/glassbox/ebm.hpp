#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "glassbox/matrix.hpp"

namespace glassbox {

// Ascending cut points splitting one feature into cuts.size() + 1 bins.
// A value goes to bin i when cuts[i-1] <= value < cuts[i]; values beyond
// the training range land in the extreme bins.
class BinEdges {
 public:
  BinEdges() = default;
  explicit BinEdges(std::vector<double> cuts);  // throws unless strictly increasing

  // Up to max_bins quantile bins; every distinct value gets its own bin
  // when there are no more than max_bins of them. Cuts sit at midpoints
  // between adjacent distinct training values.
  static BinEdges quantile(std::span<const double> values, std::size_t max_bins);

  std::size_t bin_count() const { return cuts_.size() + 1; }
  std::size_t bin_of(double value) const;
  const std::vector<double>& cuts() const { return cuts_; }

  friend bool operator==(const BinEdges&, const BinEdges&) = default;

 private:
  std::vector<double> cuts_;
};

struct EbmParams {
  std::size_t max_bins = 256;
  std::size_t max_pair_bins = 32;
  double learning_rate = 0.01;
  std::size_t outer_rounds = 500;
  std::size_t pair_rounds = 500;
  int max_depth = 2;  // per-feature trees
  std::size_t min_samples_leaf = 2;
  double reg_lambda = 0.0;
  // Splits need at least this hessian sum on each side; leaves below it
  // stay at zero.
  double min_hessian = 1e-4;
  std::size_t interactions = 10;  // K when pairs are requested
  // Cyclic visiting order of the main terms; empty means 0, 1, ..., d-1.
  std::vector<std::size_t> feature_order;
};

// f_j as a lookup table over the bins of feature j.
struct MainTerm {
  BinEdges bins;
  std::vector<double> scores;
  std::vector<double> counts;  // training rows per bin
};

// f_ij over the product of the coarser pair bins; row-major in (first, second).
struct PairTerm {
  std::size_t first = 0;
  std::size_t second = 0;
  std::vector<double> scores;
  std::vector<double> counts;
};

class EbmModel {
 public:
  EbmModel() = default;
  EbmModel(double intercept, std::vector<MainTerm> mains, std::vector<BinEdges> pair_bins,
           std::vector<PairTerm> pairs, EbmParams params);

  double intercept() const { return intercept_; }
  const std::vector<MainTerm>& mains() const { return mains_; }
  const std::vector<BinEdges>& pair_bins() const { return pair_bins_; }
  const std::vector<PairTerm>& pairs() const { return pairs_; }
  const EbmParams& params() const { return params_; }
  std::size_t n_features() const { return mains_.size(); }

  // intercept + sum of main terms + sum of pair terms, in that order.
  double predict_raw(std::span<const double> x) const;
  double predict_proba(std::span<const double> x) const;
  std::vector<double> predict_proba(const Matrix& x) const;

  // Table value of one term at x.
  double main_contribution(std::size_t feature, std::span<const double> x) const;
  double pair_contribution(std::size_t pair, std::span<const double> x) const;

 private:
  double intercept_ = 0.0;
  std::vector<MainTerm> mains_;
  std::vector<BinEdges> pair_bins_;
  std::vector<PairTerm> pairs_;
  EbmParams params_;
};

// Called after each outer round with the training log-loss.
using EbmRoundObserver = std::function<void(std::size_t round, double loss)>;

// Main-effects model: cyclic boosting of one depth-limited tree per
// feature per round, then each f_j is shifted to zero training mean.
EbmModel fit_ebm(const Matrix& x, std::span<const int> y, const EbmParams& params,
                 const EbmRoundObserver& observer = {});

struct InteractionCandidate {
  std::size_t first = 0;
  std::size_t second = 0;
  double gain = 0.0;
  // Gain is within what the best of the candidate quadrant cuts reaches on
  // pure noise (chi-square bound, Bonferroni over cuts, 5% level).
  bool weak = false;
};

// Scores every feature pair on the residual gradients of `model` by the
// best single quadrant split and returns the K strongest, ties broken by
// (first, second). Throws ConfigError when K exceeds d(d-1)/2.
std::vector<InteractionCandidate> detect_interactions(const Matrix& x, std::span<const int> y,
                                                      const EbmModel& model, std::size_t k);

// Boosts pair tables on top of the frozen terms of `model`.
EbmModel fit_pair_terms(const Matrix& x, std::span<const int> y, const EbmModel& model,
                        std::span<const InteractionCandidate> pairs);

// fit_ebm, then detect_interactions with params.interactions, then
// fit_pair_terms.
EbmModel fit_ebm_with_interactions(const Matrix& x, std::span<const int> y,
                                   const EbmParams& params);

struct TermContribution {
  std::string term;
  std::vector<std::size_t> features;
  double value = 0.0;
};

struct EbmExplanation {
  double intercept = 0.0;
  std::vector<TermContribution> terms;  // mains in feature order, then pairs
  double raw_score = 0.0;

  // Terms ordered by |value| descending, ties by term position.
  std::vector<TermContribution> sorted_by_magnitude() const;
};

// Exact term decomposition of one prediction.
EbmExplanation ebm_explain(const EbmModel& model, std::span<const double> x,
                           std::span<const std::string> feature_names);

struct CurvePoint {
  double lower = 0.0;  // -inf for the first bin
  double upper = 0.0;  // +inf for the last bin
  double score = 0.0;
  double count = 0.0;
};

struct PairMap {
  std::string term;
  std::size_t first = 0;
  std::size_t second = 0;
  std::vector<double> first_cuts;
  std::vector<double> second_cuts;
  Matrix scores;  // rows: first-feature bins
};

struct TermImportance {
  std::string term;
  double importance = 0.0;  // count-weighted mean |score|
};

struct EbmGlobal {
  std::vector<TermImportance> ranking;  // descending, ties by term position
  std::vector<std::vector<CurvePoint>> curves;  // one per feature
  std::vector<PairMap> pair_maps;
};

EbmGlobal ebm_global(const EbmModel& model, std::span<const std::string> feature_names);

std::string pair_term_name(std::string_view first, std::string_view second);

}  // namespace glassbox
