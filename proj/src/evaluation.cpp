#include "glassbox/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "glassbox/error.hpp"
#include "glassbox/random.hpp"

namespace glassbox {

// ---------------------------------------------------------------------------
// Folds

FoldPlan subject_kfold(std::span<const EyeSample> samples, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k-fold cross-validation needs k >= 2");
  std::vector<std::string> order;
  std::unordered_map<std::string, Group> group_of;
  for (const auto& s : samples) {
    auto [it, inserted] = group_of.try_emplace(s.subject_id, s.group);
    if (inserted) {
      order.push_back(s.subject_id);
    } else if (it->second != s.group) {
      throw IntegrityError(fmt::format("subject {} is recorded in both groups", s.subject_id));
    }
  }
  if (k > order.size()) {
    throw ConfigError(fmt::format("k = {} exceeds the {} available subjects", k, order.size()));
  }
  std::vector<std::string> hc, ms;
  for (const auto& id : order) (group_of[id] == Group::MS ? ms : hc).push_back(id);
  Rng rng(seed);
  shuffle(hc.begin(), hc.end(), rng);
  shuffle(ms.begin(), ms.end(), rng);

  std::vector<std::string> dealt;
  dealt.insert(dealt.end(), hc.begin(), hc.end());
  dealt.insert(dealt.end(), ms.begin(), ms.end());

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.folds.resize(k);
  std::vector<std::size_t> assigned(dealt.size());
  for (std::size_t i = 0; i < dealt.size(); ++i) assigned[i] = i % k;
  for (std::size_t f = 0; f < k; ++f) {
    for (std::size_t i = 0; i < dealt.size(); ++i) {
      (assigned[i] == f ? plan.folds[f].test_subjects : plan.folds[f].train_subjects).push_back(dealt[i]);
    }
  }
  return plan;
}

void write_fold_plan(std::ostream& out, const FoldPlan& plan) {
  out << "fold,subject_id,split\n";
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    for (const auto& id : plan.folds[f].train_subjects) out << f << ',' << id << ",train\n";
    for (const auto& id : plan.folds[f].test_subjects) out << f << ',' << id << ",test\n";
  }
}

std::vector<std::string> leaked_subjects(const Fold& fold) {
  std::unordered_set<std::string> train(fold.train_subjects.begin(), fold.train_subjects.end());
  std::vector<std::string> out;
  for (const auto& id : fold.test_subjects) {
    if (train.count(id)) out.push_back(id);
  }
  return out;
}

// ---------------------------------------------------------------------------
// SMOTE

SmoteResult smote(const Matrix& minority, std::size_t k_neighbors, std::size_t n_synthetic,
                  std::uint64_t seed) {
  const std::size_t m = minority.rows();
  if (k_neighbors < 1) throw ConfigError("SMOTE needs k_neighbors >= 1");
  if (m <= k_neighbors) {
    throw ConfigError(fmt::format("SMOTE with k = {} needs at least {} minority rows, got {}",
                                  k_neighbors, k_neighbors + 1, m));
  }
  const std::size_t d = minority.cols();
  std::vector<std::vector<std::size_t>> neighbors(m);
  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t i = 0; i < m; ++i) {
    dist.clear();
    for (std::size_t j = 0; j < m; ++j) {
      if (j == i) continue;
      double acc = 0.0;
      for (std::size_t c = 0; c < d; ++c) {
        const double diff = minority(i, c) - minority(j, c);
        acc += diff * diff;
      }
      dist.emplace_back(acc, j);
    }
    std::partial_sort(dist.begin(), dist.begin() + static_cast<long>(k_neighbors), dist.end());
    for (std::size_t r = 0; r < k_neighbors; ++r) neighbors[i].push_back(dist[r].second);
  }

  SmoteResult out;
  out.rows = Matrix(0, d);
  Rng rng(seed);
  std::vector<double> row(d);
  for (std::size_t s = 0; s < n_synthetic; ++s) {
    const std::size_t base = uniform_index(rng, m);
    const std::size_t nn = neighbors[base][uniform_index(rng, k_neighbors)];
    const double u = uniform01(rng);
    for (std::size_t c = 0; c < d; ++c) {
      row[c] = minority(base, c) + u * (minority(nn, c) - minority(base, c));
    }
    out.rows.append_row(row);
    out.origins.push_back(SmoteOrigin{base, nn, u});
  }
  return out;
}

FeatureMatrix balance_with_smote(const FeatureMatrix& train, std::size_t k_neighbors,
                                 std::uint64_t seed, SmoteResult* info) {
  std::size_t positives = 0;
  for (int v : train.labels) positives += static_cast<std::size_t>(v);
  const std::size_t negatives = train.size() - positives;
  FeatureMatrix out = train;
  if (positives == negatives || positives == 0 || negatives == 0) {
    if (info) *info = SmoteResult{Matrix(0, train.dims()), {}};
    return out;
  }
  const int minority_label = positives < negatives ? 1 : 0;
  Matrix minority(0, train.dims());
  std::vector<std::size_t> minority_rows;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (train.labels[i] == minority_label) {
      minority.append_row(train.rows.row(i));
      minority_rows.push_back(i);
    }
  }
  const std::size_t needed = std::max(positives, negatives) - std::min(positives, negatives);
  SmoteResult result = smote(minority, k_neighbors, needed, seed);
  for (std::size_t s = 0; s < result.rows.rows(); ++s) {
    out.rows.append_row(result.rows.row(s));
    out.labels.push_back(minority_label);
    out.subject_ids.push_back(fmt::format("synthetic-{}", s));
    out.laterality.push_back(train.laterality[minority_rows[result.origins[s].base]]);
  }
  if (info) *info = std::move(result);
  return out;
}

// ---------------------------------------------------------------------------
// Metrics

namespace {

void check_scores(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw ConfigError("score and label counts differ");
  for (int v : labels) {
    if (v != 0 && v != 1) throw ConfigError("labels must be 0 or 1");
  }
}

std::pair<std::size_t, std::size_t> class_counts(std::span<const int> labels) {
  std::size_t pos = 0;
  for (int v : labels) pos += static_cast<std::size_t>(v);
  return {pos, labels.size() - pos};
}

double percent(double num, double den) {
  return den > 0.0 ? 100.0 * num / den : std::numeric_limits<double>::quiet_NaN();
}

}  // namespace

bool operator==(const MetricsReport& a, const MetricsReport& b) {
  auto same = [](double x, double y) { return x == y || (std::isnan(x) && std::isnan(y)); };
  return a.tp == b.tp && a.fp == b.fp && a.tn == b.tn && a.fn == b.fn && same(a.accuracy, b.accuracy) &&
         same(a.sensitivity, b.sensitivity) && same(a.specificity, b.specificity) && same(a.f1, b.f1) &&
         a.auc == b.auc;
}

double pairwise_auc(std::span<const double> scores, std::span<const int> labels) {
  check_scores(scores, labels);
  const auto [pos, neg] = class_counts(labels);
  if (pos == 0 || neg == 0) throw ConfigError("AUC is undefined when only one class is present");
  double wins = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      if (scores[i] > scores[j]) {
        wins += 1.0;
      } else if (scores[i] == scores[j]) {
        wins += 0.5;
      }
    }
  }
  return wins / (static_cast<double>(pos) * static_cast<double>(neg));
}

double trapezoid_auc(std::span<const double> scores, std::span<const int> labels) {
  check_scores(scores, labels);
  const auto [pos, neg] = class_counts(labels);
  if (pos == 0 || neg == 0) throw ConfigError("AUC is undefined when only one class is present");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  // Area in (false positive count) x (true positive count) units.
  double area = 0.0, tp = 0.0, fp = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    double dtp = 0.0, dfp = 0.0;
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) (labels[order[i]] == 1 ? dtp : dfp) += 1.0;
    area += dfp * (2.0 * tp + dtp) / 2.0;
    tp += dtp;
    fp += dfp;
  }
  return area / (static_cast<double>(pos) * static_cast<double>(neg));
}

MetricsReport compute_metrics(std::span<const double> probabilities, std::span<const int> labels,
                              double threshold) {
  check_scores(probabilities, labels);
  MetricsReport r;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = probabilities[i] > threshold;
    if (labels[i] == 1) {
      (predicted ? r.tp : r.fn) += 1;
    } else {
      (predicted ? r.fp : r.tn) += 1;
    }
  }
  const auto tp = static_cast<double>(r.tp), fp = static_cast<double>(r.fp),
             tn = static_cast<double>(r.tn), fn = static_cast<double>(r.fn);
  r.accuracy = percent(tp + tn, tp + tn + fp + fn);
  r.sensitivity = percent(tp, tp + fn);
  r.specificity = percent(tn, tn + fp);
  r.f1 = percent(2.0 * tp, 2.0 * tp + fp + fn);
  const auto [pos, neg] = class_counts(labels);
  if (pos > 0 && neg > 0) r.auc = pairwise_auc(probabilities, labels);
  return r;
}

WelchResult welch_t_test(double mean1, double sd1, std::size_t n1, double mean2, double sd2,
                         std::size_t n2) {
  if (n1 < 2 || n2 < 2) throw ConfigError("Welch's t-test needs at least two observations per group");
  if (!(sd1 > 0.0) || !(sd2 > 0.0)) throw ConfigError("Welch's t-test needs positive standard deviations");
  const double v1 = sd1 * sd1 / static_cast<double>(n1);
  const double v2 = sd2 * sd2 / static_cast<double>(n2);
  WelchResult r;
  r.t = (mean1 - mean2) / std::sqrt(v1 + v2);
  r.df = (v1 + v2) * (v1 + v2) /
         (v1 * v1 / static_cast<double>(n1 - 1) + v2 * v2 / static_cast<double>(n2 - 1));
  const boost::math::students_t dist(r.df);
  r.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(r.t)));
  r.p = std::min(r.p, 1.0);
  return r;
}

// ---------------------------------------------------------------------------
// run_fold

std::string_view to_string(ModelKind k) {
  switch (k) {
    case ModelKind::GB:
      return "GB";
    case ModelKind::RF:
      return "RF";
    case ModelKind::EBM:
      return "EBM";
    case ModelKind::EBMi:
      return "EBM+i";
  }
  return "?";
}

ModelKind parse_model_kind(std::string_view s) {
  if (s == "GB" || s == "XGB") return ModelKind::GB;
  if (s == "RF") return ModelKind::RF;
  if (s == "EBM") return ModelKind::EBM;
  if (s == "EBM+i" || s == "EBMi") return ModelKind::EBMi;
  throw ConfigError(fmt::format("unknown model kind '{}'", s));
}

FoldOutcome run_fold(const Fold& fold, std::size_t fold_index, std::span<const EyeSample> samples,
                     FeatureSet features, const ZoneMap& zones, ModelKind kind,
                     const ModelConfig& config, std::uint64_t seed) {
  if (const auto leaked = leaked_subjects(fold); !leaked.empty()) {
    throw IntegrityError(fmt::format("fold {} leaks {} subject(s) between train and test, e.g. {}",
                                     fold_index, leaked.size(), leaked.front()));
  }
  const std::unordered_set<std::string> train_ids(fold.train_subjects.begin(), fold.train_subjects.end());
  const std::unordered_set<std::string> test_ids(fold.test_subjects.begin(), fold.test_subjects.end());
  std::vector<EyeSample> train_samples, test_samples;
  for (const auto& s : samples) {
    if (train_ids.count(s.subject_id)) {
      train_samples.push_back(s);
    } else if (test_ids.count(s.subject_id)) {
      test_samples.push_back(s);
    }
  }
  if (train_samples.empty() || test_samples.empty()) {
    throw ConfigError(fmt::format("fold {} has an empty train or test side", fold_index));
  }

  FoldOutcome out;
  out.fold = fold_index;
  out.train = build_feature_matrix(train_samples, features, zones);
  out.test = build_feature_matrix(test_samples, features, zones);
  const FeatureMatrix balanced =
      balance_with_smote(out.train, config.smote_neighbors, derive_seed(seed, "smote"), &out.smote);
  out.synthetic_rows = balanced.size() - out.train.size();
  std::size_t positives = 0;
  for (int v : out.train.labels) positives += static_cast<std::size_t>(v);
  out.minority_label = positives * 2 <= out.train.size() ? 1 : 0;

  switch (kind) {
    case ModelKind::GB:
      out.model = fit_gradient_boosting(balanced.rows, balanced.labels, config.boosting);
      break;
    case ModelKind::RF: {
      ForestParams fp = config.forest;
      fp.seed = derive_seed(seed, "forest");
      out.model = fit_random_forest(balanced.rows, balanced.labels, fp);
      break;
    }
    case ModelKind::EBM:
      out.model = fit_ebm(balanced.rows, balanced.labels, config.ebm);
      break;
    case ModelKind::EBMi:
      out.model = fit_ebm_with_interactions(balanced.rows, balanced.labels, config.ebm);
      break;
  }
  out.probabilities = predict_proba(out.model, out.test.rows);
  out.metrics = compute_metrics(out.probabilities, out.test.labels);
  return out;
}

}  // namespace glassbox
