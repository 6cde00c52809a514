#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glassbox/data_model.hpp"
#include "glassbox/ebm.hpp"
#include "glassbox/ensemble.hpp"
#include "glassbox/model_io.hpp"

namespace glassbox {

// ---------------------------------------------------------------------------
// Subject-level folds

struct Fold {
  std::vector<std::string> train_subjects;
  std::vector<std::string> test_subjects;
};

struct FoldPlan {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  bool stratified = true;
  std::vector<Fold> folds;
};

// Partitions subjects (not eyes) into k test folds, stratified by group:
// subjects of each group are shuffled with the seed and dealt round-robin,
// HC first, then MS continuing the rotation. Every eye of a subject lands
// on the same side. Throws ConfigError when k < 2 or k exceeds the number
// of subjects, IntegrityError when a subject carries two groups.
FoldPlan subject_kfold(std::span<const EyeSample> samples, std::size_t k, std::uint64_t seed);

// CSV with columns fold,subject_id,split.
void write_fold_plan(std::ostream& out, const FoldPlan& plan);

// Subject ids present on both sides of a fold (empty for a valid plan).
std::vector<std::string> leaked_subjects(const Fold& fold);

// ---------------------------------------------------------------------------
// SMOTE

struct SmoteOrigin {
  std::size_t base = 0;
  std::size_t neighbor = 0;
  double u = 0.0;
};

struct SmoteResult {
  Matrix rows;
  std::vector<SmoteOrigin> origins;  // indices into the minority matrix
};

// Each synthetic row is x_b + u (x_nn - x_b) with b uniform over the
// minority rows, nn uniform over b's k nearest minority neighbors
// (Euclidean, ties by index) and u ~ U[0,1). Throws ConfigError when the
// minority has k_neighbors rows or fewer.
SmoteResult smote(const Matrix& minority, std::size_t k_neighbors, std::size_t n_synthetic,
                  std::uint64_t seed);

// Appends synthetic minority rows until both classes have equal counts.
// Synthetic rows carry subject id "synthetic-<n>".
FeatureMatrix balance_with_smote(const FeatureMatrix& train, std::size_t k_neighbors,
                                 std::uint64_t seed, SmoteResult* info = nullptr);

// ---------------------------------------------------------------------------
// Metrics

struct MetricsReport {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  // Percentages; NaN when the denominator is zero.
  double accuracy = 0.0;
  double sensitivity = 0.0;
  double specificity = 0.0;
  double f1 = 0.0;
  std::optional<double> auc;  // nullopt when the labels hold one class

  std::size_t size() const { return tp + fp + tn + fn; }
  // NaN fields compare equal to NaN, so a report equals its own recomputation.
  friend bool operator==(const MetricsReport& a, const MetricsReport& b);
};

// MS (label 1) is the positive class; a sample is predicted MS when its
// probability is strictly above the threshold.
MetricsReport compute_metrics(std::span<const double> probabilities, std::span<const int> labels,
                              double threshold = 0.5);

// P(score_MS > score_HC) + 1/2 P(tie). Throws ConfigError on one class.
double pairwise_auc(std::span<const double> scores, std::span<const int> labels);
// Trapezoidal area under the ROC curve with tied scores as one step.
double trapezoid_auc(std::span<const double> scores, std::span<const int> labels);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

// Welch's unequal-variance t-test from summary statistics.
WelchResult welch_t_test(double mean1, double sd1, std::size_t n1, double mean2, double sd2,
                         std::size_t n2);

// ---------------------------------------------------------------------------
// One fold of the protocol

enum class ModelKind { GB, RF, EBM, EBMi };
std::string_view to_string(ModelKind k);
ModelKind parse_model_kind(std::string_view s);

struct ModelConfig {
  BoostingParams boosting;
  ForestParams forest;
  EbmParams ebm;
  std::size_t smote_neighbors = 5;
};

struct FoldOutcome {
  std::size_t fold = 0;
  FeatureMatrix train;     // real training rows, before oversampling
  std::size_t synthetic_rows = 0;
  SmoteResult smote;
  std::size_t minority_label = 1;
  FeatureMatrix test;
  std::vector<double> probabilities;  // aligned with test rows
  MetricsReport metrics;
  Model model;
};

// Materialize train/test matrices, oversample the training side with
// SMOTE, fit, predict the untouched test side and score it. Every fitted
// statistic sees training rows only. Throws IntegrityError if any subject
// is on both sides of the fold.
FoldOutcome run_fold(const Fold& fold, std::size_t fold_index, std::span<const EyeSample> samples,
                     FeatureSet features, const ZoneMap& zones, ModelKind kind,
                     const ModelConfig& config, std::uint64_t seed);

}  // namespace glassbox
