#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "glassbox/data_model.hpp"
#include "glassbox/error.hpp"
#include "glassbox/evaluation.hpp"
#include "glassbox/report.hpp"
#include "glassbox/synthgen.hpp"
#include "json.hpp"

namespace glassbox {

struct ExperimentConfig {
  // CSV dataset; when absent the synthetic cohort is generated.
  std::optional<std::filesystem::path> dataset;
  CohortSpec synthetic = default_paper_spec();
  IngestOptions ingest;
  std::optional<std::filesystem::path> zone_map;

  std::vector<Layer> layers{Layer::GCL, Layer::RNFL};
  std::vector<FeatureSet> feature_sets{FeatureSet::Zones, FeatureSet::Grid};
  std::vector<EyeStrategy::Kind> eye_strategies{EyeStrategy::Kind::L, EyeStrategy::Kind::R,
                                                EyeStrategy::Kind::Rand, EyeStrategy::Kind::LR};
  std::vector<ModelKind> models{ModelKind::GB, ModelKind::RF, ModelKind::EBM, ModelKind::EBMi};

  std::size_t k = 10;
  std::optional<std::uint64_t> seed;
  std::filesystem::path out_dir = "glassbox-run";
  ModelConfig model;

  bool plots = true;
  bool all_fold_grids = false;
  std::size_t waterfall_items = 10;
  std::optional<double> baseline_auc;
  std::size_t threads = 1;

  // Throws ConfigError when an axis is empty, k < 2 or the seed is unset.
  void validate() const;
};

// Keys missing from the document keep their value in `base`.
ExperimentConfig config_from_json(const nlohmann::json& doc, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});
nlohmann::json config_to_json(const ExperimentConfig& config);

struct CellSpec {
  Layer layer = Layer::GCL;
  FeatureSet features = FeatureSet::Zones;
  EyeStrategy::Kind eyes = EyeStrategy::Kind::LR;
  ModelKind model = ModelKind::GB;

  // e.g. "GCL-Zones-LR-EBMi"; safe as a directory name.
  std::string id() const;
  friend bool operator==(const CellSpec&, const CellSpec&) = default;
};

std::optional<CellSpec> parse_cell_id(std::string_view id);

struct FoldRecord {
  std::size_t fold = 0;
  std::size_t n_train = 0;
  std::size_t n_synthetic = 0;
  std::size_t n_test = 0;
  std::size_t test_ms = 0;
  MetricsReport metrics;
};

struct CellResult {
  CellSpec cell;
  std::uint64_t seed = 0;
  std::vector<FoldRecord> folds;
  std::size_t best_fold = 0;
  std::map<std::string, FiveNumber> summary;  // per metric name
};

struct StudyResult {
  std::filesystem::path run_dir;
  std::uint64_t seed = 0;
  std::vector<CellResult> cells;

  const CellResult* find(const CellSpec& cell) const;
};

// Raised when a cell fails; the original error is nested.
class StudyError : public Error {
 public:
  StudyError(const std::string& what, std::string cell) : Error(what), cell_(std::move(cell)) {}
  const std::string& cell() const { return cell_; }

 private:
  std::string cell_;
};

inline constexpr std::array<std::string_view, 5> kMetricNames{"accuracy", "sensitivity", "specificity",
                                                             "f1", "auc"};
double metric_value(const MetricsReport& m, std::string_view name);

// Highest accuracy, ties by AUC, then by the lower fold index.
std::size_t best_fold(std::span<const FoldRecord> folds);

// Sees every fold outcome as it completes. Called from worker threads
// when config.threads > 1.
using FoldObserver = std::function<void(const CellSpec&, const FoldOutcome&)>;

// Run every axis combination, persisting per cell the fold plan, per-fold
// models and probabilities, and at the study level metrics.csv,
// summary.csv and best_folds.csv. Completed cells stay on disk when a
// later cell fails.
StudyResult run_study(const ExperimentConfig& config, const FoldObserver& observer = {});

// Reads a finished run back from its directory.
StudyResult load_study(const std::filesystem::path& run_dir);
ExperimentConfig load_run_config(const std::filesystem::path& run_dir);

// The cohort of a run, as used for fitting.
std::vector<EyeSample> load_run_samples(const ExperimentConfig& config);

struct FailureCase {
  std::string sample;  // subject id and eye, e.g. "MS012-L"
  int label = 0;
  double probability = 0.0;
  Waterfall waterfall;
};

struct CellExplanation {
  CellSpec cell;
  std::size_t fold = 0;
  std::uint64_t seed = 0;
  FeatureMatrix train;
  FeatureMatrix test;
  std::vector<double> probabilities;
  MetricsReport metrics;
  Model model;
  std::optional<GlobalShapSummary> shap;  // tree ensembles, over the training rows
  std::optional<EbmGlobal> ebm;
  std::vector<FailureCase> failures;  // misclassified test rows
  std::vector<Grid> fold_grids;       // one per fold, grid features only
};

// Reloads the persisted model of one fold and computes its explanation
// artifacts. With all_fold_grids, importance grids of every fold are added.
CellExplanation explain_cell(const StudyResult& study, const ExperimentConfig& config,
                             const CellSpec& cell, std::size_t fold);

struct ManifestEntry {
  std::string path;  // relative to the report directory
  std::string kind;  // "file" or "dir"
  std::string cell;
  std::string fold;
  std::string seed;
  std::string note;
};

// Writes the report tree and manifest.csv into out_dir. Every file in
// out_dir is listed in the manifest, including the manifest itself.
std::vector<ManifestEntry> emit_reports(const StudyResult& study, std::span<const CellExplanation> explanations,
                                        const ExperimentConfig& config, const std::filesystem::path& out_dir);

// Explains the best fold of every cell and emits the reports.
std::vector<ManifestEntry> report_study(const StudyResult& study, const ExperimentConfig& config,
                                        const std::filesystem::path& out_dir);

}  // namespace glassbox
