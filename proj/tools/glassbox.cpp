// glassbox: synthetic cohorts, cross-validated studies and explanation
// reports for OCT thickness maps.
//
//   glassbox generate --seed 7 --out cohort.csv
//   glassbox run --seed 7 --out run1
//   glassbox explain --run run1 --cell GCL-Zones-LR-GB --out explain1
//   glassbox report --run run1 --out report1
//   glassbox validate --dataset cohort.csv
//
// Exit codes: 0 success, 1 usage, 2 data error, 3 internal error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "glassbox/data_model.hpp"
#include "glassbox/study.hpp"
#include "glassbox/synthgen.hpp"
#include "glassbox/text.hpp"

namespace fs = std::filesystem;
using namespace glassbox;

namespace {

constexpr int kUsage = 1;
constexpr int kDataError = 2;
constexpr int kInternal = 3;

template <class T, class Parse>
std::vector<T> parse_list(const std::vector<std::string>& items, Parse parse) {
  std::vector<T> out;
  for (const auto& item : items) {
    for (auto part : split(item, ',')) {
      if (!trim(part).empty()) out.push_back(parse(trim(part)));
    }
  }
  return out;
}

int exit_code_for(const std::exception& e) {
  if (const auto* nested = dynamic_cast<const std::nested_exception*>(&e)) {
    try {
      nested->rethrow_nested();
    } catch (const std::exception& inner) {
      return exit_code_for(inner);
    } catch (...) {
      return kInternal;
    }
  }
  if (dynamic_cast<const ConfigError*>(&e)) return kUsage;
  if (dynamic_cast<const InputError*>(&e) || dynamic_cast<const ParseError*>(&e) || dynamic_cast<const IntegrityError*>(&e) ||
      dynamic_cast<const ModelFormatError*>(&e) || dynamic_cast<const fs::filesystem_error*>(&e)) {
    return kDataError;
  }
  return kInternal;
}

struct RunFlags {
  std::optional<std::uint64_t> seed;
  std::string dataset, config, out = "glassbox-run", zones;
  std::vector<std::string> layers, features, eyes, models;
  std::size_t k = 10;
  std::size_t threads = 1;
  bool no_plots = false, force = false, all_fold_grids = false, mirror_left = false;
  std::optional<double> min_quality, baseline_auc;
};

ExperimentConfig build_config(const RunFlags& f) {
  ExperimentConfig c;
  if (!f.dataset.empty()) c.dataset = f.dataset;
  if (!f.zones.empty()) c.zone_map = f.zones;
  if (!f.layers.empty()) c.layers = parse_list<Layer>(f.layers, parse_layer);
  if (!f.features.empty()) c.feature_sets = parse_list<FeatureSet>(f.features, parse_feature_set);
  if (!f.eyes.empty()) c.eye_strategies = parse_list<EyeStrategy::Kind>(f.eyes, parse_eye_strategy);
  if (!f.models.empty()) c.models = parse_list<ModelKind>(f.models, parse_model_kind);
  c.k = f.k;
  c.threads = f.threads;
  c.seed = f.seed;
  if (f.seed) c.synthetic.seed = *f.seed;
  c.out_dir = f.out;
  c.plots = !f.no_plots;
  c.all_fold_grids = f.all_fold_grids;
  c.ingest.mirror_left = f.mirror_left;
  c.ingest.min_quality = f.min_quality;
  c.baseline_auc = f.baseline_auc;
  if (!f.config.empty()) c = load_config(f.config, std::move(c));
  return c;
}

int cmd_generate(std::uint64_t seed, const std::string& out, const std::string& config, const std::string& zones,
                 std::optional<double> rho, std::optional<double> cell_sd) {
  CohortSpec spec = default_paper_spec();
  spec.seed = seed;
  if (rho) spec.rho_eye = *rho;
  if (cell_sd) spec.cell_sd_fraction = *cell_sd;
  if (!config.empty()) {
    ExperimentConfig base;
    base.synthetic = spec;
    spec = load_config(config, base).synthetic;
  }
  const ZoneMap zone_map = ZoneMap::load(zones.empty() ? default_zone_map_path() : fs::path(zones));
  const auto cohort = generate_cohort(spec, zone_map);
  if (out == "-") {
    write_dataset(std::cout, cohort);
  } else {
    std::ofstream file(out, std::ios::binary);
    if (!file) throw ConfigError("cannot write " + out);
    write_dataset(file, cohort);
    std::cerr << fmt::format("wrote {} rows to {}\n", cohort.size(), out);
  }
  return 0;
}

int cmd_run(const RunFlags& flags) {
  ExperimentConfig config = build_config(flags);
  if (flags.force && fs::exists(config.out_dir)) fs::remove_all(config.out_dir);
  const StudyResult study = run_study(config);
  std::cerr << fmt::format("{} cells, {} fold rows in {}\n", study.cells.size(),
                           study.cells.size() * config.k, study.run_dir.string());
  for (const auto& c : study.cells) {
    const auto& auc = c.summary.at("auc");
    std::cout << fmt::format("{:<24} best fold {}  median AUC {:.3f}\n", c.cell.id(), c.best_fold, auc.median);
  }
  const ExperimentConfig stored = load_run_config(study.run_dir);
  const auto manifest = report_study(study, stored, study.run_dir / "report");
  std::cerr << fmt::format("report: {} entries in {}\n", manifest.size(), (study.run_dir / "report").string());
  return 0;
}

int cmd_explain(const std::string& run, const std::string& cell_id, std::optional<std::size_t> fold,
                const std::string& out) {
  const auto cell = parse_cell_id(cell_id);
  if (!cell) throw ConfigError(fmt::format("'{}' is not a cell id like GCL-Zones-LR-GB", cell_id));
  const StudyResult study = load_study(run);
  const ExperimentConfig config = load_run_config(run);
  const CellResult* result = study.find(*cell);
  if (!result) throw ConfigError(fmt::format("cell {} is not part of run {}", cell_id, run));
  const std::size_t chosen = fold.value_or(result->best_fold);
  if (chosen >= result->folds.size()) throw ConfigError(fmt::format("fold {} does not exist", chosen));
  StudyResult single = study;
  single.cells = {*result};
  std::vector<CellExplanation> ex{explain_cell(study, config, *cell, chosen)};
  const auto manifest = emit_reports(single, ex, config, out);
  std::cerr << fmt::format("{} fold {}: {} misclassified test samples, {} entries in {}\n", cell_id, chosen,
                           ex.front().failures.size(), manifest.size(), out);
  return 0;
}

int cmd_report(const std::string& run, const std::string& out) {
  const StudyResult study = load_study(run);
  const ExperimentConfig config = load_run_config(run);
  const fs::path target = out.empty() ? fs::path(run) / "report" : fs::path(out);
  const auto manifest = report_study(study, config, target);
  std::cerr << fmt::format("{} entries in {}\n", manifest.size(), target.string());
  return 0;
}

int cmd_validate(const std::string& dataset, const std::string& zones) {
  const ZoneMap zone_map = ZoneMap::load(zones.empty() ? default_zone_map_path() : fs::path(zones));
  std::cout << "zone map: ok (";
  for (int z = 1; z <= static_cast<int>(kZoneCount); ++z) {
    std::cout << (z > 1 ? ", " : "") << 'Z' << z << '=' << zone_map.cell_count(z);
  }
  std::cout << " cells)\n";
  if (dataset.empty()) return 0;
  const auto samples = load_dataset(dataset);
  std::map<std::string, std::set<std::string>> subjects;
  std::map<std::string, std::size_t> rows;
  for (const auto& s : samples) {
    subjects[std::string(to_string(s.group))].insert(s.subject_id);
    ++rows[fmt::format("{} {} {}", to_string(s.group), to_string(s.layer), to_string(s.eye))];
  }
  std::cout << fmt::format("dataset: ok ({} rows)\n", samples.size());
  for (const auto& [group, ids] : subjects) std::cout << fmt::format("  {} subjects: {}\n", group, ids.size());
  for (const auto& [key, n] : rows) std::cout << fmt::format("  {} eyes: {}\n", key, n);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interpretable MS classification from OCT thickness maps"};
  app.require_subcommand(1);

  // generate
  auto* gen = app.add_subcommand("generate", "Write a synthetic cohort calibrated to published statistics");
  std::uint64_t gen_seed = 0;
  std::string gen_out = "-", gen_config, gen_zones;
  std::optional<double> gen_rho, gen_cell_sd;
  gen->add_option("--seed", gen_seed, "Random seed")->required();
  gen->add_option("--out", gen_out, "Output CSV ('-' for stdout)");
  gen->add_option("--config", gen_config, "JSON config with a 'synthetic' section");
  gen->add_option("--zones", gen_zones, "Zone map file");
  gen->add_option("--rho-eye", gen_rho, "Correlation between the eyes of one subject");
  gen->add_option("--cell-sd", gen_cell_sd, "Cell noise sd as a fraction of the zone sd");

  // run
  RunFlags flags;
  auto* run = app.add_subcommand("run", "Cross-validate every axis combination and write reports");
  run->add_option("--seed", flags.seed, "Study seed")->required();
  run->add_option("--dataset", flags.dataset, "Dataset CSV (default: synthetic cohort)");
  run->add_option("--config", flags.config, "JSON config; its keys override flags");
  run->add_option("--out", flags.out, "Output directory");
  run->add_option("--zones", flags.zones, "Zone map file");
  run->add_option("--layers", flags.layers, "GCL,RNFL");
  run->add_option("--features", flags.features, "Zones,Grid");
  run->add_option("--eyes", flags.eyes, "L,R,rand,LR");
  run->add_option("--models", flags.models, "GB,RF,EBM,EBM+i");
  run->add_option("--k", flags.k, "Number of folds");
  run->add_option("--threads", flags.threads, "Folds fitted in parallel");
  run->add_option("--min-quality", flags.min_quality, "Drop scans below this quality");
  run->add_option("--baseline-auc", flags.baseline_auc, "Reference AUC drawn on distribution plots");
  run->add_flag("--mirror-left", flags.mirror_left, "Mirror left-eye grids to right-eye orientation");
  run->add_flag("--no-plots", flags.no_plots, "Skip SVG output");
  run->add_flag("--all-fold-grids", flags.all_fold_grids, "Importance grids for every fold");
  run->add_flag("--force", flags.force, "Replace an existing output directory");

  // explain
  auto* explain = app.add_subcommand("explain", "Explanation artifacts for one cell and fold of a run");
  std::string ex_run, ex_cell, ex_out;
  std::optional<std::size_t> ex_fold;
  explain->add_option("--run", ex_run, "Run directory")->required();
  explain->add_option("--cell", ex_cell, "Cell id, e.g. GCL-Zones-LR-GB")->required();
  explain->add_option("--fold", ex_fold, "Fold (default: best)");
  explain->add_option("--out", ex_out, "Output directory")->required();

  // report
  auto* report = app.add_subcommand("report", "Rebuild the report of a finished run");
  std::string rep_run, rep_out;
  report->add_option("--run", rep_run, "Run directory")->required();
  report->add_option("--out", rep_out, "Output directory (default: <run>/report)");

  // validate
  auto* validate = app.add_subcommand("validate", "Check a dataset and zone map");
  std::string val_dataset, val_zones;
  validate->add_option("--dataset", val_dataset, "Dataset CSV");
  validate->add_option("--zones", val_zones, "Zone map file");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kUsage;
  }

  try {
    if (*gen) return cmd_generate(gen_seed, gen_out, gen_config, gen_zones, gen_rho, gen_cell_sd);
    if (*run) return cmd_run(flags);
    if (*explain) return cmd_explain(ex_run, ex_cell, ex_fold, ex_out);
    if (*report) return cmd_report(rep_run, rep_out);
    if (*validate) return cmd_validate(val_dataset, val_zones);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kInternal;
}
