#include "glassbox/study.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>

#include "glassbox/random.hpp"
#include "glassbox/shap.hpp"
#include "glassbox/svg.hpp"
#include "glassbox/text.hpp"

namespace glassbox {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Config

void ExperimentConfig::validate() const {
  if (layers.empty() || feature_sets.empty() || eye_strategies.empty() || models.empty()) {
    throw ConfigError("every study axis needs at least one value");
  }
  if (k < 2) throw ConfigError("k must be at least 2");
  if (!seed) throw ConfigError("a seed is required");
  if (out_dir.empty()) throw ConfigError("an output directory is required");
  synthetic.validate();
}

namespace {

template <class T, class Parse>
std::vector<T> parse_axis(const json& j, Parse parse) {
  std::vector<T> out;
  for (const auto& v : j) out.push_back(parse(v.get<std::string>()));
  return out;
}

template <class T>
json axis_to_json(const std::vector<T>& values) {
  json arr = json::array();
  for (const auto& v : values) arr.push_back(std::string(to_string(v)));
  return arr;
}

void read_group(const json& j, GroupCohort& g) {
  g.subjects = j.value("subjects", g.subjects);
  g.left_eyes = j.value("left_eyes", g.left_eyes);
  g.right_eyes = j.value("right_eyes", g.right_eyes);
  g.males = j.value("males", g.males);
  g.age_mean = j.value("age_mean", g.age_mean);
  g.age_sd = j.value("age_sd", g.age_sd);
  for (Layer layer : {Layer::GCL, Layer::RNFL}) {
    const std::string key(to_string(layer));
    if (!j.contains(key)) continue;
    const auto& zones = j.at(key);
    if (!zones.is_array() || zones.size() != kZoneCount) {
      throw ConfigError(fmt::format("synthetic {} statistics need {} [mean, sd] pairs", key, kZoneCount));
    }
    for (std::size_t z = 0; z < kZoneCount; ++z) {
      g.zones[static_cast<std::size_t>(layer)][z] = ZoneStat{zones[z].at(0).get<double>(), zones[z].at(1).get<double>()};
    }
  }
}

json group_to_json(const GroupCohort& g) {
  json out{{"subjects", g.subjects}, {"left_eyes", g.left_eyes}, {"right_eyes", g.right_eyes},
           {"males", g.males},       {"age_mean", g.age_mean},   {"age_sd", g.age_sd}};
  for (Layer layer : {Layer::GCL, Layer::RNFL}) {
    json zones = json::array();
    for (const auto& z : g.zones[static_cast<std::size_t>(layer)]) zones.push_back(json::array({z.mean, z.sd}));
    out[std::string(to_string(layer))] = zones;
  }
  return out;
}

std::size_t json_size(const json& j, const char* key, std::size_t fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned()) throw ConfigError(fmt::format("'{}' must be a non-negative integer", key));
  return v.get<std::size_t>();
}

}  // namespace

ExperimentConfig config_from_json(const json& doc, ExperimentConfig c) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  try {
    if (doc.contains("dataset")) {
      if (doc["dataset"].is_null()) {
        c.dataset.reset();
      } else {
        c.dataset = doc["dataset"].get<std::string>();
      }
    }
    if (doc.contains("zone_map")) {
      if (doc["zone_map"].is_null()) {
        c.zone_map.reset();
      } else {
        c.zone_map = doc["zone_map"].get<std::string>();
      }
    }
    if (doc.contains("seed")) {
      c.seed = doc["seed"].get<std::uint64_t>();
      c.synthetic.seed = *c.seed;
    }
    if (doc.contains("synthetic")) {
      const auto& s = doc["synthetic"];
      c.synthetic.rho_eye = s.value("rho_eye", c.synthetic.rho_eye);
      c.synthetic.cell_sd_fraction = s.value("cell_sd_fraction", c.synthetic.cell_sd_fraction);
      c.synthetic.quality_min = s.value("quality_min", c.synthetic.quality_min);
      c.synthetic.quality_max = s.value("quality_max", c.synthetic.quality_max);
      c.synthetic.seed = s.value("seed", c.synthetic.seed);
      if (s.contains("HC")) read_group(s["HC"], c.synthetic.group(Group::HC));
      if (s.contains("MS")) read_group(s["MS"], c.synthetic.group(Group::MS));
    }
    if (doc.contains("layers")) c.layers = parse_axis<Layer>(doc["layers"], parse_layer);
    if (doc.contains("features")) c.feature_sets = parse_axis<FeatureSet>(doc["features"], parse_feature_set);
    if (doc.contains("eyes")) c.eye_strategies = parse_axis<EyeStrategy::Kind>(doc["eyes"], parse_eye_strategy);
    if (doc.contains("models")) c.models = parse_axis<ModelKind>(doc["models"], parse_model_kind);
    c.k = json_size(doc, "k", c.k);
    if (doc.contains("out_dir")) c.out_dir = doc["out_dir"].get<std::string>();
    c.plots = doc.value("plots", c.plots);
    c.all_fold_grids = doc.value("all_fold_grids", c.all_fold_grids);
    c.waterfall_items = json_size(doc, "waterfall_items", c.waterfall_items);
    c.threads = json_size(doc, "threads", c.threads);
    if (doc.contains("baseline_auc")) {
      if (doc["baseline_auc"].is_null()) {
        c.baseline_auc.reset();
      } else {
        c.baseline_auc = doc["baseline_auc"].get<double>();
      }
    }
    c.ingest.mirror_left = doc.value("mirror_left", c.ingest.mirror_left);
    if (doc.contains("min_quality")) {
      if (doc["min_quality"].is_null()) {
        c.ingest.min_quality.reset();
      } else {
        c.ingest.min_quality = doc["min_quality"].get<double>();
      }
    }
    c.model.smote_neighbors = json_size(doc, "smote_neighbors", c.model.smote_neighbors);
    if (doc.contains("boosting")) {
      const auto& b = doc["boosting"];
      auto& p = c.model.boosting;
      p.learning_rate = b.value("learning_rate", p.learning_rate);
      p.max_depth = b.value("max_depth", p.max_depth);
      p.n_estimators = json_size(b, "n_estimators", p.n_estimators);
      p.reg_lambda = b.value("reg_lambda", p.reg_lambda);
      p.min_samples_leaf = json_size(b, "min_samples_leaf", p.min_samples_leaf);
    }
    if (doc.contains("forest")) {
      const auto& f = doc["forest"];
      auto& p = c.model.forest;
      p.n_estimators = json_size(f, "n_estimators", p.n_estimators);
      p.bootstrap = f.value("bootstrap", p.bootstrap);
      if (f.contains("max_depth")) {
        if (f["max_depth"].is_null()) {
          p.max_depth.reset();
        } else {
          p.max_depth = f["max_depth"].get<int>();
        }
      }
      if (f.contains("max_features")) {
        const auto& mf = f["max_features"];
        if (mf.is_number_unsigned()) {
          p.max_features = MaxFeatures{MaxFeatures::Kind::Count, mf.get<std::size_t>()};
        } else if (mf == "sqrt" || mf == "auto") {
          p.max_features = MaxFeatures{MaxFeatures::Kind::Sqrt, 0};
        } else if (mf == "all") {
          p.max_features = MaxFeatures{MaxFeatures::Kind::All, 0};
        } else {
          throw ConfigError("forest.max_features must be \"sqrt\", \"all\" or a count");
        }
      }
      p.min_samples_leaf = json_size(f, "min_samples_leaf", p.min_samples_leaf);
      p.min_samples_split = json_size(f, "min_samples_split", p.min_samples_split);
    }
    if (doc.contains("ebm")) {
      const auto& e = doc["ebm"];
      auto& p = c.model.ebm;
      p.max_bins = json_size(e, "max_bins", p.max_bins);
      p.max_pair_bins = json_size(e, "max_pair_bins", p.max_pair_bins);
      p.learning_rate = e.value("learning_rate", p.learning_rate);
      p.outer_rounds = json_size(e, "outer_rounds", p.outer_rounds);
      p.pair_rounds = json_size(e, "pair_rounds", p.pair_rounds);
      p.max_depth = e.value("max_depth", p.max_depth);
      p.min_samples_leaf = json_size(e, "min_samples_leaf", p.min_samples_leaf);
      p.reg_lambda = e.value("reg_lambda", p.reg_lambda);
      p.min_hessian = e.value("min_hessian", p.min_hessian);
      p.interactions = json_size(e, "interactions", p.interactions);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  return c;
}

ExperimentConfig load_config(const fs::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("config file {} is not valid JSON: {}", path.string(), e.what()));
  }
  return config_from_json(doc, std::move(base));
}

json config_to_json(const ExperimentConfig& c) {
  const auto& b = c.model.boosting;
  const auto& f = c.model.forest;
  const auto& e = c.model.ebm;
  json max_features;
  switch (f.max_features.kind) {
    case MaxFeatures::Kind::All:
      max_features = "all";
      break;
    case MaxFeatures::Kind::Sqrt:
      max_features = "sqrt";
      break;
    case MaxFeatures::Kind::Count:
      max_features = f.max_features.count;
      break;
  }
  json synthetic{{"rho_eye", c.synthetic.rho_eye},
                 {"cell_sd_fraction", c.synthetic.cell_sd_fraction},
                 {"quality_min", c.synthetic.quality_min},
                 {"quality_max", c.synthetic.quality_max},
                 {"seed", c.synthetic.seed},
                 {"HC", group_to_json(c.synthetic.group(Group::HC))},
                 {"MS", group_to_json(c.synthetic.group(Group::MS))}};
  json doc{
      {"dataset", c.dataset ? json(c.dataset->string()) : json(nullptr)},
      {"zone_map", c.zone_map ? json(c.zone_map->string()) : json(nullptr)},
      {"synthetic", synthetic},
      {"layers", axis_to_json(c.layers)},
      {"features", axis_to_json(c.feature_sets)},
      {"eyes", axis_to_json(c.eye_strategies)},
      {"models", axis_to_json(c.models)},
      {"k", c.k},
      {"out_dir", c.out_dir.string()},
      {"plots", c.plots},
      {"all_fold_grids", c.all_fold_grids},
      {"waterfall_items", c.waterfall_items},
      {"threads", c.threads},
      {"baseline_auc", c.baseline_auc ? json(*c.baseline_auc) : json(nullptr)},
      {"mirror_left", c.ingest.mirror_left},
      {"min_quality", c.ingest.min_quality ? json(*c.ingest.min_quality) : json(nullptr)},
      {"smote_neighbors", c.model.smote_neighbors},
      {"boosting",
       {{"learning_rate", b.learning_rate},
        {"max_depth", b.max_depth},
        {"n_estimators", b.n_estimators},
        {"reg_lambda", b.reg_lambda},
        {"min_samples_leaf", b.min_samples_leaf}}},
      {"forest",
       {{"n_estimators", f.n_estimators},
        {"bootstrap", f.bootstrap},
        {"max_depth", f.max_depth ? json(*f.max_depth) : json(nullptr)},
        {"max_features", max_features},
        {"min_samples_leaf", f.min_samples_leaf},
        {"min_samples_split", f.min_samples_split}}},
      {"ebm",
       {{"max_bins", e.max_bins},
        {"max_pair_bins", e.max_pair_bins},
        {"learning_rate", e.learning_rate},
        {"outer_rounds", e.outer_rounds},
        {"pair_rounds", e.pair_rounds},
        {"max_depth", e.max_depth},
        {"min_samples_leaf", e.min_samples_leaf},
        {"reg_lambda", e.reg_lambda},
        {"min_hessian", e.min_hessian},
        {"interactions", e.interactions}}},
  };
  if (c.seed) doc["seed"] = *c.seed;
  return doc;
}

// ---------------------------------------------------------------------------
// Cells

std::string CellSpec::id() const {
  const std::string_view m = model == ModelKind::EBMi ? "EBMi" : to_string(model);
  return fmt::format("{}-{}-{}-{}", to_string(layer), to_string(features), to_string(eyes), m);
}

std::optional<CellSpec> parse_cell_id(std::string_view id) {
  const auto parts = split(id, '-');
  if (parts.size() != 4) return std::nullopt;
  try {
    return CellSpec{parse_layer(parts[0]), parse_feature_set(parts[1]), parse_eye_strategy(parts[2]),
                    parse_model_kind(parts[3])};
  } catch (const ConfigError&) {
    return std::nullopt;
  }
}

const CellResult* StudyResult::find(const CellSpec& cell) const {
  for (const auto& c : cells) {
    if (c.cell == cell) return &c;
  }
  return nullptr;
}

double metric_value(const MetricsReport& m, std::string_view name) {
  if (name == "accuracy") return m.accuracy;
  if (name == "sensitivity") return m.sensitivity;
  if (name == "specificity") return m.specificity;
  if (name == "f1") return m.f1;
  if (name == "auc") return m.auc.value_or(std::numeric_limits<double>::quiet_NaN());
  throw ConfigError(fmt::format("unknown metric '{}'", name));
}

std::size_t best_fold(std::span<const FoldRecord> folds) {
  if (folds.empty()) throw ConfigError("no folds to choose from");
  auto key = [](double v) { return std::isnan(v) ? -std::numeric_limits<double>::infinity() : v; };
  std::size_t best = 0;
  for (std::size_t i = 1; i < folds.size(); ++i) {
    const auto& a = folds[i].metrics;
    const auto& b = folds[best].metrics;
    const double acc_a = key(a.accuracy), acc_b = key(b.accuracy);
    const double auc_a = key(a.auc.value_or(NAN)), auc_b = key(b.auc.value_or(NAN));
    const bool better = acc_a > acc_b || (acc_a == acc_b && auc_a > auc_b) ||
                        (acc_a == acc_b && auc_a == auc_b && folds[i].fold < folds[best].fold);
    if (better) best = i;
  }
  return folds[best].fold;
}

namespace {

ZoneMap load_zones(const ExperimentConfig& config) {
  return ZoneMap::load(config.zone_map ? *config.zone_map : default_zone_map_path());
}

std::vector<EyeSample> cell_samples(std::span<const EyeSample> all, const CellSpec& cell, std::uint64_t seed) {
  std::vector<EyeSample> layer;
  for (const auto& s : all) {
    if (s.layer == cell.layer) layer.push_back(s);
  }
  if (layer.empty()) throw ConfigError(fmt::format("the dataset has no {} rows", to_string(cell.layer)));
  return select_eyes(layer, EyeStrategy{cell.eyes, derive_seed(seed, "rand-eye")});
}

std::string sample_name(const FeatureMatrix& m, std::size_t i) {
  return fmt::format("{}-{}", m.subject_ids[i], to_string(m.laterality[i]));
}

void write_text(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << content;
  if (!out) throw Error("failed writing " + path.string());
}

std::string metrics_header() {
  return "layer,features,eyes,model,fold,n_train,n_synthetic,n_test,test_ms,tp,fp,tn,fn,"
         "accuracy,sensitivity,specificity,f1,auc\n";
}

std::string cell_columns(const CellSpec& c) {
  return fmt::format("{},{},{},{}", to_string(c.layer), to_string(c.features), to_string(c.eyes),
                     to_string(c.model));
}

std::string metrics_row(const CellSpec& cell, const FoldRecord& r) {
  const auto& m = r.metrics;
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", cell_columns(cell), r.fold, r.n_train,
                     r.n_synthetic, r.n_test, r.test_ms, m.tp, m.fp, m.tn, m.fn, format_double(m.accuracy),
                     format_double(m.sensitivity), format_double(m.specificity), format_double(m.f1),
                     m.auc ? format_double(*m.auc) : std::string());
}

void summarize(CellResult& cell) {
  for (auto name : kMetricNames) {
    std::vector<double> values;
    for (const auto& f : cell.folds) values.push_back(metric_value(f.metrics, name));
    cell.summary[std::string(name)] = five_number(values);
  }
  cell.best_fold = best_fold(cell.folds);
}

void write_study_tables(const StudyResult& study, const fs::path& dir) {
  std::string summary = "layer,features,eyes,model,metric,min,q1,median,q3,max\n";
  std::string best = "layer,features,eyes,model,fold,accuracy,sensitivity,specificity,f1,auc\n";
  for (const auto& c : study.cells) {
    for (auto name : kMetricNames) {
      const auto& f = c.summary.at(std::string(name));
      summary += fmt::format("{},{},{},{},{},{},{}\n", cell_columns(c.cell), name, format_double(f.min),
                             format_double(f.q1), format_double(f.median), format_double(f.q3),
                             format_double(f.max));
    }
    const auto& m = std::find_if(c.folds.begin(), c.folds.end(),
                                 [&](const FoldRecord& r) { return r.fold == c.best_fold; })
                        ->metrics;
    best += fmt::format("{},{},{},{},{},{},{}\n", cell_columns(c.cell), c.best_fold, format_double(m.accuracy),
                        format_double(m.sensitivity), format_double(m.specificity), format_double(m.f1),
                        m.auc ? format_double(*m.auc) : std::string());
  }
  write_text(dir / "summary.csv", summary);
  write_text(dir / "best_folds.csv", best);
}

Fold read_fold(const fs::path& folds_csv, std::size_t fold) {
  std::ifstream in(folds_csv);
  if (!in) throw InputError("cannot open fold plan " + folds_csv.string());
  std::string line;
  std::getline(in, line);
  Fold out;
  bool seen = false;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto parts = split(trim(line), ',');
    if (parts.size() != 3) throw ParseError("fold plan rows need fold,subject_id,split", line_no);
    if (parts[0] != std::to_string(fold)) continue;
    seen = true;
    (parts[2] == "test" ? out.test_subjects : out.train_subjects).emplace_back(parts[1]);
  }
  if (!seen) throw ConfigError(fmt::format("fold {} is not in {}", fold, folds_csv.string()));
  return out;
}

// Rows in dataset order, as run_fold materializes them.
std::pair<FeatureMatrix, FeatureMatrix> fold_matrices(std::span<const EyeSample> samples, const Fold& fold,
                                                      FeatureSet features, const ZoneMap& zones) {
  const std::unordered_set<std::string> train(fold.train_subjects.begin(), fold.train_subjects.end());
  const std::unordered_set<std::string> test(fold.test_subjects.begin(), fold.test_subjects.end());
  std::vector<EyeSample> a, b;
  for (const auto& s : samples) {
    if (train.count(s.subject_id)) {
      a.push_back(s);
    } else if (test.count(s.subject_id)) {
      b.push_back(s);
    }
  }
  return {build_feature_matrix(a, features, zones), build_feature_matrix(b, features, zones)};
}

template <class F>
void parallel_for(std::size_t n, std::size_t threads, F&& body) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          body(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace

std::vector<EyeSample> load_run_samples(const ExperimentConfig& config) {
  if (!config.dataset) throw ConfigError("the run has no dataset path");
  return load_dataset(*config.dataset, config.ingest);
}

StudyResult run_study(const ExperimentConfig& input, const FoldObserver& observer) {
  input.validate();
  ExperimentConfig config = input;
  const std::uint64_t seed = *config.seed;
  const fs::path dir = config.out_dir;
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    throw ConfigError(fmt::format("output directory {} is not empty", dir.string()));
  }
  fs::create_directories(dir / "cells");
  const ZoneMap zones = load_zones(config);

  if (!config.dataset) {
    const auto cohort = generate_cohort(config.synthetic, zones);
    const fs::path generated = dir / "dataset.csv";
    std::ofstream out(generated, std::ios::binary);
    write_dataset(out, cohort);
    out.close();
    config.dataset = fs::absolute(generated);
  }
  if (config.zone_map) config.zone_map = fs::absolute(*config.zone_map);
  config.dataset = fs::absolute(*config.dataset);
  config.out_dir = fs::absolute(dir);
  const auto samples = load_run_samples(config);
  write_text(dir / "config.json", config_to_json(config).dump(2) + "\n");

  StudyResult study;
  study.run_dir = config.out_dir;
  study.seed = seed;
  std::ofstream metrics(dir / "metrics.csv", std::ios::binary);
  metrics << metrics_header();

  for (Layer layer : config.layers) {
    for (FeatureSet features : config.feature_sets) {
      for (EyeStrategy::Kind eyes : config.eye_strategies) {
        for (ModelKind kind : config.models) {
          const CellSpec cell{layer, features, eyes, kind};
          const std::string id = cell.id();
          try {
            const auto selected = cell_samples(samples, cell, seed);
            const FoldPlan plan = subject_kfold(selected, config.k, derive_seed(seed, "folds"));
            const fs::path cell_dir = dir / "cells" / id;
            fs::create_directories(cell_dir);
            {
              std::ofstream out(cell_dir / "folds.csv", std::ios::binary);
              write_fold_plan(out, plan);
            }
            CellResult result;
            result.cell = cell;
            result.seed = derive_seed(seed, id);
            result.folds.resize(plan.k);
            parallel_for(plan.k, config.threads, [&](std::size_t f) {
              const std::uint64_t fold_seed = derive_seed(result.seed, f);
              FoldOutcome o = run_fold(plan.folds[f], f, selected, features, zones, kind, config.model, fold_seed);
              const fs::path fold_dir = cell_dir / fmt::format("fold_{}", f);
              fs::create_directories(fold_dir);
              save_model(fold_dir / "model.json", o.model);
              std::string probs = "sample,subject_id,eye,label,probability\n";
              for (std::size_t i = 0; i < o.test.size(); ++i) {
                probs += fmt::format("{},{},{},{},{}\n", sample_name(o.test, i), o.test.subject_ids[i],
                                     to_string(o.test.laterality[i]), o.test.labels[i],
                                     format_double(o.probabilities[i]));
              }
              write_text(fold_dir / "probabilities.csv", probs);
              FoldRecord& r = result.folds[f];
              r.fold = f;
              r.n_train = o.train.size();
              r.n_synthetic = o.synthetic_rows;
              r.n_test = o.test.size();
              for (int v : o.test.labels) r.test_ms += static_cast<std::size_t>(v);
              r.metrics = o.metrics;
              if (observer) observer(cell, o);
            });
            for (const auto& r : result.folds) metrics << metrics_row(cell, r);
            metrics.flush();
            summarize(result);
            study.cells.push_back(std::move(result));
          } catch (const std::exception& e) {
            metrics.close();
            if (!study.cells.empty()) write_study_tables(study, dir);
            std::throw_with_nested(StudyError(fmt::format("cell {} failed: {}", id, e.what()), id));
          }
        }
      }
    }
  }
  write_study_tables(study, dir);
  return study;
}

ExperimentConfig load_run_config(const fs::path& run_dir) {
  if (!fs::is_regular_file(run_dir / "config.json")) {
    throw InputError(fmt::format("{} is not a run directory", run_dir.string()));
  }
  ExperimentConfig c = load_config(run_dir / "config.json");
  c.out_dir = run_dir;
  return c;
}

StudyResult load_study(const fs::path& run_dir) {
  const ExperimentConfig config = load_run_config(run_dir);
  StudyResult study;
  study.run_dir = run_dir;
  study.seed = config.seed.value_or(0);
  std::ifstream in(run_dir / "metrics.csv");
  if (!in) throw InputError("no metrics.csv in " + run_dir.string());
  std::string line;
  std::getline(in, line);
  std::size_t line_no = 1;
  auto number = [&](std::string_view s) {
    const auto v = parse_double(s);
    if (!v) throw ParseError(fmt::format("bad number '{}' in metrics.csv", s), line_no);
    return *v;
  };
  auto count = [&](std::string_view s) { return static_cast<std::size_t>(number(s)); };
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto p = split(trim(line), ',');
    if (p.size() != 18) throw ParseError("metrics.csv rows need 18 columns", line_no);
    CellSpec cell;
    try {
      cell = CellSpec{parse_layer(p[0]), parse_feature_set(p[1]), parse_eye_strategy(p[2]), parse_model_kind(p[3])};
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), line_no);
    }
    if (study.cells.empty() || !(study.cells.back().cell == cell)) {
      study.cells.push_back(CellResult{cell, derive_seed(study.seed, cell.id()), {}, 0, {}});
    }
    FoldRecord r;
    r.fold = count(p[4]);
    r.n_train = count(p[5]);
    r.n_synthetic = count(p[6]);
    r.n_test = count(p[7]);
    r.test_ms = count(p[8]);
    r.metrics.tp = count(p[9]);
    r.metrics.fp = count(p[10]);
    r.metrics.tn = count(p[11]);
    r.metrics.fn = count(p[12]);
    r.metrics.accuracy = number(p[13]);
    r.metrics.sensitivity = number(p[14]);
    r.metrics.specificity = number(p[15]);
    r.metrics.f1 = number(p[16]);
    if (!trim(p[17]).empty()) r.metrics.auc = number(p[17]);
    study.cells.back().folds.push_back(r);
  }
  for (auto& c : study.cells) summarize(c);
  return study;
}

// ---------------------------------------------------------------------------
// Explanations

namespace {

std::optional<TreeEnsembleView> tree_view(const Model& model) {
  if (const auto* f = std::get_if<ForestModel>(&model)) return TreeEnsembleView::of(*f);
  if (const auto* b = std::get_if<BoostedModel>(&model)) return TreeEnsembleView::of(*b);
  return std::nullopt;
}

}  // namespace

CellExplanation explain_cell(const StudyResult& study, const ExperimentConfig& config, const CellSpec& cell,
                             std::size_t fold) {
  const CellResult* result = study.find(cell);
  if (!result) throw ConfigError(fmt::format("cell {} is not part of the run", cell.id()));
  const fs::path cell_dir = study.run_dir / "cells" / cell.id();
  const ZoneMap zones = load_zones(config);
  const auto samples = load_run_samples(config);
  const auto selected = cell_samples(samples, cell, study.seed);

  CellExplanation ex;
  ex.cell = cell;
  ex.fold = fold;
  ex.seed = derive_seed(result->seed, fold);
  std::tie(ex.train, ex.test) = fold_matrices(selected, read_fold(cell_dir / "folds.csv", fold), cell.features, zones);
  ex.model = load_model(cell_dir / fmt::format("fold_{}", fold) / "model.json");
  ex.probabilities = predict_proba(ex.model, ex.test.rows);
  ex.metrics = compute_metrics(ex.probabilities, ex.test.labels);

  const auto& names = ex.train.feature_names;
  const auto view = tree_view(ex.model);
  if (view) ex.shap = global_summary(*view, ex.train.rows, names);
  if (const auto* ebm = std::get_if<EbmModel>(&ex.model)) ex.ebm = ebm_global(*ebm, names);

  for (std::size_t i = 0; i < ex.test.size(); ++i) {
    const bool predicted = ex.probabilities[i] > 0.5;
    if (predicted == (ex.test.labels[i] == 1)) continue;
    FailureCase fc;
    fc.sample = sample_name(ex.test, i);
    fc.label = ex.test.labels[i];
    fc.probability = ex.probabilities[i];
    if (view) {
      fc.waterfall = waterfall(tree_shap(*view, ex.test.rows.row(i)), names, config.waterfall_items);
    } else {
      const auto& ebm = std::get<EbmModel>(ex.model);
      fc.waterfall = ebm_waterfall(ebm_explain(ebm, ex.test.rows.row(i), names), config.waterfall_items);
    }
    ex.failures.push_back(std::move(fc));
  }

  if (config.all_fold_grids && cell.features == FeatureSet::Grid) {
    for (const auto& rec : result->folds) {
      const Model m = load_model(cell_dir / fmt::format("fold_{}", rec.fold) / "model.json");
      if (const auto v = tree_view(m)) {
        const auto [train, test] =
            fold_matrices(selected, read_fold(cell_dir / "folds.csv", rec.fold), cell.features, zones);
        ex.fold_grids.push_back(shap_grid(global_summary(*v, test.rows, names)));
      } else {
        ex.fold_grids.push_back(ebm_grid(std::get<EbmModel>(m), names));
      }
    }
  }
  return ex;
}

// ---------------------------------------------------------------------------
// Reports

namespace {

std::string file_safe(std::string_view s) {
  std::string out;
  for (char c : s) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '.' || c == '-') ? c : '_';
  return out;
}

class ReportWriter {
 public:
  explicit ReportWriter(fs::path root) : root_(std::move(root)) {}

  void file(const fs::path& rel, const std::string& content, std::string cell = {}, std::string fold = {},
            std::string seed = {}, std::string note = {}) {
    fs::create_directories((root_ / rel).parent_path());
    write_text(root_ / rel, content);
    entries_.push_back(ManifestEntry{rel.generic_string(), "file", std::move(cell), std::move(fold),
                                     std::move(seed), std::move(note)});
  }

  void dir(const fs::path& rel, std::string cell, std::string fold, std::string seed, std::string note) {
    fs::create_directories(root_ / rel);
    entries_.push_back(ManifestEntry{rel.generic_string(), "dir", std::move(cell), std::move(fold),
                                     std::move(seed), std::move(note)});
  }

  std::vector<ManifestEntry> finish() {
    entries_.push_back(ManifestEntry{"manifest.csv", "file", "", "", "", "this listing"});
    std::string csv = "path,kind,cell,fold,seed,note\n";
    for (const auto& e : entries_) {
      csv += fmt::format("{},{},{},{},{},{}\n", e.path, e.kind, e.cell, e.fold, e.seed, e.note);
    }
    write_text(root_ / "manifest.csv", csv);
    return entries_;
  }

 private:
  fs::path root_;
  std::vector<ManifestEntry> entries_;
};

template <class F>
std::string to_csv(F&& write) {
  std::ostringstream out;
  write(out);
  return out.str();
}

void emit_cell(ReportWriter& w, const CellExplanation& ex, const ExperimentConfig& config) {
  const std::string id = ex.cell.id();
  const fs::path base = fs::path("cells") / id;
  const std::string fold = std::to_string(ex.fold);
  const std::string seed = std::to_string(ex.seed);
  const auto& names = ex.train.feature_names;
  auto put = [&](const fs::path& rel, const std::string& content) { w.file(base / rel, content, id, fold, seed); };
  const bool plots = config.plots;

  put("confusion.csv", to_csv([&](std::ostream& o) { write_confusion_csv(o, ex.metrics); }));
  {
    std::string probs = "sample,label,probability,predicted\n";
    for (std::size_t i = 0; i < ex.test.size(); ++i) {
      probs += fmt::format("{},{},{},{}\n", sample_name(ex.test, i), ex.test.labels[i],
                           format_double(ex.probabilities[i]), ex.probabilities[i] > 0.5 ? 1 : 0);
    }
    put("probabilities.csv", probs);
  }

  std::optional<Grid> importance;
  if (ex.shap) {
    const auto& s = *ex.shap;
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < ex.train.size(); ++i) ids.push_back(sample_name(ex.train, i));
    put("shap_values.csv", to_csv([&](std::ostream& o) { write_shap_values_csv(o, s, ids); }));
    put("shap_violin.csv", to_csv([&](std::ostream& o) { write_shap_long_csv(o, s); }));
    std::string bar_csv = "feature,rank,mean_abs_phi\n";
    std::vector<std::string> bar_names;
    std::vector<double> bar_values;
    for (std::size_t k = 0; k < s.ranking.size(); ++k) {
      const std::size_t j = s.ranking[k];
      bar_csv += fmt::format("{},{},{}\n", s.feature_names[j], k + 1, format_double(s.mean_abs_phi[j]));
      if (k < 20) {
        bar_names.push_back(s.feature_names[j]);
        bar_values.push_back(s.mean_abs_phi[j]);
      }
    }
    put("shap_bar.csv", bar_csv);
    if (plots) {
      put("shap_bar.svg", plots::bar(bar_names, bar_values, fmt::format("{}: mean |SHAP|", id),
                                     fmt::format("mean |SHAP| ({})", to_string(s.space))));
      put("shap_beeswarm.svg", plots::beeswarm(s, 20));
    }
    for (std::size_t k = 0; k < std::min<std::size_t>(2, s.ranking.size()); ++k) {
      const std::size_t j = s.ranking[k];
      const auto points = dependence_data(s, j);
      const std::string stem = "dependence_" + file_safe(s.feature_names[j]);
      put(stem + ".csv", to_csv([&](std::ostream& o) {
            o << "value,phi\n";
            for (const auto& p : points) o << format_double(p.value) << ',' << format_double(p.phi) << '\n';
          }));
      if (plots) put(stem + ".svg", plots::dependence(points, s.feature_names[j], s.space));
    }
    if (ex.cell.features == FeatureSet::Grid) importance = shap_grid(s);
  }

  if (ex.ebm) {
    const auto& g = *ex.ebm;
    std::string csv = "term,rank,importance\n";
    std::vector<std::string> bar_names;
    std::vector<double> bar_values;
    for (std::size_t k = 0; k < g.ranking.size(); ++k) {
      csv += fmt::format("{},{},{}\n", g.ranking[k].term, k + 1, format_double(g.ranking[k].importance));
      if (k < 20) {
        bar_names.push_back(g.ranking[k].term);
        bar_values.push_back(g.ranking[k].importance);
      }
    }
    put("ebm_importance.csv", csv);
    if (plots) put("ebm_importance.svg", plots::bar(bar_names, bar_values, fmt::format("{}: EBM term importance", id),
                                                     "mean |score| (log-odds)"));
    // Curves of the six most important main terms.
    std::size_t shown = 0;
    for (const auto& t : g.ranking) {
      const auto it = std::find(names.begin(), names.end(), t.term);
      if (it == names.end()) continue;
      const auto j = static_cast<std::size_t>(it - names.begin());
      const std::string stem = "ebm_curves/" + file_safe(t.term);
      put(stem + ".csv", to_csv([&](std::ostream& o) { write_curve_csv(o, g.curves[j]); }));
      if (plots) put(stem + ".svg", plots::ebm_curve(g.curves[j], t.term));
      if (++shown == 6) break;
    }
    for (const auto& p : g.pair_maps) {
      const std::string stem = "ebm_pairs/" + file_safe(p.term);
      put(stem + ".csv", to_csv([&](std::ostream& o) { write_pair_map_csv(o, p); }));
      if (plots) put(stem + ".svg", plots::pair_map(p, names[p.first], names[p.second]));
    }
    if (ex.cell.features == FeatureSet::Grid) importance = ebm_grid(std::get<EbmModel>(ex.model), names);
  }

  if (importance) {
    const Matrix m = grid_matrix(*importance);
    put("importance_grid.csv", to_csv([&](std::ostream& o) { write_grid_csv(o, m); }));
    if (plots) {
      put("importance_grid.svg", plots::heatmap(m, fmt::format("{}: importance grid", id), false));
      put("importance_grid_bicubic.svg",
          plots::heatmap(bicubic_upsample(m, 8), fmt::format("{}: importance grid (bicubic)", id), false, 8));
    }
  }
  for (std::size_t f = 0; f < ex.fold_grids.size(); ++f) {
    const Matrix m = grid_matrix(ex.fold_grids[f]);
    const std::string stem = fmt::format("fold_grids/fold_{}", f);
    w.file(base / (stem + ".csv"), to_csv([&](std::ostream& o) { write_grid_csv(o, m); }), id, std::to_string(f), "");
    if (plots) {
      w.file(base / (stem + ".svg"),
             plots::heatmap(bicubic_upsample(m, 8), fmt::format("{} fold {}", id, f), false, 8), id,
             std::to_string(f), "");
    }
  }

  if (ex.failures.empty()) {
    w.dir(base / "failures", id, fold, seed, "no misclassified test samples");
  } else {
    for (const auto& fc : ex.failures) {
      const std::string stem = "failures/" + file_safe(fc.sample);
      put(stem + ".csv", to_csv([&](std::ostream& o) { write_waterfall_csv(o, fc.waterfall); }));
      if (plots) {
        put(stem + ".svg",
            plots::waterfall(fc.waterfall, fmt::format("{} (true {}, p(MS) = {:.3f})", fc.sample,
                                                       fc.label == 1 ? "MS" : "HC", fc.probability)));
      }
    }
  }
}

}  // namespace

std::vector<ManifestEntry> emit_reports(const StudyResult& study, std::span<const CellExplanation> explanations,
                                        const ExperimentConfig& config, const fs::path& out_dir) {
  if (fs::exists(out_dir) && !fs::is_empty(out_dir)) {
    throw ConfigError(fmt::format("report directory {} is not empty", out_dir.string()));
  }
  fs::create_directories(out_dir);
  ReportWriter w(out_dir);
  const std::string seed = std::to_string(study.seed);

  // Table of best folds and the per-fold distribution.
  std::string table = "layer,features,eyes,model,fold,accuracy,sensitivity,specificity,f1,auc\n";
  std::string dist = "layer,features,eyes,model,metric,min,q1,median,q3,max\n";
  for (const auto& c : study.cells) {
    const auto& m = std::find_if(c.folds.begin(), c.folds.end(),
                                 [&](const FoldRecord& r) { return r.fold == c.best_fold; })
                        ->metrics;
    table += fmt::format("{},{},{:.2f},{:.2f},{:.2f},{:.2f},{}\n", cell_columns(c.cell), c.best_fold, m.accuracy,
                         m.sensitivity, m.specificity, m.f1, m.auc ? fmt::format("{:.2f}", *m.auc) : "");
    for (auto name : kMetricNames) {
      const auto& f = c.summary.at(std::string(name));
      dist += fmt::format("{},{},{},{},{},{},{}\n", cell_columns(c.cell), name, format_double(f.min),
                          format_double(f.q1), format_double(f.median), format_double(f.q3), format_double(f.max));
    }
  }
  w.file("best_models.csv", table, "", "", seed, "best fold per cell");
  w.file("metric_distribution.csv", dist, "", "", seed);

  if (config.plots) {
    for (auto name : kMetricNames) {
      for (Layer layer : config.layers) {
        std::vector<plots::BoxSeries> series;
        for (const auto& c : study.cells) {
          if (c.cell.layer != layer) continue;
          plots::BoxSeries s;
          s.label = fmt::format("{} {} {}", to_string(c.cell.features), to_string(c.cell.eyes),
                                to_string(c.cell.model));
          for (const auto& f : c.folds) {
            const double v = metric_value(f.metrics, name);
            s.values.push_back(name == "auc" ? v : v / 100.0);
          }
          series.push_back(std::move(s));
        }
        if (series.empty()) continue;
        const auto baseline = name == "auc" ? config.baseline_auc : std::nullopt;
        w.file(fmt::format("distribution_{}_{}.svg", to_string(layer), name),
               plots::boxplot(series, fmt::format("{} {} over folds", to_string(layer), name), baseline), "", "",
               seed);
      }
    }
  }

  for (const auto& ex : explanations) {
    const CellResult* c = study.find(ex.cell);
    if (!c) throw ConfigError(fmt::format("explanation for unknown cell {}", ex.cell.id()));
    const auto& stored = std::find_if(c->folds.begin(), c->folds.end(),
                                      [&](const FoldRecord& r) { return r.fold == ex.fold; });
    if (stored == c->folds.end() || !(stored->metrics == ex.metrics)) {
      throw IntegrityError(fmt::format("cell {} fold {}: recomputed metrics differ from the stored run",
                                       ex.cell.id(), ex.fold));
    }
    emit_cell(w, ex, config);
  }
  return w.finish();
}

std::vector<ManifestEntry> report_study(const StudyResult& study, const ExperimentConfig& config,
                                        const fs::path& out_dir) {
  std::vector<CellExplanation> explanations;
  for (const auto& c : study.cells) explanations.push_back(explain_cell(study, config, c.cell, c.best_fold));
  return emit_reports(study, explanations, config, out_dir);
}

}  // namespace glassbox
