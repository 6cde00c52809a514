#include "glassbox/model_io.hpp"

#include <cmath>
#include <fstream>
#include <iostream>

#include <fmt/format.h>

#include "glassbox/error.hpp"
#include "json.hpp"

namespace glassbox {

using nlohmann::json;

std::string_view model_kind_tag(const Model& model) {
  switch (model.index()) {
    case 0:
      return "forest";
    case 1:
      return "boosted";
    default:
      return "ebm";
  }
}

std::vector<double> predict_proba(const Model& model, const Matrix& x) {
  return std::visit([&](const auto& m) { return m.predict_proba(x); }, model);
}

namespace {

json tree_to_json(const Tree& tree) {
  json feature = json::array(), threshold = json::array(), left = json::array(),
       right = json::array(), value = json::array(), cover = json::array();
  for (const auto& n : tree.nodes()) {
    feature.push_back(n.feature);
    threshold.push_back(n.threshold);
    left.push_back(n.left);
    right.push_back(n.right);
    value.push_back(n.value);
    cover.push_back(n.cover);
  }
  return json{{"feature", feature}, {"threshold", threshold}, {"left", left},
              {"right", right},     {"value", value},         {"cover", cover}};
}

Tree tree_from_json(const json& j) {
  const auto& feature = j.at("feature");
  const std::size_t n = feature.size();
  std::vector<TreeNode> nodes(n);
  for (const char* key : {"threshold", "left", "right", "value", "cover"}) {
    if (j.at(key).size() != n) throw CorruptModelError(fmt::format("tree field '{}' has the wrong length", key));
  }
  for (std::size_t i = 0; i < n; ++i) {
    nodes[i].feature = feature[i].get<int>();
    nodes[i].threshold = j["threshold"][i].get<double>();
    nodes[i].left = j["left"][i].get<int>();
    nodes[i].right = j["right"][i].get<int>();
    nodes[i].value = j["value"][i].get<double>();
    nodes[i].cover = j["cover"][i].get<double>();
  }
  try {
    return Tree(std::move(nodes));
  } catch (const ConfigError& e) {
    throw CorruptModelError(e.what());
  }
}

json trees_to_json(const std::vector<Tree>& trees) {
  json arr = json::array();
  for (const auto& t : trees) arr.push_back(tree_to_json(t));
  return arr;
}

std::vector<Tree> trees_from_json(const json& arr) {
  std::vector<Tree> trees;
  for (const auto& t : arr) trees.push_back(tree_from_json(t));
  return trees;
}

json max_features_to_json(const MaxFeatures& mf) {
  switch (mf.kind) {
    case MaxFeatures::Kind::All:
      return "all";
    case MaxFeatures::Kind::Sqrt:
      return "sqrt";
    case MaxFeatures::Kind::Count:
      return mf.count;
  }
  return "all";
}

MaxFeatures max_features_from_json(const json& j) {
  if (j.is_number_unsigned()) return MaxFeatures{MaxFeatures::Kind::Count, j.get<std::size_t>()};
  const auto s = j.get<std::string>();
  if (s == "all") return MaxFeatures{MaxFeatures::Kind::All, 0};
  if (s == "sqrt") return MaxFeatures{MaxFeatures::Kind::Sqrt, 0};
  throw CorruptModelError("unknown max_features value '" + s + "'");
}

json to_json(const ForestModel& m) {
  const auto& p = m.params();
  json params{{"n_estimators", p.n_estimators},
              {"bootstrap", p.bootstrap},
              {"max_depth", p.max_depth ? json(*p.max_depth) : json(nullptr)},
              {"max_features", max_features_to_json(p.max_features)},
              {"min_samples_leaf", p.min_samples_leaf},
              {"min_samples_split", p.min_samples_split},
              {"seed", p.seed}};
  return json{{"params", params}, {"n_features", m.n_features()}, {"trees", trees_to_json(m.trees())}};
}

ForestModel forest_from_json(const json& j) {
  const auto& p = j.at("params");
  ForestParams params;
  params.n_estimators = p.at("n_estimators").get<std::size_t>();
  params.bootstrap = p.at("bootstrap").get<bool>();
  if (!p.at("max_depth").is_null()) params.max_depth = p["max_depth"].get<int>();
  params.max_features = max_features_from_json(p.at("max_features"));
  params.min_samples_leaf = p.at("min_samples_leaf").get<std::size_t>();
  params.min_samples_split = p.at("min_samples_split").get<std::size_t>();
  params.seed = p.at("seed").get<std::uint64_t>();
  return ForestModel(trees_from_json(j.at("trees")), params, j.at("n_features").get<std::size_t>());
}

json to_json(const BoostedModel& m) {
  const auto& p = m.params();
  json params{{"learning_rate", p.learning_rate},
              {"max_depth", p.max_depth},
              {"n_estimators", p.n_estimators},
              {"reg_lambda", p.reg_lambda},
              {"min_samples_leaf", p.min_samples_leaf}};
  return json{{"params", params},
              {"n_features", m.n_features()},
              {"base_score", m.base_score()},
              {"trees", trees_to_json(m.trees())}};
}

BoostedModel boosted_from_json(const json& j) {
  const auto& p = j.at("params");
  BoostingParams params;
  params.learning_rate = p.at("learning_rate").get<double>();
  params.max_depth = p.at("max_depth").get<int>();
  params.n_estimators = p.at("n_estimators").get<std::size_t>();
  params.reg_lambda = p.at("reg_lambda").get<double>();
  params.min_samples_leaf = p.at("min_samples_leaf").get<std::size_t>();
  return BoostedModel(j.at("base_score").get<double>(), trees_from_json(j.at("trees")), params,
                      j.at("n_features").get<std::size_t>());
}

json to_json(const EbmModel& m) {
  const auto& p = m.params();
  json params{{"max_bins", p.max_bins},
              {"max_pair_bins", p.max_pair_bins},
              {"learning_rate", p.learning_rate},
              {"outer_rounds", p.outer_rounds},
              {"pair_rounds", p.pair_rounds},
              {"max_depth", p.max_depth},
              {"min_samples_leaf", p.min_samples_leaf},
              {"reg_lambda", p.reg_lambda},
              {"min_hessian", p.min_hessian},
              {"interactions", p.interactions},
              {"feature_order", p.feature_order}};
  json mains = json::array();
  for (const auto& t : m.mains()) {
    mains.push_back(json{{"cuts", t.bins.cuts()}, {"scores", t.scores}, {"counts", t.counts}});
  }
  json pair_bins = json::array();
  for (const auto& b : m.pair_bins()) pair_bins.push_back(b.cuts());
  json pairs = json::array();
  for (const auto& t : m.pairs()) {
    pairs.push_back(json{{"first", t.first}, {"second", t.second}, {"scores", t.scores}, {"counts", t.counts}});
  }
  return json{{"params", params},
              {"n_features", m.n_features()},
              {"intercept", m.intercept()},
              {"mains", mains},
              {"pair_bins", pair_bins},
              {"pairs", pairs}};
}

EbmModel ebm_from_json(const json& j) {
  const auto& p = j.at("params");
  EbmParams params;
  params.max_bins = p.at("max_bins").get<std::size_t>();
  params.max_pair_bins = p.at("max_pair_bins").get<std::size_t>();
  params.learning_rate = p.at("learning_rate").get<double>();
  params.outer_rounds = p.at("outer_rounds").get<std::size_t>();
  params.pair_rounds = p.at("pair_rounds").get<std::size_t>();
  params.max_depth = p.at("max_depth").get<int>();
  params.min_samples_leaf = p.at("min_samples_leaf").get<std::size_t>();
  params.reg_lambda = p.at("reg_lambda").get<double>();
  params.min_hessian = p.at("min_hessian").get<double>();
  params.interactions = p.at("interactions").get<std::size_t>();
  params.feature_order = p.at("feature_order").get<std::vector<std::size_t>>();
  std::vector<MainTerm> mains;
  for (const auto& t : j.at("mains")) {
    mains.push_back(MainTerm{BinEdges(t.at("cuts").get<std::vector<double>>()),
                             t.at("scores").get<std::vector<double>>(),
                             t.at("counts").get<std::vector<double>>()});
  }
  std::vector<BinEdges> pair_bins;
  for (const auto& b : j.at("pair_bins")) pair_bins.emplace_back(b.get<std::vector<double>>());
  std::vector<PairTerm> pairs;
  for (const auto& t : j.at("pairs")) {
    pairs.push_back(PairTerm{t.at("first").get<std::size_t>(), t.at("second").get<std::size_t>(),
                             t.at("scores").get<std::vector<double>>(),
                             t.at("counts").get<std::vector<double>>()});
  }
  if (mains.size() != j.at("n_features").get<std::size_t>()) {
    throw CorruptModelError("EBM term count does not match n_features");
  }
  return EbmModel(j.at("intercept").get<double>(), std::move(mains), std::move(pair_bins),
                  std::move(pairs), params);
}

bool all_finite(const json& j) {
  if (j.is_number_float()) return std::isfinite(j.get<double>());
  if (j.is_structured()) {
    for (const auto& v : j) {
      if (!all_finite(v)) return false;
    }
  }
  return true;
}

}  // namespace

void write_model(std::ostream& out, const Model& model) {
  json body = std::visit([](const auto& m) { return to_json(m); }, model);
  json doc{{"format", kModelFormat}, {"version", kModelFormatVersion}, {"kind", model_kind_tag(model)}};
  doc.update(body);
  if (!all_finite(doc)) throw Error("refusing to write a model with non-finite parameters");
  out << doc.dump() << '\n';
}

Model read_model(std::istream& in) {
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw CorruptModelError(std::string("model file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object() || doc.value("format", "") != kModelFormat) {
    throw CorruptModelError("not a glassbox model file");
  }
  try {
    const int version = doc.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw ModelVersionError(fmt::format("model format version {} is not supported (expected {})",
                                          version, kModelFormatVersion));
    }
    const auto kind = doc.at("kind").get<std::string>();
    if (kind == "forest") return forest_from_json(doc);
    if (kind == "boosted") return boosted_from_json(doc);
    if (kind == "ebm") return ebm_from_json(doc);
    throw ModelVersionError("unknown model kind '" + kind + "'");
  } catch (const json::exception& e) {
    throw CorruptModelError(std::string("model file is incomplete: ") + e.what());
  } catch (const ConfigError& e) {
    throw CorruptModelError(std::string("model file is inconsistent: ") + e.what());
  }
}

void save_model(const std::filesystem::path& path, const Model& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write model file " + path.string());
  write_model(out, model);
  if (!out) throw Error("failed writing model file " + path.string());
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptModelError("cannot open model file " + path.string());
  return read_model(in);
}

}  // namespace glassbox
