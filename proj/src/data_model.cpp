#include "glassbox/data_model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

#include <fmt/format.h>

#include "glassbox/error.hpp"
#include "glassbox/random.hpp"
#include "glassbox/text.hpp"

namespace glassbox {

namespace {

constexpr std::size_t kMetaColumns = 7;
constexpr std::size_t kCsvColumns = kMetaColumns + kGridCells;

template <typename E, std::size_t N>
E parse_enum(std::string_view s, const std::array<std::pair<std::string_view, E>, N>& table,
             std::string_view what) {
  for (const auto& [name, value] : table) {
    if (name == s) return value;
  }
  throw ConfigError(fmt::format("unknown {} '{}'", what, s));
}

constexpr std::array<std::pair<std::string_view, Group>, 2> kGroups{
    {{"HC", Group::HC}, {"MS", Group::MS}}};
constexpr std::array<std::pair<std::string_view, Sex>, 2> kSexes{{{"M", Sex::M}, {"F", Sex::F}}};
constexpr std::array<std::pair<std::string_view, Laterality>, 2> kEyes{
    {{"L", Laterality::L}, {"R", Laterality::R}}};
constexpr std::array<std::pair<std::string_view, Layer>, 2> kLayers{
    {{"GCL", Layer::GCL}, {"RNFL", Layer::RNFL}}};
constexpr std::array<std::pair<std::string_view, EyeStrategy::Kind>, 4> kStrategies{
    {{"L", EyeStrategy::Kind::L},
     {"R", EyeStrategy::Kind::R},
     {"Rand", EyeStrategy::Kind::Rand},
     {"LR", EyeStrategy::Kind::LR}}};
constexpr std::array<std::pair<std::string_view, FeatureSet>, 2> kFeatureSets{
    {{"Zones", FeatureSet::Zones}, {"Grid", FeatureSet::Grid}}};

template <typename E, std::size_t N>
std::string_view enum_name(E value, const std::array<std::pair<std::string_view, E>, N>& table) {
  for (const auto& [name, v] : table) {
    if (v == value) return name;
  }
  return "?";
}

std::string expected_header() {
  std::string h = "subject_id,group,age,sex,eye,layer,quality";
  for (std::size_t r = 1; r <= kGridSide; ++r) {
    for (std::size_t c = 1; c <= kGridSide; ++c) h += fmt::format(",c{}_{}", r, c);
  }
  return h;
}

}  // namespace

std::string_view to_string(Group g) { return enum_name(g, kGroups); }
std::string_view to_string(Sex s) { return enum_name(s, kSexes); }
std::string_view to_string(Laterality e) { return enum_name(e, kEyes); }
std::string_view to_string(Layer l) { return enum_name(l, kLayers); }
std::string_view to_string(EyeStrategy::Kind k) { return enum_name(k, kStrategies); }
std::string_view to_string(FeatureSet f) { return enum_name(f, kFeatureSets); }

Group parse_group(std::string_view s) { return parse_enum(s, kGroups, "group"); }
Sex parse_sex(std::string_view s) { return parse_enum(s, kSexes, "sex"); }
Laterality parse_laterality(std::string_view s) { return parse_enum(s, kEyes, "eye"); }
Layer parse_layer(std::string_view s) { return parse_enum(s, kLayers, "layer"); }
EyeStrategy::Kind parse_eye_strategy(std::string_view s) {
  if (s == "rand") return EyeStrategy::Kind::Rand;
  return parse_enum(s, kStrategies, "eye strategy");
}
FeatureSet parse_feature_set(std::string_view s) {
  return parse_enum(s, kFeatureSets, "feature set");
}

std::string cell_name(std::size_t index) {
  return fmt::format("{}.{}", index / kGridSide + 1, index % kGridSide + 1);
}

std::optional<std::size_t> parse_cell_name(std::string_view name) {
  if (name.size() != 3 || name[1] != '.') return std::nullopt;
  const int r = name[0] - '0';
  const int c = name[2] - '0';
  if (r < 1 || r > 8 || c < 1 || c > 8) return std::nullopt;
  return cell_index(static_cast<std::size_t>(r), static_cast<std::size_t>(c));
}

// ---------------------------------------------------------------------------
// ZoneMap

ZoneMap::ZoneMap(const std::array<int, kGridCells>& assignment) : assignment_(assignment) {
  for (std::size_t i = 0; i < kGridCells; ++i) {
    const int z = assignment_[i];
    if (z < 1 || z > static_cast<int>(kZoneCount)) {
      throw ConfigError(fmt::format("zone map cell {} has zone {}, expected 1..6", cell_name(i), z));
    }
    ++counts_[z - 1];
  }
  for (std::size_t z = 0; z < kZoneCount; ++z) {
    if (counts_[z] == 0) throw ConfigError(fmt::format("zone map leaves zone {} empty", z + 1));
  }
}

ZoneMap ZoneMap::parse(std::istream& in) {
  std::array<int, kGridCells> cells{};
  std::string line;
  std::size_t row = 0;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    if (row == kGridSide) throw ParseError("zone map has more than 8 rows", line_no);
    std::istringstream ls(line);
    std::string token;
    std::size_t col = 0;
    while (ls >> token) {
      if (col == kGridSide) throw ParseError("zone map row has more than 8 entries", line_no);
      auto v = parse_double(token);
      if (!v || *v != std::floor(*v)) {
        throw ParseError(fmt::format("zone map entry '{}' is not an integer", token), line_no);
      }
      cells[row * kGridSide + col] = static_cast<int>(*v);
      ++col;
    }
    if (col != kGridSide) throw ParseError("zone map row has fewer than 8 entries", line_no);
    ++row;
  }
  if (row != kGridSide) throw ParseError("zone map has fewer than 8 rows", line_no);
  return ZoneMap(cells);
}

ZoneMap ZoneMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open zone map " + path.string());
  return parse(in);
}

void ZoneMap::write(std::ostream& out) const {
  for (std::size_t r = 0; r < kGridSide; ++r) {
    for (std::size_t c = 0; c < kGridSide; ++c) {
      out << assignment_[r * kGridSide + c] << (c + 1 == kGridSide ? '\n' : ' ');
    }
  }
}

std::filesystem::path default_zone_map_path() { return GLASSBOX_DEFAULT_ZONE_MAP; }

// ---------------------------------------------------------------------------
// CSV ingestion

std::vector<EyeSample> read_dataset(std::istream& in, const IngestOptions& options) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw ParseError("dataset is empty, header required", 1);
  ++line_no;
  if (trim(line) != expected_header()) {
    throw ParseError("dataset header does not match subject_id,group,age,sex,eye,layer,quality,c1_1..c8_8",
                     line_no);
  }

  std::vector<EyeSample> out;
  std::set<std::tuple<std::string, Laterality, Layer>> seen;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto fields = split(line, ',');
    if (fields.size() != kCsvColumns) {
      throw ParseError(fmt::format("expected {} columns, found {}", kCsvColumns, fields.size()),
                       line_no);
    }
    auto number = [&](std::size_t col, std::string_view what) {
      auto v = parse_double(fields[col]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError(fmt::format("{} '{}' is not a finite number", what, fields[col]), line_no);
      }
      return *v;
    };
    EyeSample s;
    try {
      s.subject_id = std::string(trim(fields[0]));
      if (s.subject_id.empty()) throw ConfigError("empty subject_id");
      s.group = parse_group(trim(fields[1]));
      s.age = number(2, "age");
      s.sex = parse_sex(trim(fields[3]));
      s.eye = parse_laterality(trim(fields[4]));
      s.layer = parse_layer(trim(fields[5]));
    } catch (const ConfigError& e) {
      throw ParseError(e.what(), line_no);
    }
    if (!trim(fields[6]).empty()) s.quality = number(6, "quality");
    for (std::size_t i = 0; i < kGridCells; ++i) {
      const double v = number(kMetaColumns + i, "cell " + cell_name(i));
      if (v < 0.0) throw ParseError(fmt::format("cell {} is negative", cell_name(i)), line_no);
      s.grid[i] = v;
    }
    if (!seen.emplace(s.subject_id, s.eye, s.layer).second) {
      throw IntegrityError(fmt::format("duplicate record for subject {} eye {} layer {} (line {})",
                                       s.subject_id, to_string(s.eye), to_string(s.layer),
                                       line_no));
    }
    if (options.min_quality && s.quality && *s.quality < *options.min_quality) continue;
    if (options.mirror_left && s.eye == Laterality::L) {
      for (std::size_t r = 0; r < kGridSide; ++r) {
        std::reverse(s.grid.begin() + static_cast<long>(r * kGridSide),
                     s.grid.begin() + static_cast<long>((r + 1) * kGridSide));
      }
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<EyeSample> load_dataset(const std::filesystem::path& path,
                                    const IngestOptions& options) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open dataset " + path.string());
  return read_dataset(in, options);
}

void write_dataset(std::ostream& out, std::span<const EyeSample> samples) {
  out << expected_header() << '\n';
  for (const auto& s : samples) {
    out << s.subject_id << ',' << to_string(s.group) << ',' << format_double(s.age) << ','
        << to_string(s.sex) << ',' << to_string(s.eye) << ',' << to_string(s.layer) << ',';
    if (s.quality) out << format_double(*s.quality);
    for (double v : s.grid) out << ',' << format_double(v);
    out << '\n';
  }
}

// ---------------------------------------------------------------------------
// Features

std::array<double, kZoneCount> aggregate_zones(const Grid& grid, const ZoneMap& zones) {
  std::array<double, kZoneCount> sums{};
  for (std::size_t i = 0; i < kGridCells; ++i) sums[zones.zone_of(i) - 1] += grid[i];
  for (std::size_t z = 0; z < kZoneCount; ++z) {
    sums[z] /= static_cast<double>(zones.cell_count(static_cast<int>(z + 1)));
  }
  return sums;
}

std::array<double, kZoneCount> aggregate_zones(const EyeSample& sample, const ZoneMap& zones) {
  return aggregate_zones(sample.grid, zones);
}

std::vector<EyeSample> select_eyes(std::span<const EyeSample> samples,
                                   const EyeStrategy& strategy) {
  std::vector<EyeSample> out;
  using Kind = EyeStrategy::Kind;
  switch (strategy.kind) {
    case Kind::LR:
      out.assign(samples.begin(), samples.end());
      break;
    case Kind::L:
    case Kind::R: {
      const auto keep = strategy.kind == Kind::L ? Laterality::L : Laterality::R;
      for (const auto& s : samples) {
        if (s.eye == keep) out.push_back(s);
      }
      break;
    }
    case Kind::Rand: {
      // Subjects in order of first appearance; the coin sequence depends
      // only on that order and the seed.
      std::vector<std::string> order;
      std::unordered_map<std::string, std::array<bool, 2>> has_eye;
      for (const auto& s : samples) {
        auto [it, inserted] = has_eye.try_emplace(s.subject_id, std::array<bool, 2>{false, false});
        if (inserted) order.push_back(s.subject_id);
        it->second[s.eye == Laterality::L ? 0 : 1] = true;
      }
      Rng rng(strategy.rand_seed);
      std::unordered_map<std::string, Laterality> chosen;
      for (const auto& id : order) {
        const auto& eyes = has_eye[id];
        Laterality pick;
        if (eyes[0] && eyes[1]) {
          pick = (rng() >> 63) != 0 ? Laterality::R : Laterality::L;
        } else {
          pick = eyes[0] ? Laterality::L : Laterality::R;
        }
        chosen.emplace(id, pick);
      }
      for (const auto& s : samples) {
        if (chosen.at(s.subject_id) == s.eye) out.push_back(s);
      }
      break;
    }
  }
  if (out.empty()) {
    throw ConfigError(fmt::format("eye strategy {} selects no samples", to_string(strategy.kind)));
  }
  return out;
}

std::vector<std::string> feature_names(FeatureSet set) {
  std::vector<std::string> names;
  if (set == FeatureSet::Zones) {
    for (std::size_t z = 1; z <= kZoneCount; ++z) names.push_back(fmt::format("Z{}", z));
  } else {
    for (std::size_t i = 0; i < kGridCells; ++i) names.push_back(cell_name(i));
  }
  return names;
}

FeatureMatrix build_feature_matrix(std::span<const EyeSample> samples, FeatureSet set,
                                   const ZoneMap& zones) {
  FeatureMatrix fm;
  fm.feature_names = feature_names(set);
  fm.rows = Matrix(0, fm.feature_names.size());
  if (!samples.empty()) {
    const Layer layer = samples.front().layer;
    for (const auto& s : samples) {
      if (s.layer != layer) {
        throw IntegrityError(fmt::format("feature matrix mixes layers {} and {}",
                                         to_string(layer), to_string(s.layer)));
      }
    }
  }
  for (const auto& s : samples) {
    if (set == FeatureSet::Zones) {
      const auto z = aggregate_zones(s, zones);
      fm.rows.append_row(z);
    } else {
      fm.rows.append_row(s.grid);
    }
    fm.labels.push_back(s.label());
    fm.subject_ids.push_back(s.subject_id);
    fm.laterality.push_back(s.eye);
  }
  return fm;
}

Grid unflatten_grid(std::span<const double> row) {
  if (row.size() != kGridCells) throw ConfigError("grid row must have 64 entries");
  Grid g{};
  std::copy(row.begin(), row.end(), g.begin());
  return g;
}

}  // namespace glassbox
