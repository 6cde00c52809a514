#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "glassbox/matrix.hpp"

namespace glassbox {

inline constexpr std::size_t kGridSide = 8;
inline constexpr std::size_t kGridCells = kGridSide * kGridSide;
inline constexpr std::size_t kZoneCount = 6;

enum class Group { HC, MS };
enum class Sex { M, F };
enum class Laterality { L, R };
enum class Layer { GCL, RNFL };

std::string_view to_string(Group g);
std::string_view to_string(Sex s);
std::string_view to_string(Laterality e);
std::string_view to_string(Layer l);

// Case-sensitive; throw ConfigError on an unknown token.
Group parse_group(std::string_view s);
Sex parse_sex(std::string_view s);
Laterality parse_laterality(std::string_view s);
Layer parse_layer(std::string_view s);

// 8x8 thickness map in micrometers, row-major. Cell (r, c) with 1-based
// coordinates lives at index (r - 1) * 8 + (c - 1), origin at (1,1).
using Grid = std::array<double, kGridCells>;

constexpr std::size_t cell_index(std::size_t row, std::size_t col) {
  return (row - 1) * kGridSide + (col - 1);
}

// "r.c" name of a grid cell, e.g. "5.4".
std::string cell_name(std::size_t index);

// Inverse of cell_name; nullopt if the name is not a grid cell.
std::optional<std::size_t> parse_cell_name(std::string_view name);

struct EyeSample {
  std::string subject_id;
  Group group = Group::HC;
  double age = 0.0;
  Sex sex = Sex::F;
  Laterality eye = Laterality::L;
  Layer layer = Layer::GCL;
  Grid grid{};
  std::optional<double> quality;

  int label() const { return group == Group::MS ? 1 : 0; }
};

// Assignment of every grid cell to one of six zones (1..6).
class ZoneMap {
 public:
  // Throws ConfigError unless every entry is in 1..6 and all six zones
  // are non-empty.
  explicit ZoneMap(const std::array<int, kGridCells>& assignment);

  // Eight lines of eight whitespace-separated integers.
  static ZoneMap parse(std::istream& in);
  static ZoneMap load(const std::filesystem::path& path);

  int zone_of(std::size_t cell) const { return assignment_[cell]; }
  const std::array<int, kGridCells>& assignment() const { return assignment_; }
  std::size_t cell_count(int zone) const { return counts_[zone - 1]; }

  void write(std::ostream& out) const;

 private:
  std::array<int, kGridCells> assignment_;
  std::array<std::size_t, kZoneCount> counts_{};
};

// Location of the zone map that ships with the repository.
std::filesystem::path default_zone_map_path();

struct IngestOptions {
  // Flip columns of left-eye grids so both eyes share the right-eye
  // orientation. Off by default: grids are used as stored.
  bool mirror_left = false;
  // Drop rows whose quality score is below this value. Rows without a
  // quality score are kept.
  std::optional<double> min_quality;
};

// Dataset CSV: subject_id,group,age,sex,eye,layer,quality,c1_1..c8_8.
std::vector<EyeSample> read_dataset(std::istream& in, const IngestOptions& options = {});
std::vector<EyeSample> load_dataset(const std::filesystem::path& path,
                                    const IngestOptions& options = {});
void write_dataset(std::ostream& out, std::span<const EyeSample> samples);

std::array<double, kZoneCount> aggregate_zones(const EyeSample& sample, const ZoneMap& zones);
std::array<double, kZoneCount> aggregate_zones(const Grid& grid, const ZoneMap& zones);

struct EyeStrategy {
  enum class Kind { L, R, Rand, LR };
  Kind kind = Kind::LR;
  std::uint64_t rand_seed = 0;
};

std::string_view to_string(EyeStrategy::Kind k);
EyeStrategy::Kind parse_eye_strategy(std::string_view s);

// L/R keep one laterality, Rand one eye per subject (a seeded coin only
// when both eyes exist), LR everything. The Rand choice is made per
// subject, so it is shared across layers. Output keeps input order.
// Throws ConfigError when nothing survives.
std::vector<EyeSample> select_eyes(std::span<const EyeSample> samples, const EyeStrategy& strategy);

enum class FeatureSet { Zones, Grid };
std::string_view to_string(FeatureSet f);
FeatureSet parse_feature_set(std::string_view s);

struct FeatureMatrix {
  std::vector<std::string> feature_names;
  Matrix rows;
  std::vector<int> labels;  // MS = 1, HC = 0
  std::vector<std::string> subject_ids;
  std::vector<Laterality> laterality;

  std::size_t size() const { return labels.size(); }
  std::size_t dims() const { return feature_names.size(); }
};

std::vector<std::string> feature_names(FeatureSet set);

// All samples must share one layer (IntegrityError otherwise).
FeatureMatrix build_feature_matrix(std::span<const EyeSample> samples, FeatureSet set,
                                   const ZoneMap& zones);

// Inverse of the Grid flattening used by build_feature_matrix.
Grid unflatten_grid(std::span<const double> row);

}  // namespace glassbox
