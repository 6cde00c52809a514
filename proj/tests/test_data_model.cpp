#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "glassbox/data_model.hpp"
#include "glassbox/error.hpp"
#include "support.hpp"

using namespace glassbox;
using testsupport::default_zones;
using testsupport::make_sample;

namespace {

std::string csv_of(const std::vector<EyeSample>& samples) {
  std::ostringstream out;
  write_dataset(out, samples);
  return out.str();
}

}  // namespace

TEST_CASE("dataset with two rows loads both") {
  std::vector<EyeSample> rows{make_sample("7", Group::MS, Laterality::L, Layer::GCL, 31.5),
                              make_sample("8", Group::HC, Laterality::R, Layer::RNFL, 12.25)};
  std::istringstream in(csv_of(rows));
  const auto got = read_dataset(in);
  REQUIRE(got.size() == 2);
  CHECK(got[0].subject_id == "7");
  CHECK(got[0].group == Group::MS);
  CHECK(got[0].grid[17] == 31.5);
  CHECK(got[1].layer == Layer::RNFL);
  CHECK(got[1].quality == 30.0);
}

TEST_CASE("row with 63 cell columns is a parse error on that line") {
  std::vector<EyeSample> rows{make_sample("1", Group::HC, Laterality::L, Layer::GCL),
                              make_sample("2", Group::HC, Laterality::L, Layer::GCL)};
  std::string text = csv_of(rows);
  // drop the last cell of the second data row (line 3)
  const auto last_nl = text.rfind('\n', text.size() - 2);
  const auto cut = text.rfind(',');
  REQUIRE(cut > last_nl);
  text = text.substr(0, cut) + "\n";
  std::istringstream in(text);
  try {
    read_dataset(in);
    FAIL("expected a parse error");
  } catch (const ParseError& e) {
    CHECK(e.line() == 3);
  }
}

TEST_CASE("duplicate subject, eye and layer is an integrity error") {
  std::vector<EyeSample> rows{make_sample("7", Group::MS, Laterality::L, Layer::GCL),
                              make_sample("7", Group::MS, Laterality::L, Layer::GCL, 20.0)};
  std::istringstream in(csv_of(rows));
  CHECK_THROWS_AS(read_dataset(in), IntegrityError);

  // same subject, other layer is fine
  rows[1].layer = Layer::RNFL;
  std::istringstream ok(csv_of(rows));
  CHECK(read_dataset(ok).size() == 2);
}

TEST_CASE("malformed values are parse errors") {
  auto text = csv_of({make_sample("1", Group::HC, Laterality::L, Layer::GCL)});
  SUBCASE("unknown group") {
    auto bad = text;
    bad.replace(bad.find(",HC,"), 4, ",XX,");
    std::istringstream in(bad);
    CHECK_THROWS_AS(read_dataset(in), ParseError);
  }
  SUBCASE("non-numeric cell") {
    auto bad = text;
    bad.replace(bad.rfind(",30"), 3, ",ab");
    std::istringstream in(bad);
    CHECK_THROWS_AS(read_dataset(in), ParseError);
  }
  SUBCASE("wrong header") {
    std::istringstream in("id,group\n");
    CHECK_THROWS_AS(read_dataset(in), ParseError);
  }
}

TEST_CASE("ingest options") {
  auto a = make_sample("1", Group::HC, Laterality::L, Layer::GCL);
  auto b = make_sample("2", Group::HC, Laterality::R, Layer::GCL);
  b.quality = 20.0;
  for (std::size_t c = 0; c < kGridSide; ++c) a.grid[c] = static_cast<double>(c);
  const auto text = csv_of({a, b});

  IngestOptions opt;
  opt.min_quality = 25.0;
  opt.mirror_left = true;
  std::istringstream in(text);
  const auto got = read_dataset(in, opt);
  REQUIRE(got.size() == 1);
  CHECK(got[0].grid[0] == 7.0);
  CHECK(got[0].grid[7] == 0.0);
}

TEST_CASE("zone aggregation examples") {
  const auto zones = default_zones();
  Grid g{};
  g.fill(0.0);
  for (std::size_t i = 0; i < kGridCells; ++i)
    if (zones.zone_of(i) == 1) g[i] = 41.78;
  const auto z = aggregate_zones(g, zones);
  CHECK(z[0] == doctest::Approx(41.78).epsilon(1e-15));

  Grid zero{};
  for (double v : aggregate_zones(zero, zones)) CHECK(v == 0.0);

  // zone 3 alternating 28 / 29, equal numbers of each
  Grid alt{};
  int k = 0;
  for (std::size_t i = 0; i < kGridCells; ++i)
    if (zones.zone_of(i) == 3) alt[i] = (k++ % 2 == 0) ? 28.0 : 29.0;
  REQUIRE(k % 2 == 0);
  // hand sum
  double sum = 0.0;
  for (std::size_t i = 0; i < kGridCells; ++i)
    if (zones.zone_of(i) == 3) sum += alt[i];
  CHECK(sum / k == 28.5);
  CHECK(aggregate_zones(alt, zones)[2] == doctest::Approx(28.5).epsilon(1e-15));
}

TEST_CASE("zone aggregation is linear and permutation invariant within a zone") {
  const auto zones = default_zones();
  Rng rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    Grid g{};
    for (auto& v : g) v = 60.0 * uniform01(rng);
    const double a = 0.1 + 3.0 * uniform01(rng);
    Grid scaled = g;
    for (auto& v : scaled) v *= a;
    const auto base = aggregate_zones(g, zones);
    const auto lin = aggregate_zones(scaled, zones);
    for (std::size_t z = 0; z < kZoneCount; ++z) CHECK(lin[z] == doctest::Approx(a * base[z]).epsilon(1e-12));

    // shuffle the values inside zone 2
    std::vector<std::size_t> cells;
    for (std::size_t i = 0; i < kGridCells; ++i)
      if (zones.zone_of(i) == 2) cells.push_back(i);
    std::vector<double> vals;
    for (auto i : cells) vals.push_back(g[i]);
    shuffle(vals.begin(), vals.end(), rng);
    Grid perm = g;
    for (std::size_t t = 0; t < cells.size(); ++t) perm[cells[t]] = vals[t];
    CHECK(aggregate_zones(perm, zones)[1] == doctest::Approx(base[1]).epsilon(1e-12));
  }
}

TEST_CASE("zone map validation") {
  std::array<int, kGridCells> a{};
  a.fill(1);
  CHECK_THROWS_AS(ZoneMap{a}, ConfigError);
  for (std::size_t i = 0; i < 6; ++i) a[i] = static_cast<int>(i + 1);
  CHECK_NOTHROW(ZoneMap{a});
  a[10] = 7;
  CHECK_THROWS_AS(ZoneMap{a}, ConfigError);

  std::istringstream short_map("1 2 3 4 5 6 1 1\n");
  CHECK_THROWS_AS(ZoneMap::parse(short_map), ParseError);

  const auto zones = default_zones();
  std::size_t total = 0;
  for (int z = 1; z <= 6; ++z) total += zones.cell_count(z);
  CHECK(total == 64);
}

TEST_CASE("eye strategies") {
  std::vector<EyeSample> s{make_sample("A", Group::HC, Laterality::L, Layer::GCL),
                           make_sample("A", Group::HC, Laterality::R, Layer::GCL),
                           make_sample("B", Group::MS, Laterality::R, Layer::GCL)};
  SUBCASE("L drops a subject without a left eye") {
    const auto out = select_eyes(s, {EyeStrategy::Kind::L, 0});
    REQUIRE(out.size() == 1);
    CHECK(out[0].subject_id == "A");
  }
  SUBCASE("Rand keeps the only eye available") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const auto out = select_eyes(s, {EyeStrategy::Kind::Rand, seed});
      REQUIRE(out.size() == 2);
      CHECK(out[1].subject_id == "B");
      CHECK(out[1].eye == Laterality::R);
    }
  }
  SUBCASE("LR keeps everything") { CHECK(select_eyes(s, {EyeStrategy::Kind::LR, 0}).size() == 3); }
  SUBCASE("empty result is a config error") {
    std::vector<EyeSample> only_r{s[2]};
    CHECK_THROWS_AS(select_eyes(only_r, {EyeStrategy::Kind::L, 0}), ConfigError);
  }
}

TEST_CASE("eye strategy properties on a random cohort") {
  Rng rng(5);
  std::vector<EyeSample> s;
  for (int i = 0; i < 170; ++i) {
    const auto id = "S" + std::to_string(i);
    const double u = uniform01(rng);
    const bool has_l = u < 0.8, has_r = u >= 0.1;
    for (auto layer : {Layer::GCL, Layer::RNFL}) {
      if (has_l) s.push_back(make_sample(id, Group::HC, Laterality::L, layer));
      if (has_r) s.push_back(make_sample(id, Group::HC, Laterality::R, layer));
    }
  }
  for (auto kind : {EyeStrategy::Kind::L, EyeStrategy::Kind::R, EyeStrategy::Kind::Rand, EyeStrategy::Kind::LR}) {
    const auto out = select_eyes(s, {kind, 99});
    std::map<std::pair<std::string, Layer>, int> per;
    for (const auto& e : out) ++per[{e.subject_id, e.layer}];
    for (const auto& [key, n] : per) CHECK(n <= (kind == EyeStrategy::Kind::LR ? 2 : 1));
    if (kind == EyeStrategy::Kind::Rand) {
      // one choice per subject, shared by both layers
      std::map<std::string, std::set<Laterality>> eyes;
      for (const auto& e : out) eyes[e.subject_id].insert(e.eye);
      for (const auto& [id, set] : eyes) CHECK(set.size() == 1);
      CHECK(out.size() == 2 * 170);
      // bit-reproducible
      const auto again = select_eyes(s, {kind, 99});
      REQUIRE(again.size() == out.size());
      for (std::size_t i = 0; i < out.size(); ++i) CHECK(again[i].eye == out[i].eye);
    }
  }
}

TEST_CASE("LR over a 316-eye cohort keeps 316 samples") {
  std::vector<EyeSample> s;
  int eyes = 0;
  for (int i = 0; i < 170; ++i) {
    const auto id = "S" + std::to_string(i);
    // 146 subjects with both eyes, 24 with one: 292 + 24 = 316
    s.push_back(make_sample(id, i < 111 ? Group::HC : Group::MS, Laterality::R, Layer::GCL));
    ++eyes;
    if (i < 146) {
      s.push_back(make_sample(id, i < 111 ? Group::HC : Group::MS, Laterality::L, Layer::GCL));
      ++eyes;
    }
  }
  REQUIRE(eyes == 316);
  CHECK(select_eyes(s, {EyeStrategy::Kind::LR, 0}).size() == 316);
}

TEST_CASE("feature matrices") {
  const auto zones = default_zones();
  std::vector<EyeSample> s{make_sample("1", Group::HC, Laterality::L, Layer::GCL),
                           make_sample("2", Group::MS, Laterality::L, Layer::GCL),
                           make_sample("3", Group::MS, Laterality::R, Layer::GCL)};
  Rng rng(3);
  for (auto& e : s)
    for (auto& v : e.grid) v = 20.0 + 30.0 * uniform01(rng);

  const auto fz = build_feature_matrix(s, FeatureSet::Zones, zones);
  CHECK(fz.rows.rows() == 3);
  CHECK(fz.rows.cols() == 6);
  CHECK(fz.feature_names.front() == "Z1");
  CHECK(fz.labels == std::vector<int>{0, 1, 1});

  const auto fg = build_feature_matrix(s, FeatureSet::Grid, zones);
  CHECK(fg.rows.cols() == 64);
  CHECK(fg.feature_names[cell_index(5, 4)] == "5.4");
  CHECK(fg.feature_names[0] == "1.1");
  CHECK(fg.feature_names[63] == "8.8");
  CHECK(parse_cell_name("5.4") == cell_index(5, 4));
  CHECK_FALSE(parse_cell_name("9.1").has_value());
  for (std::size_t r = 0; r < 3; ++r) CHECK(unflatten_grid(fg.rows.row(r)) == s[r].grid);

  s[1].layer = Layer::RNFL;
  CHECK_THROWS_AS(build_feature_matrix(s, FeatureSet::Zones, zones), IntegrityError);
}
