#include "glassbox/synthgen.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "glassbox/error.hpp"
#include "glassbox/random.hpp"

namespace glassbox {

namespace {

enum class EyePattern { Both, LeftOnly, RightOnly };

constexpr std::array<Layer, 2> kLayers{Layer::GCL, Layer::RNFL};
constexpr std::array<Group, 2> kGroups{Group::HC, Group::MS};

}  // namespace

void CohortSpec::validate() const {
  if (!(rho_eye >= 0.0 && rho_eye <= 1.0)) throw ConfigError("rho_eye must lie in [0, 1]");
  if (!(cell_sd_fraction >= 0.0) || !std::isfinite(cell_sd_fraction)) {
    throw ConfigError("cell_sd_fraction must be a finite non-negative number");
  }
  if (!(quality_min <= quality_max)) throw ConfigError("quality_min exceeds quality_max");
  for (Group g : kGroups) {
    const auto& c = group(g);
    const auto name = to_string(g);
    if (c.subjects < 1) throw ConfigError(fmt::format("{} needs at least one subject", name));
    if (c.left_eyes > c.subjects || c.right_eyes > c.subjects) {
      throw ConfigError(fmt::format("{} has more eyes per side than subjects", name));
    }
    if (c.left_eyes + c.right_eyes < c.subjects) {
      throw ConfigError(fmt::format("{} eye counts leave some subjects without an eye", name));
    }
    if (c.males > c.subjects) throw ConfigError(fmt::format("{} has more males than subjects", name));
    if (!(c.age_sd >= 0.0)) throw ConfigError(fmt::format("{} age sd must be non-negative", name));
    for (const auto& layer : c.zones) {
      for (const auto& z : layer) {
        if (!(z.sd > 0.0) || !std::isfinite(z.mean)) {
          throw ConfigError(fmt::format("{} zone statistics need a finite mean and a positive sd", name));
        }
      }
    }
  }
}

CohortSpec default_paper_spec() {
  CohortSpec spec;
  auto& hc = spec.group(Group::HC);
  hc.subjects = 111;
  hc.left_eyes = 109;
  hc.right_eyes = 107;
  hc.males = 25;
  hc.age_mean = 44.74;
  hc.age_sd = 11.09;
  hc.zones[0] = {{{41.78, 2.89}, {49.22, 3.68}, {28.52, 2.36}, {27.23, 2.46}, {28.46, 2.35}, {28.39, 2.62}}};
  hc.zones[1] = {{{31.87, 4.26}, {28.32, 2.99}, {63.94, 10.25}, {80.37, 12.93}, {30.46, 4.38}, {22.39, 2.73}}};

  auto& ms = spec.group(Group::MS);
  ms.subjects = 59;
  ms.left_eyes = 50;
  ms.right_eyes = 50;
  ms.males = 10;
  ms.age_mean = 41.94;
  ms.age_sd = 13.85;
  ms.zones[0] = {{{36.70, 6.62}, {43.50, 7.71}, {27.56, 3.40}, {25.42, 2.55}, {26.38, 2.87}, {27.13, 3.43}}};
  ms.zones[1] = {{{30.12, 5.69}, {26.66, 4.17}, {60.58, 12.09}, {72.40, 13.40}, {28.63, 4.88}, {22.91, 5.66}}};
  return spec;
}

std::vector<EyeSample> generate_cohort(const CohortSpec& spec, const ZoneMap& zones) {
  spec.validate();
  std::vector<EyeSample> out;
  const double f2 = spec.cell_sd_fraction * spec.cell_sd_fraction;
  const double shared = std::sqrt(spec.rho_eye);
  const double own = std::sqrt(1.0 - spec.rho_eye);

  for (Group g : kGroups) {
    const auto& c = spec.group(g);
    const auto tag = to_string(g);
    Rng layout(derive_seed(spec.seed, tag));

    std::vector<EyePattern> patterns;
    const std::size_t both = c.left_eyes + c.right_eyes - c.subjects;
    patterns.insert(patterns.end(), both, EyePattern::Both);
    patterns.insert(patterns.end(), c.left_eyes - both, EyePattern::LeftOnly);
    patterns.insert(patterns.end(), c.right_eyes - both, EyePattern::RightOnly);
    shuffle(patterns.begin(), patterns.end(), layout);

    std::vector<Sex> sexes(c.subjects, Sex::F);
    std::fill_n(sexes.begin(), c.males, Sex::M);
    shuffle(sexes.begin(), sexes.end(), layout);

    // Latent sd per [layer][zone] such that latent variance plus the
    // averaged cell noise equals the zone variance.
    std::array<std::array<double, kZoneCount>, 2> latent_sd{};
    for (std::size_t l = 0; l < 2; ++l) {
      for (std::size_t z = 0; z < kZoneCount; ++z) {
        const double n = static_cast<double>(zones.cell_count(static_cast<int>(z + 1)));
        latent_sd[l][z] = c.zones[l][z].sd * std::sqrt(std::max(0.0, 1.0 - f2 / n));
      }
    }

    for (std::size_t s = 0; s < c.subjects; ++s) {
      Rng rng(derive_seed(derive_seed(spec.seed, tag), s));
      const std::string id = fmt::format("{}{:03}", tag, s + 1);
      const double age = std::max(18.0, normal(rng, c.age_mean, c.age_sd));

      std::array<std::array<double, kZoneCount>, 2> latent{};
      for (std::size_t l = 0; l < 2; ++l) {
        for (std::size_t z = 0; z < kZoneCount; ++z) latent[l][z] = latent_sd[l][z] * standard_normal(rng);
      }

      std::vector<Laterality> eyes;
      if (patterns[s] != EyePattern::RightOnly) eyes.push_back(Laterality::L);
      if (patterns[s] != EyePattern::LeftOnly) eyes.push_back(Laterality::R);
      for (Laterality eye : eyes) {
        const double quality =
            spec.quality_min + (spec.quality_max - spec.quality_min) * uniform01(rng);
        for (Layer layer : kLayers) {
          const auto l = static_cast<std::size_t>(layer);
          std::array<double, kZoneCount> zone_value{};
          for (std::size_t z = 0; z < kZoneCount; ++z) {
            const double e = latent_sd[l][z] * standard_normal(rng);
            zone_value[z] = c.zones[l][z].mean + shared * latent[l][z] + own * e;
          }
          EyeSample sample;
          sample.subject_id = id;
          sample.group = g;
          sample.age = std::round(age * 10.0) / 10.0;
          sample.sex = sexes[s];
          sample.eye = eye;
          sample.layer = layer;
          sample.quality = std::round(quality * 10.0) / 10.0;
          for (std::size_t cell = 0; cell < kGridCells; ++cell) {
            const auto z = static_cast<std::size_t>(zones.zone_of(cell) - 1);
            const double noise = spec.cell_sd_fraction * c.zones[l][z].sd * standard_normal(rng);
            sample.grid[cell] = std::max(0.0, zone_value[z] + noise);
          }
          out.push_back(std::move(sample));
        }
      }
    }
  }
  return out;
}

}  // namespace glassbox
