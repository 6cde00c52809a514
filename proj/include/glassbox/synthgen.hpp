#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "glassbox/data_model.hpp"

namespace glassbox {

struct ZoneStat {
  double mean = 0.0;
  double sd = 1.0;
};

struct GroupCohort {
  std::size_t subjects = 1;
  std::size_t left_eyes = 1;
  std::size_t right_eyes = 1;
  std::size_t males = 0;
  double age_mean = 40.0;
  double age_sd = 10.0;
  // Zone mean/sd in micrometers, indexed [layer][zone - 1].
  std::array<std::array<ZoneStat, kZoneCount>, 2> zones{};
};

struct CohortSpec {
  std::array<GroupCohort, 2> groups{};  // indexed by Group
  // Correlation between the two eyes of one subject, per zone.
  double rho_eye = 0.8;
  // Cell noise sd as a fraction of the zone sd.
  double cell_sd_fraction = 0.5;
  double quality_min = 26.0;
  double quality_max = 40.0;
  std::uint64_t seed = 0;

  GroupCohort& group(Group g) { return groups[static_cast<std::size_t>(g)]; }
  const GroupCohort& group(Group g) const { return groups[static_cast<std::size_t>(g)]; }
  const ZoneStat& stat(Layer layer, Group g, int zone) const {
    return group(g).zones[static_cast<std::size_t>(layer)][static_cast<std::size_t>(zone - 1)];
  }

  // Throws ConfigError on a non-positive sd, rho outside [0,1], zero
  // counts or eye counts that no assignment of subjects can produce.
  void validate() const;
};

CohortSpec default_paper_spec();

// Every subject gets a latent zone vector per layer; each eye blends it
// with an eye-specific draw by rho_eye, and each cell adds Gaussian noise
// around its zone value, clamped at 0. The latent sd is shrunk so that
// the zone average of an eye has exactly the spec sd.
// Output order: HC subjects, then MS; per subject L before R, GCL before
// RNFL.
std::vector<EyeSample> generate_cohort(const CohortSpec& spec, const ZoneMap& zones);

}  // namespace glassbox
