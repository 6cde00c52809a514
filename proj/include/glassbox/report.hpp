#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "glassbox/data_model.hpp"
#include "glassbox/ebm.hpp"
#include "glassbox/evaluation.hpp"
#include "glassbox/matrix.hpp"
#include "glassbox/shap.hpp"

namespace glassbox {

// Display-only resampling of a small grid. Output pixel i samples the
// source at (i + 0.5) / factor - 0.5 with edge clamping. The cubic uses
// the Keys kernel with a = -0.5. Throws ConfigError when factor is 0.
Matrix bicubic_upsample(const Matrix& grid, std::size_t factor);
Matrix bilinear_upsample(const Matrix& grid, std::size_t factor);

Matrix grid_matrix(const Grid& grid);

struct FiveNumber {
  double min = 0.0, q1 = 0.0, median = 0.0, q3 = 0.0, max = 0.0;
};
// Linear-interpolated quantiles over the finite values; all NaN if none.
FiveNumber five_number(std::span<const double> values);

namespace plots {

// Diverging maps are centered on zero and scaled by max |v|; sequential
// maps stretch min..max. Axis ticks are placed every label_every pixels
// and numbered from 1.
std::string heatmap(const Matrix& values, std::string_view title, bool diverging,
                    std::size_t label_every = 1);
std::string bar(std::span<const std::string> names, std::span<const double> values,
                std::string_view title, std::string_view axis_label);
std::string beeswarm(const GlobalShapSummary& summary, std::size_t max_features);
std::string dependence(std::span<const DependencePoint> points, std::string_view feature,
                       OutputSpace space);
std::string waterfall(const Waterfall& w, std::string_view title);
std::string ebm_curve(std::span<const CurvePoint> curve, std::string_view feature);
std::string pair_map(const PairMap& map, std::string_view first, std::string_view second);

struct BoxSeries {
  std::string label;
  std::vector<double> values;
};
std::string boxplot(std::span<const BoxSeries> series, std::string_view title,
                    std::optional<double> baseline = std::nullopt);

}  // namespace plots

// CSV helpers. Doubles use the shortest round-trip form.
void write_confusion_csv(std::ostream& out, const MetricsReport& m);
void write_grid_csv(std::ostream& out, const Matrix& grid);
void write_waterfall_csv(std::ostream& out, const Waterfall& w);
void write_shap_values_csv(std::ostream& out, const GlobalShapSummary& s,
                           std::span<const std::string> sample_ids);
void write_shap_long_csv(std::ostream& out, const GlobalShapSummary& s);
void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve);
void write_pair_map_csv(std::ostream& out, const PairMap& map);

// Waterfall of an EBM term decomposition, in log-odds.
Waterfall ebm_waterfall(const EbmExplanation& e, std::size_t max_items);

// 8x8 map of mean |score| of the main terms of a 64-cell EBM.
Grid ebm_grid(const EbmModel& model, std::span<const std::string> feature_names);

}  // namespace glassbox
