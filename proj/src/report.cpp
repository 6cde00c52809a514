#include "glassbox/report.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <ostream>

#include <fmt/format.h>

#include "glassbox/error.hpp"
#include "glassbox/svg.hpp"
#include "glassbox/text.hpp"

namespace glassbox {

// ---------------------------------------------------------------------------
// Resampling

namespace {

double keys_kernel(double x) {
  constexpr double a = -0.5;
  x = std::abs(x);
  if (x <= 1.0) return ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0;
  if (x < 2.0) return ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a;
  return 0.0;
}

double triangle_kernel(double x) { return std::max(0.0, 1.0 - std::abs(x)); }

// Resamples one axis; `along_rows` selects which index is stretched.
template <class Kernel>
Matrix resample_axis(const Matrix& in, std::size_t factor, bool along_rows, Kernel kernel, int taps) {
  const std::size_t n_in = along_rows ? in.rows() : in.cols();
  const std::size_t n_out = n_in * factor;
  Matrix out(along_rows ? n_out : in.rows(), along_rows ? in.cols() : n_out);
  const auto last = static_cast<long>(n_in) - 1;
  for (std::size_t i = 0; i < n_out; ++i) {
    const double src = (static_cast<double>(i) + 0.5) / static_cast<double>(factor) - 0.5;
    const double base = std::floor(src);
    const double t = src - base;
    std::vector<std::pair<std::size_t, double>> weights;
    for (int m = 1 - taps; m <= taps; ++m) {
      const double w = kernel(t - m);
      if (w == 0.0) continue;
      const long idx = std::clamp(static_cast<long>(base) + m, 0L, last);
      weights.emplace_back(static_cast<std::size_t>(idx), w);
    }
    const std::size_t other = along_rows ? in.cols() : in.rows();
    for (std::size_t k = 0; k < other; ++k) {
      double acc = 0.0;
      for (const auto& [idx, w] : weights) acc += w * (along_rows ? in(idx, k) : in(k, idx));
      (along_rows ? out(i, k) : out(k, i)) = acc;
    }
  }
  return out;
}

}  // namespace

Matrix bicubic_upsample(const Matrix& grid, std::size_t factor) {
  if (factor == 0) throw ConfigError("upsampling factor must be at least 1");
  return resample_axis(resample_axis(grid, factor, true, keys_kernel, 2), factor, false, keys_kernel, 2);
}

Matrix bilinear_upsample(const Matrix& grid, std::size_t factor) {
  if (factor == 0) throw ConfigError("upsampling factor must be at least 1");
  return resample_axis(resample_axis(grid, factor, true, triangle_kernel, 1), factor, false,
                       triangle_kernel, 1);
}

Matrix grid_matrix(const Grid& grid) {
  Matrix m(kGridSide, kGridSide);
  for (std::size_t i = 0; i < kGridCells; ++i) m(i / kGridSide, i % kGridSide) = grid[i];
  return m;
}

FiveNumber five_number(std::span<const double> values) {
  std::vector<double> v;
  for (double x : values) {
    if (std::isfinite(x)) v.push_back(x);
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  if (v.empty()) return FiveNumber{nan, nan, nan, nan, nan};
  std::sort(v.begin(), v.end());
  auto q = [&](double p) {
    const double pos = p * static_cast<double>(v.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (pos - static_cast<double>(lo)) * (v[hi] - v[lo]);
  };
  return FiveNumber{v.front(), q(0.25), q(0.5), q(0.75), v.back()};
}

// ---------------------------------------------------------------------------
// Plots

namespace plots {

namespace {

struct Range {
  double lo = 0.0, hi = 1.0;
  double map(double v, double a, double b) const {
    return hi > lo ? a + (v - lo) / (hi - lo) * (b - a) : (a + b) / 2.0;
  }
};

Range finite_range(std::span<const double> values, bool include_zero = false) {
  Range r{std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()};
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    r.lo = std::min(r.lo, v);
    r.hi = std::max(r.hi, v);
  }
  if (r.lo > r.hi) return Range{0.0, 1.0};
  if (include_zero) {
    r.lo = std::min(r.lo, 0.0);
    r.hi = std::max(r.hi, 0.0);
  }
  if (r.lo == r.hi) {
    r.lo -= 0.5;
    r.hi += 0.5;
  }
  return r;
}

std::string short_number(double v) { return fmt::format("{:.3g}", v); }

void x_axis(svg::Document& doc, const Range& r, double x0, double x1, double y, std::string_view label) {
  doc.line(x0, y, x1, y, "#444");
  for (int k = 0; k <= 4; ++k) {
    const double v = r.lo + (r.hi - r.lo) * k / 4.0;
    const double x = r.map(v, x0, x1);
    doc.line(x, y, x, y + 4, "#444");
    doc.text(x, y + 16, short_number(v), 10, "middle");
  }
  doc.text((x0 + x1) / 2.0, y + 32, label, 11, "middle");
}

void y_axis(svg::Document& doc, const Range& r, double y0, double y1, double x, std::string_view label) {
  doc.line(x, y0, x, y1, "#444");
  for (int k = 0; k <= 4; ++k) {
    const double v = r.lo + (r.hi - r.lo) * k / 4.0;
    const double y = r.map(v, y1, y0);
    doc.line(x - 4, y, x, y, "#444");
    doc.text(x - 6, y + 3, short_number(v), 10, "end");
  }
  doc.rotated_text(x - 48, (y0 + y1) / 2.0, -90, label, 11, "middle");
}

}  // namespace

std::string heatmap(const Matrix& values, std::string_view title, bool diverging, std::size_t label_every) {
  const double cell = std::max(2.0, 320.0 / static_cast<double>(std::max(values.rows(), values.cols())));
  const double left = 40, top = 40;
  svg::Document doc(left + cell * static_cast<double>(values.cols()) + 90,
                    top + cell * static_cast<double>(values.rows()) + 30);
  doc.text(left, 22, title, 13);
  std::span<const double> all = values.data();
  double scale = 0.0;
  for (double v : all) {
    if (std::isfinite(v)) scale = std::max(scale, std::abs(v));
  }
  const Range seq = finite_range(all);
  auto color = [&](double v) {
    if (!std::isfinite(v)) return std::string("#cccccc");
    if (diverging) return svg::diverging(scale > 0.0 ? v / scale : 0.0).hex();
    return svg::sequential(seq.map(v, 0.0, 1.0)).hex();
  };
  for (std::size_t r = 0; r < values.rows(); ++r) {
    for (std::size_t c = 0; c < values.cols(); ++c) {
      doc.rect(left + cell * static_cast<double>(c), top + cell * static_cast<double>(r), cell, cell,
               color(values(r, c)));
    }
  }
  if (label_every > 0) {
    const double step = cell * static_cast<double>(label_every);
    for (std::size_t k = 0; k * label_every < values.rows(); ++k) {
      doc.text(left - 6, top + step * (static_cast<double>(k) + 0.5) + 4, std::to_string(k + 1), 10, "end");
    }
    for (std::size_t k = 0; k * label_every < values.cols(); ++k) {
      doc.text(left + step * (static_cast<double>(k) + 0.5), top - 4, std::to_string(k + 1), 10, "middle");
    }
  }
  // Legend
  const double lx = left + cell * static_cast<double>(values.cols()) + 20;
  const double lh = cell * static_cast<double>(values.rows());
  for (int k = 0; k < 20; ++k) {
    const double t = 1.0 - (k + 0.5) / 20.0;
    const std::string fill = diverging ? svg::diverging(2.0 * t - 1.0).hex() : svg::sequential(t).hex();
    doc.rect(lx, top + lh * k / 20.0, 14, lh / 20.0 + 0.5, fill);
  }
  const double hi = diverging ? scale : seq.hi;
  const double lo = diverging ? -scale : seq.lo;
  doc.text(lx + 18, top + 8, short_number(hi), 10);
  doc.text(lx + 18, top + lh, short_number(lo), 10);
  return doc.str();
}

std::string bar(std::span<const std::string> names, std::span<const double> values, std::string_view title,
                std::string_view axis_label) {
  if (names.size() != values.size()) throw ConfigError("bar plot names and values differ in length");
  const double row = 18, left = 90, width = 320, top = 36;
  svg::Document doc(left + width + 40, top + row * static_cast<double>(names.size()) + 50);
  doc.text(10, 22, title, 13);
  const Range r = finite_range(values, true);
  const double zero = r.map(0.0, left, left + width);
  for (std::size_t i = 0; i < names.size(); ++i) {
    const double y = top + row * static_cast<double>(i);
    const double x = r.map(values[i], left, left + width);
    doc.rect(std::min(x, zero), y + 2, std::abs(x - zero), row - 4, values[i] >= 0 ? "#ff0d57" : "#1e88e5");
    doc.text(left - 6, y + row / 2 + 4, names[i], 10, "end");
  }
  x_axis(doc, r, left, left + width, top + row * static_cast<double>(names.size()) + 4, axis_label);
  return doc.str();
}

std::string beeswarm(const GlobalShapSummary& summary, std::size_t max_features) {
  const std::size_t shown = std::min(max_features, summary.ranking.size());
  const double row = 30, left = 90, width = 340, top = 36;
  svg::Document doc(left + width + 40, top + row * static_cast<double>(shown) + 50);
  doc.text(10, 22, fmt::format("SHAP values ({})", to_string(summary.space)), 13);
  std::span<const double> all = summary.phi.data();
  const Range r = finite_range(all, true);
  const double zero = r.map(0.0, left, left + width);
  doc.line(zero, top, zero, top + row * static_cast<double>(shown), "#999", 1.0, true);
  for (std::size_t k = 0; k < shown; ++k) {
    const std::size_t j = summary.ranking[k];
    const double cy = top + row * (static_cast<double>(k) + 0.5);
    doc.text(left - 6, cy + 4, summary.feature_names[j], 10, "end");
    std::vector<double> column(summary.values.rows());
    for (std::size_t i = 0; i < column.size(); ++i) column[i] = summary.values(i, j);
    const Range vr = finite_range(column);
    // Points sharing a pixel bucket fan out vertically.
    std::map<long, int> occupancy;
    for (std::size_t i = 0; i < summary.phi.rows(); ++i) {
      const double x = r.map(summary.phi(i, j), left, left + width);
      const int n = occupancy[std::lround(x / 3.0)]++;
      const double offset = (n % 2 == 0 ? 1.0 : -1.0) * std::min(12.0, 1.5 * ((n + 1) / 2));
      doc.circle(x, cy + offset, 1.8, svg::diverging(vr.map(column[i], -1.0, 1.0)).hex());
    }
  }
  x_axis(doc, r, left, left + width, top + row * static_cast<double>(shown) + 4, "SHAP value");
  return doc.str();
}

std::string dependence(std::span<const DependencePoint> points, std::string_view feature, OutputSpace space) {
  const double left = 70, top = 36, width = 320, height = 240;
  svg::Document doc(left + width + 30, top + height + 50);
  doc.text(10, 22, fmt::format("Dependence: {}", feature), 13);
  std::vector<double> xs, ys;
  for (const auto& p : points) {
    xs.push_back(p.value);
    ys.push_back(p.phi);
  }
  const Range rx = finite_range(xs), ry = finite_range(ys, true);
  doc.line(left, ry.map(0.0, top + height, top), left + width, ry.map(0.0, top + height, top), "#999", 1.0, true);
  for (const auto& p : points) {
    doc.circle(rx.map(p.value, left, left + width), ry.map(p.phi, top + height, top), 2.0, "#1e88e5");
  }
  x_axis(doc, rx, left, left + width, top + height, fmt::format("{} (um)", feature));
  y_axis(doc, ry, top, top + height, left, fmt::format("SHAP ({})", to_string(space)));
  return doc.str();
}

std::string waterfall(const Waterfall& w, std::string_view title) {
  const std::size_t rows = w.items.size() + (w.folded_count > 0 ? 1 : 0);
  const double row = 20, left = 150, width = 320, top = 40;
  svg::Document doc(left + width + 60, top + row * static_cast<double>(rows) + 60);
  doc.text(10, 22, title, 13);
  std::vector<double> marks{w.base_value, w.output};
  double running = w.base_value;
  for (const auto& item : w.items) marks.push_back(running += item.phi);
  if (w.folded_count > 0) marks.push_back(running += w.folded_sum);
  const Range r = finite_range(marks);
  running = w.base_value;
  auto step = [&](std::size_t i, std::string_view label, double delta) {
    const double y = top + row * static_cast<double>(i);
    const double x0 = r.map(running, left, left + width);
    const double x1 = r.map(running + delta, left, left + width);
    doc.rect(std::min(x0, x1), y + 3, std::max(std::abs(x1 - x0), 0.5), row - 6,
             delta >= 0 ? "#ff0d57" : "#1e88e5");
    doc.text(left - 6, y + row / 2 + 4, label, 10, "end");
    doc.text(std::max(x0, x1) + 4, y + row / 2 + 4, fmt::format("{:+.3f}", delta), 9);
    running += delta;
  };
  std::size_t i = 0;
  for (const auto& item : w.items) step(i++, item.feature, item.phi);
  if (w.folded_count > 0) step(i++, fmt::format("{} other features", w.folded_count), w.folded_sum);
  const double bottom = top + row * static_cast<double>(rows);
  const double xb = r.map(w.base_value, left, left + width);
  const double xo = r.map(w.output, left, left + width);
  doc.line(xb, top, xb, bottom, "#777", 1.0, true);
  doc.line(xo, top, xo, bottom, "#222", 1.0, true);
  x_axis(doc, r, left, left + width, bottom + 4, fmt::format("{}: base {:.3f} -> output {:.3f}",
                                                             to_string(w.space), w.base_value, w.output));
  return doc.str();
}

std::string ebm_curve(std::span<const CurvePoint> curve, std::string_view feature) {
  const double left = 70, top = 36, width = 320, height = 220;
  svg::Document doc(left + width + 30, top + height + 50);
  doc.text(10, 22, fmt::format("EBM score: {}", feature), 13);
  std::vector<double> edges, scores;
  for (const auto& p : curve) {
    for (double e : {p.lower, p.upper}) {
      if (std::isfinite(e)) edges.push_back(e);
    }
    scores.push_back(p.score);
  }
  Range rx = finite_range(edges);
  const double pad = (rx.hi - rx.lo) * 0.1;
  rx.lo -= pad;
  rx.hi += pad;
  const Range ry = finite_range(scores, true);
  std::string points;
  for (const auto& p : curve) {
    const double lo = std::isfinite(p.lower) ? p.lower : rx.lo;
    const double hi = std::isfinite(p.upper) ? p.upper : rx.hi;
    const double y = ry.map(p.score, top + height, top);
    points += fmt::format("{},{} {},{} ", svg::num(rx.map(lo, left, left + width)), svg::num(y),
                          svg::num(rx.map(hi, left, left + width)), svg::num(y));
  }
  if (!points.empty()) points.pop_back();
  doc.line(left, ry.map(0.0, top + height, top), left + width, ry.map(0.0, top + height, top), "#999", 1.0, true);
  doc.polyline(points, "#ff0d57");
  x_axis(doc, rx, left, left + width, top + height, fmt::format("{} (um)", feature));
  y_axis(doc, ry, top, top + height, left, "score (log-odds)");
  return doc.str();
}

std::string pair_map(const PairMap& map, std::string_view first, std::string_view second) {
  std::string out = heatmap(map.scores, fmt::format("EBM interaction: {} (rows) x {} (columns)", first, second),
                            true, 0);
  return out;
}

std::string boxplot(std::span<const BoxSeries> series, std::string_view title, std::optional<double> baseline) {
  const double slot = 26, left = 60, top = 36, height = 220;
  svg::Document doc(left + slot * static_cast<double>(series.size()) + 30, top + height + 120);
  doc.text(10, 22, title, 13);
  Range r{0.0, 1.0};
  y_axis(doc, r, top, top + height, left, "");
  if (baseline) {
    const double y = r.map(*baseline, top + height, top);
    doc.line(left, y, left + slot * static_cast<double>(series.size()), y, "#2e7d32", 1.0, true);
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    const FiveNumber f = five_number(series[i].values);
    const double cx = left + slot * (static_cast<double>(i) + 0.5);
    if (std::isfinite(f.median)) {
      auto y = [&](double v) { return r.map(std::clamp(v, 0.0, 1.0), top + height, top); };
      doc.line(cx, y(f.min), cx, y(f.max), "#444");
      doc.rect(cx - 8, y(f.q3), 16, std::max(0.5, y(f.q1) - y(f.q3)), "#9ecae1", "#444");
      doc.line(cx - 8, y(f.median), cx + 8, y(f.median), "#111", 1.5);
    }
    doc.rotated_text(cx + 3, top + height + 10, -60, series[i].label, 9);
  }
  return doc.str();
}

}  // namespace plots

// ---------------------------------------------------------------------------
// CSV

void write_confusion_csv(std::ostream& out, const MetricsReport& m) {
  out << "actual,predicted_HC,predicted_MS\n";
  out << "HC," << m.tn << ',' << m.fp << '\n';
  out << "MS," << m.fn << ',' << m.tp << '\n';
}

void write_grid_csv(std::ostream& out, const Matrix& grid) {
  for (std::size_t r = 0; r < grid.rows(); ++r) {
    for (std::size_t c = 0; c < grid.cols(); ++c) {
      if (c) out << ',';
      out << format_double(grid(r, c));
    }
    out << '\n';
  }
}

void write_waterfall_csv(std::ostream& out, const Waterfall& w) {
  out << "term,contribution,cumulative\n";
  double running = w.base_value;
  out << "base," << format_double(w.base_value) << ',' << format_double(running) << '\n';
  for (const auto& item : w.items) {
    running += item.phi;
    out << item.feature << ',' << format_double(item.phi) << ',' << format_double(running) << '\n';
  }
  if (w.folded_count > 0) {
    running += w.folded_sum;
    out << w.folded_count << " other features," << format_double(w.folded_sum) << ','
        << format_double(running) << '\n';
  }
  out << "output," << format_double(w.output) << ',' << format_double(w.output) << '\n';
}

void write_shap_values_csv(std::ostream& out, const GlobalShapSummary& s,
                           std::span<const std::string> sample_ids) {
  out << "sample,base_value";
  for (const auto& n : s.feature_names) out << ",phi_" << n;
  for (const auto& n : s.feature_names) out << ",value_" << n;
  out << '\n';
  for (std::size_t i = 0; i < s.phi.rows(); ++i) {
    out << (i < sample_ids.size() ? sample_ids[i] : std::to_string(i)) << ',' << format_double(s.base_value);
    for (std::size_t j = 0; j < s.phi.cols(); ++j) out << ',' << format_double(s.phi(i, j));
    for (std::size_t j = 0; j < s.values.cols(); ++j) out << ',' << format_double(s.values(i, j));
    out << '\n';
  }
}

void write_shap_long_csv(std::ostream& out, const GlobalShapSummary& s) {
  out << "feature,rank,sample,phi,value\n";
  for (std::size_t k = 0; k < s.ranking.size(); ++k) {
    const std::size_t j = s.ranking[k];
    for (std::size_t i = 0; i < s.phi.rows(); ++i) {
      out << s.feature_names[j] << ',' << k + 1 << ',' << i << ',' << format_double(s.phi(i, j)) << ','
          << format_double(s.values(i, j)) << '\n';
    }
  }
}

void write_curve_csv(std::ostream& out, std::span<const CurvePoint> curve) {
  out << "lower,upper,score,count\n";
  for (const auto& p : curve) {
    out << format_double(p.lower) << ',' << format_double(p.upper) << ',' << format_double(p.score) << ','
        << format_double(p.count) << '\n';
  }
}

void write_pair_map_csv(std::ostream& out, const PairMap& map) {
  out << "first_bin,second_bin,score\n";
  for (std::size_t r = 0; r < map.scores.rows(); ++r) {
    for (std::size_t c = 0; c < map.scores.cols(); ++c) {
      out << r << ',' << c << ',' << format_double(map.scores(r, c)) << '\n';
    }
  }
}

Waterfall ebm_waterfall(const EbmExplanation& e, std::size_t max_items) {
  Waterfall w;
  w.base_value = e.intercept;
  w.output = e.raw_score;
  w.space = OutputSpace::RawScore;
  std::size_t k = 0;
  for (const auto& t : e.sorted_by_magnitude()) {
    if (t.value == 0.0) continue;
    if (k++ < max_items) {
      w.items.push_back(WaterfallItem{t.term, t.features.front(), t.value});
    } else {
      ++w.folded_count;
      w.folded_sum += t.value;
    }
  }
  return w;
}

Grid ebm_grid(const EbmModel& model, std::span<const std::string> feature_names) {
  if (feature_names.size() != kGridCells || model.n_features() != kGridCells) {
    throw ConfigError("an EBM grid needs a model over the 64 grid cells");
  }
  Grid g{};
  for (std::size_t j = 0; j < kGridCells; ++j) {
    const auto cell = parse_cell_name(feature_names[j]);
    if (!cell) throw ConfigError(fmt::format("'{}' is not a grid cell name", feature_names[j]));
    const auto& term = model.mains()[j];
    double num = 0.0, den = 0.0;
    for (std::size_t b = 0; b < term.scores.size(); ++b) {
      num += term.counts[b] * std::abs(term.scores[b]);
      den += term.counts[b];
    }
    g[*cell] = den > 0.0 ? num / den : 0.0;
  }
  return g;
}

}  // namespace glassbox
