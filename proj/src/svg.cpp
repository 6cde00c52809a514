#include "glassbox/svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>

#include <fmt/format.h>

#include "glassbox/error.hpp"

namespace glassbox::svg {

namespace {

Rgb lerp(const Rgb& a, const Rgb& b, double t) {
  auto mix = [t](int x, int y) { return static_cast<int>(std::lround(x + (y - x) * t)); };
  return Rgb{mix(a.r, b.r), mix(a.g, b.g), mix(a.b, b.b)};
}

template <std::size_t N>
Rgb ramp(const std::array<Rgb, N>& stops, double t) {
  if (!std::isfinite(t)) t = 0.0;
  t = std::clamp(t, 0.0, 1.0) * static_cast<double>(N - 1);
  const auto i = std::min(static_cast<std::size_t>(t), N - 2);
  return lerp(stops[i], stops[i + 1], t - static_cast<double>(i));
}

}  // namespace

std::string Rgb::hex() const { return fmt::format("#{:02x}{:02x}{:02x}", r, g, b); }

Rgb diverging(double t) {
  static constexpr std::array<Rgb, 3> stops{Rgb{30, 136, 229}, Rgb{255, 255, 255}, Rgb{255, 13, 87}};
  return ramp(stops, (t + 1.0) / 2.0);
}

Rgb sequential(double t) {
  static constexpr std::array<Rgb, 5> stops{Rgb{68, 1, 84}, Rgb{59, 82, 139}, Rgb{33, 145, 140},
                                            Rgb{94, 201, 98}, Rgb{253, 231, 37}};
  return ramp(stops, t);
}

std::string num(double v) {
  if (!std::isfinite(v)) return "0";
  const double r = std::round(v * 100.0) / 100.0;
  return fmt::format("{:.2f}", r == 0.0 ? 0.0 : r);
}

std::string escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

Document::Document(double width, double height) : width_(width), height_(height) {}

void Document::rect(double x, double y, double w, double h, std::string_view fill,
                    std::string_view stroke) {
  body_ += fmt::format("<rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"{}\"/>\n",
                       num(x), num(y), num(w), num(h), fill, stroke);
}

void Document::line(double x1, double y1, double x2, double y2, std::string_view stroke,
                    double width, bool dashed) {
  body_ += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"{}\"{}/>\n",
                       num(x1), num(y1), num(x2), num(y2), stroke, num(width),
                       dashed ? " stroke-dasharray=\"4 3\"" : "");
}

void Document::circle(double cx, double cy, double r, std::string_view fill) {
  body_ += fmt::format("<circle cx=\"{}\" cy=\"{}\" r=\"{}\" fill=\"{}\"/>\n", num(cx), num(cy), num(r), fill);
}

void Document::polyline(std::string_view points, std::string_view stroke, double width) {
  body_ += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"/>\n", points,
                       stroke, num(width));
}

void Document::text(double x, double y, std::string_view content, double size,
                    std::string_view anchor, std::string_view fill) {
  body_ += fmt::format(
      "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"{}\" text-anchor=\"{}\" fill=\"{}\">{}</text>\n",
      num(x), num(y), num(size), anchor, fill, escape(content));
}

void Document::rotated_text(double x, double y, double degrees, std::string_view content, double size,
                            std::string_view anchor) {
  body_ += fmt::format(
      "<text x=\"{0}\" y=\"{1}\" transform=\"rotate({2} {0} {1})\" font-family=\"sans-serif\" "
      "font-size=\"{3}\" text-anchor=\"{4}\" fill=\"#222\">{5}</text>\n",
      num(x), num(y), num(degrees), num(size), anchor, escape(content));
}

std::string Document::str() const {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{2}</svg>\n",
      num(width_), num(height_), body_);
}

void Document::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out << str();
}

}  // namespace glassbox::svg
