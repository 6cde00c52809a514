#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace glassbox::svg {

struct Rgb {
  int r = 0, g = 0, b = 0;
  std::string hex() const;
};

// Blue-white-red for t in [-1, 1]; values outside are clamped.
Rgb diverging(double t);
// Dark blue to yellow for t in [0, 1].
Rgb sequential(double t);

// Minimal SVG emitter. Coordinates are printed with two decimals so the
// output is a deterministic byte stream.
class Document {
 public:
  Document(double width, double height);

  void rect(double x, double y, double w, double h, std::string_view fill,
            std::string_view stroke = "none");
  void line(double x1, double y1, double x2, double y2, std::string_view stroke,
            double width = 1.0, bool dashed = false);
  void circle(double cx, double cy, double r, std::string_view fill);
  // points as "x,y x,y ..."
  void polyline(std::string_view points, std::string_view stroke, double width = 1.5);
  void text(double x, double y, std::string_view content, double size = 11.0,
            std::string_view anchor = "start", std::string_view fill = "#222");
  // Text turned by `degrees` around its anchor point.
  void rotated_text(double x, double y, double degrees, std::string_view content, double size = 11.0,
                    std::string_view anchor = "end");

  double width() const { return width_; }
  double height() const { return height_; }
  std::string str() const;
  void save(const std::filesystem::path& path) const;

 private:
  double width_, height_;
  std::string body_;
};

std::string num(double v);
std::string escape(std::string_view s);

}  // namespace glassbox::svg
