#pragma once

#include <string>
#include <string_view>

namespace cnorm::detail {

// Minimal SVG builder. Coordinates are printed with two decimals so output
// bytes depend only on the inputs.
class SvgWriter {
 public:
  SvgWriter(double width, double height);

  void rect(double x, double y, double w, double h, std::string_view fill, std::string_view stroke = {});
  void line(double x1, double y1, double x2, double y2, std::string_view stroke, double width = 1.0);
  void text(double x, double y, std::string_view content, double size = 12.0, std::string_view anchor = "start",
            double rotate = 0.0);
  void comment(std::string_view content);

  std::string finish();

 private:
  std::string buf_;
};

std::string escape_xml(std::string_view s);

struct Rgb {
  int r, g, b;
};

std::string hex_color(Rgb c);
// Piecewise-linear ramp from pale yellow (t = 0) to dark red (t = 1).
Rgb heat_color(double t);

}  // namespace cnorm::detail
