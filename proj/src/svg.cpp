#include "svg.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include <fmt/format.h>

namespace cnorm::detail {

SvgWriter::SvgWriter(double width, double height) {
  buf_ = fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0:.0f}\" height=\"{1:.0f}\" viewBox=\"0 0 {0:.0f} "
      "{1:.0f}\" font-family=\"sans-serif\">\n",
      width, height);
  rect(0, 0, width, height, "#ffffff");
}

void SvgWriter::rect(double x, double y, double w, double h, std::string_view fill, std::string_view stroke) {
  buf_ += fmt::format("<rect x=\"{:.2f}\" y=\"{:.2f}\" width=\"{:.2f}\" height=\"{:.2f}\" fill=\"{}\"", x, y, w, h,
                      fill);
  if (!stroke.empty()) buf_ += fmt::format(" stroke=\"{}\" stroke-width=\"0.5\"", stroke);
  buf_ += "/>\n";
}

void SvgWriter::line(double x1, double y1, double x2, double y2, std::string_view stroke, double width) {
  buf_ += fmt::format(
      "<line x1=\"{:.2f}\" y1=\"{:.2f}\" x2=\"{:.2f}\" y2=\"{:.2f}\" stroke=\"{}\" stroke-width=\"{:.2f}\"/>\n", x1,
      y1, x2, y2, stroke, width);
}

void SvgWriter::text(double x, double y, std::string_view content, double size, std::string_view anchor,
                     double rotate) {
  buf_ += fmt::format("<text x=\"{:.2f}\" y=\"{:.2f}\" font-size=\"{:.1f}\" text-anchor=\"{}\"", x, y, size, anchor);
  if (rotate != 0.0) buf_ += fmt::format(" transform=\"rotate({:.1f} {:.2f} {:.2f})\"", rotate, x, y);
  buf_ += ">" + escape_xml(content) + "</text>\n";
}

void SvgWriter::comment(std::string_view content) {
  std::string safe(content);
  for (std::size_t p; (p = safe.find("--")) != std::string::npos;) safe.replace(p, 2, "- -");
  buf_ += "<!-- " + safe + " -->\n";
}

std::string SvgWriter::finish() { return buf_ + "</svg>\n"; }

std::string escape_xml(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string hex_color(Rgb c) { return fmt::format("#{:02x}{:02x}{:02x}", c.r, c.g, c.b); }

Rgb heat_color(double t) {
  static constexpr std::array<Rgb, 5> stops = {
      Rgb{255, 255, 204}, Rgb{254, 217, 118}, Rgb{253, 141, 60}, Rgb{227, 26, 28}, Rgb{128, 0, 38}};
  t = std::clamp(t, 0.0, 1.0);
  const double pos = t * static_cast<double>(stops.size() - 1);
  const auto i = std::min(static_cast<std::size_t>(pos), stops.size() - 2);
  const double f = pos - static_cast<double>(i);
  auto mix = [f](int a, int b) { return static_cast<int>(std::lround(a + f * (b - a))); };
  return {mix(stops[i].r, stops[i + 1].r), mix(stops[i].g, stops[i + 1].g), mix(stops[i].b, stops[i + 1].b)};
}

}  // namespace cnorm::detail
