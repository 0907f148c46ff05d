#include "zin/harness/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "zin/common/errors.hpp"

namespace zin::harness {

namespace {

constexpr double kWidth = 720, kHeight = 420, kLeft = 70, kRight = 160, kTop = 40, kBottom = 60;
const char* kPalette[] = {"#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#9c755f"};

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string comment_safe(std::string s) {
  for (std::size_t p; (p = s.find("--")) != std::string::npos;) s.replace(p, 2, "- -");
  return s;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

struct Range {
  double lo, hi;
};

Range y_range(const std::vector<Series>& series, bool from_zero) {
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : series)
    for (double v : s.y)
      if (std::isfinite(v)) lo = std::min(lo, v), hi = std::max(hi, v);
  if (!std::isfinite(lo)) return {0, 1};
  if (from_zero) lo = std::min(lo, 0.0);
  if (hi - lo < 1e-12) hi = lo + 1;
  const double pad = 0.05 * (hi - lo);
  return {from_zero && lo == 0.0 ? 0.0 : lo - pad, hi + pad};
}

std::string header(const std::string& title, const nlohmann::json& data) {
  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
     << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<!-- data: " << comment_safe(data.dump()) << " -->\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << kWidth / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << esc(title)
     << "</text>\n";
  return os.str();
}

void axes(std::ostringstream& os, Range r, const std::string& y_label, const std::string& x_label) {
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  os << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0 << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1 << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double v = r.lo + (r.hi - r.lo) * i / 5.0;
    const double y = y0 - (y0 - y1) * i / 5.0;
    os << "<line x1=\"" << x0 - 4 << "\" y1=\"" << num(y) << "\" x2=\"" << x1 << "\" y2=\"" << num(y)
       << "\" stroke=\"#ddd\"/>\n";
    os << "<text x=\"" << x0 - 6 << "\" y=\"" << num(y + 4) << "\" text-anchor=\"end\">" << tick(v) << "</text>\n";
  }
  os << "<text transform=\"translate(16," << (y0 + y1) / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << esc(y_label) << "</text>\n";
  if (!x_label.empty())
    os << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">" << esc(x_label)
       << "</text>\n";
}

void legend(std::ostringstream& os, const std::vector<Series>& series) {
  const double x = kWidth - kRight + 16;
  for (std::size_t s = 0; s < series.size(); ++s) {
    const double y = kTop + 18.0 * s;
    os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\"12\" height=\"12\" fill=\"" << kPalette[s % 8]
       << "\"/>\n";
    os << "<text x=\"" << x + 18 << "\" y=\"" << y + 10 << "\">" << esc(series[s].name) << "</text>\n";
  }
}

double scale(double v, Range r) {
  const double y0 = kHeight - kBottom, y1 = kTop;
  return y0 - (v - r.lo) / (r.hi - r.lo) * (y0 - y1);
}

}  // namespace

std::string bar_chart(const std::string& title, const std::string& y_label, const std::vector<std::string>& categories,
                      const std::vector<Series>& series) {
  for (const auto& s : series)
    if (s.y.size() != categories.size()) throw DimensionError("bar series '" + s.name + "' has wrong length");
  nlohmann::json data{{"categories", categories}, {"series", nlohmann::json::array()}};
  for (const auto& s : series) data["series"].push_back({{"name", s.name}, {"values", s.y}});
  std::ostringstream os;
  os << header(title, data);
  const Range r = y_range(series, true);
  axes(os, r, y_label, "");
  const double x0 = kLeft, x1 = kWidth - kRight;
  const double group = categories.empty() ? 0 : (x1 - x0) / static_cast<double>(categories.size());
  const double bar = series.empty() ? 0 : group * 0.8 / static_cast<double>(series.size());
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double gx = x0 + group * c + group * 0.1;
    for (std::size_t s = 0; s < series.size(); ++s) {
      const double v = series[s].y[c];
      if (!std::isfinite(v)) continue;
      const double top = scale(v, r), base = scale(std::max(r.lo, 0.0), r);
      os << "<rect x=\"" << num(gx + bar * s) << "\" y=\"" << num(std::min(top, base)) << "\" width=\"" << num(bar)
         << "\" height=\"" << num(std::abs(base - top)) << "\" fill=\"" << kPalette[s % 8] << "\"/>\n";
    }
    os << "<text x=\"" << num(gx + group * 0.4) << "\" y=\"" << kHeight - kBottom + 16
       << "\" text-anchor=\"middle\" font-size=\"10\">" << esc(categories[c]) << "</text>\n";
  }
  legend(os, series);
  os << "</svg>\n";
  return os.str();
}

std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<Series>& series) {
  nlohmann::json data{{"series", nlohmann::json::array()}};
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
  for (const auto& s : series) {
    if (s.x.size() != s.y.size()) throw DimensionError("line series '" + s.name + "' has mismatched x/y");
    data["series"].push_back({{"name", s.name}, {"x", s.x}, {"y", s.y}});
    for (double v : s.x) xlo = std::min(xlo, v), xhi = std::max(xhi, v);
  }
  if (!std::isfinite(xlo)) xlo = 0, xhi = 1;
  if (xhi - xlo < 1e-12) xhi = xlo + 1;
  std::ostringstream os;
  os << header(title, data);
  const Range r = y_range(series, false);
  axes(os, r, y_label, x_label);
  const double x0 = kLeft + 10, x1 = kWidth - kRight - 10;
  auto sx = [&](double v) { return x0 + (v - xlo) / (xhi - xlo) * (x1 - x0); };
  std::vector<double> xs;
  for (const auto& s : series) xs.insert(xs.end(), s.x.begin(), s.x.end());
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  for (double v : xs)
    os << "<text x=\"" << num(sx(v)) << "\" y=\"" << kHeight - kBottom + 16 << "\" text-anchor=\"middle\">"
       << tick(v) << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    std::ostringstream pts;
    for (std::size_t i = 0; i < series[s].x.size(); ++i)
      if (std::isfinite(series[s].y[i])) pts << num(sx(series[s].x[i])) << ',' << num(scale(series[s].y[i], r)) << ' ';
    os << "<polyline fill=\"none\" stroke=\"" << kPalette[s % 8] << "\" stroke-width=\"2\" points=\"" << pts.str()
       << "\"/>\n";
    for (std::size_t i = 0; i < series[s].x.size(); ++i)
      if (std::isfinite(series[s].y[i]))
        os << "<circle cx=\"" << num(sx(series[s].x[i])) << "\" cy=\"" << num(scale(series[s].y[i], r))
           << "\" r=\"3\" fill=\"" << kPalette[s % 8] << "\"/>\n";
  }
  legend(os, series);
  os << "</svg>\n";
  return os.str();
}

}  // namespace zin::harness
