#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

#include "mjp/harness.hpp"

namespace mjp {

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 190, kTop = 40, kBottom = 50;

const char* const kPalette[] = {"#1b6ca8", "#d1495b", "#2e933c", "#edae49",
                                "#6a4c93", "#00798c", "#8d6a9f", "#444444"};

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

std::string escape(const std::string& s) {
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

struct Point {
  double x, mean, se;
};

struct Axis {
  double lo, hi;
  bool log;
  double pixel_lo, pixel_hi;

  double map(double v) const {
    const double a = log ? std::log10(lo) : lo, b = log ? std::log10(hi) : hi;
    const double u = log ? std::log10(v) : v;
    const double f = b > a ? (u - a) / (b - a) : 0.5;
    return pixel_lo + f * (pixel_hi - pixel_lo);
  }

  std::vector<double> ticks() const {
    std::vector<double> t;
    if (log) {
      for (double e = std::floor(std::log10(lo)); e <= std::ceil(std::log10(hi)); ++e) {
        const double v = std::pow(10.0, e);
        if (v >= lo * (1 - 1e-9) && v <= hi * (1 + 1e-9)) t.push_back(v);
      }
      if (t.empty()) t = {lo, hi};
      return t;
    }
    for (int k = 0; k <= 4; ++k) t.push_back(lo + (hi - lo) * k / 4.0);
    return t;
  }
};

Axis make_axis(std::vector<double> values, bool allow_log, double span_for_log, double pixel_lo,
               double pixel_hi) {
  Axis a{0, 1, false, pixel_lo, pixel_hi};
  values.erase(std::remove_if(values.begin(), values.end(), [](double v) { return !std::isfinite(v); }),
               values.end());
  if (values.empty()) return a;
  const auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  a.lo = *mn;
  a.hi = *mx;
  a.log = allow_log && a.lo > 0.0 && a.hi / a.lo >= span_for_log;
  if (a.log) {
    a.lo /= 1.25;
    a.hi *= 1.25;
  } else if (a.hi > a.lo) {
    const double pad = 0.05 * (a.hi - a.lo);
    a.lo -= pad;
    a.hi += pad;
  } else {
    const double pad = a.lo != 0.0 ? 0.1 * std::fabs(a.lo) : 1.0;
    a.lo -= pad;
    a.hi += pad;
  }
  return a;
}

}  // namespace

std::string render_plot(const std::vector<ResultRow>& rows, const std::string& title) {
  // series -> x -> values
  std::map<std::string, std::map<double, std::vector<double>>> grouped;
  std::vector<std::string> order;
  for (const auto& r : rows) {
    if (!grouped.count(r.sampler)) order.push_back(r.sampler);
    const double x = std::isnan(r.proposal_scale) ? -1.0 : r.proposal_scale;
    auto& bucket = grouped[r.sampler][x];
    if (std::isfinite(r.ess_per_sec)) bucket.push_back(r.ess_per_sec);
  }

  std::map<std::string, std::vector<Point>> series;
  std::vector<double> xs, ys;
  for (const auto& name : order) {
    for (const auto& [x, values] : grouped[name]) {
      Point p{x, NAN, 0.0};
      if (!values.empty()) {
        double m = 0.0;
        for (double v : values) m += v;
        m /= static_cast<double>(values.size());
        double ss = 0.0;
        for (double v : values) ss += (v - m) * (v - m);
        p.mean = m;
        if (values.size() > 1)
          p.se = std::sqrt(ss / static_cast<double>(values.size() - 1) / static_cast<double>(values.size()));
        ys.push_back(m);
        if (m - p.se > 0.0) ys.push_back(m - p.se);
        ys.push_back(m + p.se);
      }
      if (x >= 0.0) xs.push_back(x);
      series[name].push_back(p);
    }
  }
  if (xs.empty()) xs.push_back(1.0);

  const Axis xa = make_axis(xs, true, 0.0, kLeft, kWidth - kRight);
  const Axis ya = make_axis(ys, true, 1e3, kHeight - kBottom, kTop);

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << kWidth / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"13\">" << escape(title)
      << "</text>\n";

  // Axes.
  const double x0 = kLeft, x1 = kWidth - kRight, y0 = kHeight - kBottom, y1 = kTop;
  svg << "<g class=\"axes\" stroke=\"black\">\n"
      << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0 << "\"/>\n"
      << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1 << "\"/>\n"
      << "</g>\n";
  svg << "<g class=\"ticks\">\n";
  for (double t : xa.ticks()) {
    const double px = xa.map(t);
    svg << "<line x1=\"" << fmt(px) << "\" y1=\"" << y0 << "\" x2=\"" << fmt(px) << "\" y2=\"" << y0 + 4
        << "\" stroke=\"black\"/><text x=\"" << fmt(px) << "\" y=\"" << y0 + 16
        << "\" text-anchor=\"middle\">" << fmt(t) << "</text>\n";
  }
  for (double t : ya.ticks()) {
    const double py = ya.map(t);
    svg << "<line x1=\"" << x0 - 4 << "\" y1=\"" << fmt(py) << "\" x2=\"" << x0 << "\" y2=\"" << fmt(py)
        << "\" stroke=\"black\"/><text x=\"" << x0 - 6 << "\" y=\"" << fmt(py + 4)
        << "\" text-anchor=\"end\">" << fmt(t) << "</text>\n";
  }
  svg << "</g>\n";
  svg << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 12 << "\" text-anchor=\"middle\">proposal scale"
      << (xa.log ? " (log)" : "") << "</text>\n";
  svg << "<text transform=\"translate(16," << (y0 + y1) / 2
      << ") rotate(-90)\" text-anchor=\"middle\">ESS per second" << (ya.log ? " (log)" : "") << "</text>\n";

  std::size_t colour = 0;
  double legend_y = kTop + 10;
  for (const auto& name : order) {
    const char* c = kPalette[colour++ % std::size(kPalette)];
    auto points = series[name];
    points.erase(std::remove_if(points.begin(), points.end(), [](const Point& p) { return std::isnan(p.mean); }),
                 points.end());
    // Proposal-free series span the whole x range.
    std::vector<std::pair<double, const Point*>> drawn;
    for (const auto& p : points) {
      if (p.x < 0.0) {
        drawn.push_back({xa.lo, &p});
        drawn.push_back({xa.hi, &p});
      } else {
        drawn.push_back({p.x, &p});
      }
    }
    svg << "<g class=\"series\">\n<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t k = 0; k < drawn.size(); ++k)
      svg << (k ? " " : "") << fmt(xa.map(drawn[k].first)) << ',' << fmt(ya.map(drawn[k].second->mean));
    svg << "\"/>\n";
    for (const auto& p : points) {
      const double px = p.x < 0.0 ? (x0 + x1) / 2 : xa.map(p.x);
      const double py = ya.map(p.mean);
      if (p.se > 0.0) {
        const double lo = p.mean - p.se > 0.0 || !ya.log ? p.mean - p.se : ya.lo;
        svg << "<line class=\"errorbar\" x1=\"" << fmt(px) << "\" y1=\"" << fmt(ya.map(lo)) << "\" x2=\""
            << fmt(px) << "\" y2=\"" << fmt(ya.map(p.mean + p.se)) << "\" stroke=\"" << c << "\"/>\n";
      }
      svg << "<circle cx=\"" << fmt(px) << "\" cy=\"" << fmt(py) << "\" r=\"3\" fill=\"" << c << "\"/>\n";
    }
    svg << "</g>\n";
    svg << "<rect x=\"" << x1 + 12 << "\" y=\"" << legend_y - 8 << "\" width=\"10\" height=\"10\" fill=\"" << c
        << "\"/><text x=\"" << x1 + 26 << "\" y=\"" << legend_y << "\">" << escape(name) << "</text>\n";
    legend_y += 16;
  }
  svg << "</svg>\n";
  return svg.str();
}

std::vector<std::filesystem::path> emit_plots(const std::vector<ResultRow>& rows,
                                              const std::filesystem::path& output_dir) {
  std::map<std::pair<std::string, std::string>, std::vector<ResultRow>> groups;
  for (const auto& r : rows) groups[{r.experiment, r.parameter}].push_back(r);
  std::filesystem::create_directories(output_dir);
  std::vector<std::filesystem::path> written;
  for (const auto& [key, group] : groups) {
    std::string stem = key.first + "_" + key.second;
    for (char& ch : stem)
      if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '.') ch = '_';
    const auto path = output_dir / (stem + ".svg");
    std::ofstream(path) << render_plot(group, key.first + ": " + key.second);
    written.push_back(path);
  }
  return written;
}

}  // namespace mjp
