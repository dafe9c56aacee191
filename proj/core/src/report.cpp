#include "urbanflow/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace urbanflow::report {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};
constexpr int kPaletteSize = 10;

struct Frame {
  int width, height;
  int left = 60, right = 20, top = 40, bottom = 50;
  double x_min = 0, x_max = 1, y_min = 0, y_max = 1;
  bool log_x = false, log_y = false;

  double tx(double x) const {
    const double v = log_x ? std::log10(x) : x;
    const double lo = log_x ? std::log10(x_min) : x_min;
    const double hi = log_x ? std::log10(x_max) : x_max;
    return left + (v - lo) / (hi - lo) * (width - left - right);
  }
  double ty(double y) const {
    const double v = log_y ? std::log10(y) : y;
    const double lo = log_y ? std::log10(y_min) : y_min;
    const double hi = log_y ? std::log10(y_max) : y_max;
    return height - bottom - (v - lo) / (hi - lo) * (height - top - bottom);
  }
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

void open_svg(std::ostringstream& out, const PlotOptions& opts) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << opts.width << "\" height=\""
      << opts.height << "\" viewBox=\"0 0 " << opts.width << " " << opts.height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  if (!opts.title.empty())
    out << "<text x=\"" << opts.width / 2
        << "\" y=\"20\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">"
        << xml_escape(opts.title) << "</text>\n";
}

void axes(std::ostringstream& out, const Frame& f, const PlotOptions& opts) {
  out << "<line x1=\"" << f.left << "\" y1=\"" << f.height - f.bottom << "\" x2=\""
      << f.width - f.right << "\" y2=\"" << f.height - f.bottom
      << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << f.left << "\" y1=\"" << f.top << "\" x2=\"" << f.left << "\" y2=\""
      << f.height - f.bottom << "\" stroke=\"black\"/>\n";

  for (int i = 0; i <= 4; ++i) {
    const double frac = i / 4.0;
    double xv, yv;
    if (f.log_x) {
      const double lo = std::log10(f.x_min), hi = std::log10(f.x_max);
      xv = std::pow(10.0, lo + frac * (hi - lo));
    } else {
      xv = f.x_min + frac * (f.x_max - f.x_min);
    }
    if (f.log_y) {
      const double lo = std::log10(f.y_min), hi = std::log10(f.y_max);
      yv = std::pow(10.0, lo + frac * (hi - lo));
    } else {
      yv = f.y_min + frac * (f.y_max - f.y_min);
    }
    out << "<text x=\"" << fmt(f.tx(xv)) << "\" y=\"" << f.height - f.bottom + 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << fmt(xv)
        << "</text>\n";
    out << "<text x=\"" << f.left - 6 << "\" y=\"" << fmt(f.ty(yv) + 3)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << fmt(yv)
        << "</text>\n";
  }
  if (!opts.x_label.empty())
    out << "<text x=\"" << (f.left + f.width - f.right) / 2 << "\" y=\"" << f.height - 12
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
        << xml_escape(opts.x_label) << "</text>\n";
  if (!opts.y_label.empty())
    out << "<text x=\"14\" y=\"" << (f.top + f.height - f.bottom) / 2
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
           "transform=\"rotate(-90 14 "
        << (f.top + f.height - f.bottom) / 2 << ")\">" << xml_escape(opts.y_label)
        << "</text>\n";
}

Frame fit_frame(const std::vector<Series>& series, const PlotOptions& opts) {
  Frame f;
  f.width = opts.width;
  f.height = opts.height;
  f.log_x = opts.log_x;
  f.log_y = opts.log_y;
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const auto& s : series)
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      const double xv = s.x[i], yv = s.y[i];
      if (opts.log_x && xv <= 0) continue;
      if (opts.log_y && yv <= 0) continue;
      x_lo = std::min(x_lo, xv);
      x_hi = std::max(x_hi, xv);
      y_lo = std::min(y_lo, yv);
      y_hi = std::max(y_hi, yv);
    }
  if (!(x_lo < x_hi)) {
    x_lo = opts.log_x ? 0.1 : 0.0;
    x_hi = opts.log_x ? 10.0 : 1.0;
  }
  if (!(y_lo < y_hi)) {
    y_lo = opts.log_y ? 0.1 : 0.0;
    y_hi = opts.log_y ? 10.0 : 1.0;
  }
  if (!opts.log_x) {
    const double pad = 0.05 * (x_hi - x_lo);
    x_lo -= pad;
    x_hi += pad;
  }
  if (!opts.log_y) {
    const double pad = 0.05 * (y_hi - y_lo);
    y_lo -= pad;
    y_hi += pad;
  }
  f.x_min = x_lo;
  f.x_max = x_hi;
  f.y_min = y_lo;
  f.y_max = y_hi;
  return f;
}

void legend(std::ostringstream& out, const std::vector<Series>& series, const Frame& f) {
  if (series.size() < 2) return;
  int y = f.top + 4;
  for (std::size_t s = 0; s < series.size(); ++s) {
    if (series[s].label.empty()) continue;
    out << "<rect x=\"" << f.width - f.right - 110 << "\" y=\"" << y
        << "\" width=\"10\" height=\"10\" fill=\"" << kPalette[s % kPaletteSize] << "\"/>\n";
    out << "<text x=\"" << f.width - f.right - 96 << "\" y=\"" << y + 9
        << "\" font-family=\"sans-serif\" font-size=\"10\">" << xml_escape(series[s].label)
        << "</text>\n";
    y += 14;
  }
}

}  // namespace

std::string scatter_svg(const std::vector<Series>& series, const PlotOptions& opts,
                        bool diagonal) {
  std::ostringstream out;
  open_svg(out, opts);
  Frame f = fit_frame(series, opts);
  axes(out, f, opts);

  if (diagonal) {
    const double lo = std::max(f.x_min, f.y_min);
    const double hi = std::min(f.x_max, f.y_max);
    if (lo < hi)
      out << "<line x1=\"" << fmt(f.tx(lo)) << "\" y1=\"" << fmt(f.ty(lo)) << "\" x2=\""
          << fmt(f.tx(hi)) << "\" y2=\"" << fmt(f.ty(hi))
          << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
  }

  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % kPaletteSize];
    for (std::size_t i = 0; i < series[s].x.size(); ++i) {
      const double xv = series[s].x[i], yv = series[s].y[i];
      if ((opts.log_x && xv <= 0) || (opts.log_y && yv <= 0)) continue;
      out << "<circle cx=\"" << fmt(f.tx(xv)) << "\" cy=\"" << fmt(f.ty(yv))
          << "\" r=\"2.2\" fill=\"" << color << "\" fill-opacity=\"0.55\"/>\n";
    }
  }
  legend(out, series, f);
  out << "</svg>\n";
  return out.str();
}

std::string lines_svg(const std::vector<Series>& series, const PlotOptions& opts) {
  std::ostringstream out;
  open_svg(out, opts);
  Frame f = fit_frame(series, opts);
  axes(out, f, opts);
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % kPaletteSize];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.6\" points=\"";
    for (std::size_t i = 0; i < series[s].x.size(); ++i)
      out << fmt(f.tx(series[s].x[i])) << "," << fmt(f.ty(series[s].y[i])) << " ";
    out << "\"/>\n";
  }
  legend(out, series, f);
  out << "</svg>\n";
  return out.str();
}

std::string grouped_bars_svg(const std::vector<std::string>& group_labels,
                             const std::vector<std::string>& bar_labels,
                             const std::vector<std::vector<double>>& values,
                             const PlotOptions& opts, double guide) {
  if (values.size() != group_labels.size())
    throw std::invalid_argument("grouped_bars_svg: values/groups mismatch");
  std::ostringstream out;
  open_svg(out, opts);
  Frame f;
  f.width = opts.width;
  f.height = opts.height;
  double v_max = 0;
  for (const auto& row : values)
    for (double v : row) v_max = std::max(v_max, v);
  if (std::isfinite(guide)) v_max = std::max(v_max, guide);
  f.x_min = 0;
  f.x_max = 1;
  f.y_min = 0;
  f.y_max = v_max * 1.1 + 1e-12;

  axes(out, f, opts);

  const double span = f.width - f.left - f.right;
  const double group_w = span / double(group_labels.size());
  const double bar_w = group_w * 0.8 / double(std::max<std::size_t>(1, bar_labels.size()));

  for (std::size_t g = 0; g < values.size(); ++g) {
    const double gx = f.left + group_w * (double(g) + 0.1);
    for (std::size_t b = 0; b < values[g].size(); ++b) {
      const double v = values[g][b];
      const double y = f.ty(v);
      out << "<rect x=\"" << fmt(gx + bar_w * double(b)) << "\" y=\"" << fmt(y) << "\" width=\""
          << fmt(bar_w * 0.92) << "\" height=\"" << fmt(f.height - f.bottom - y) << "\" fill=\""
          << kPalette[b % kPaletteSize] << "\"/>\n";
    }
    out << "<text x=\"" << fmt(gx + group_w * 0.4) << "\" y=\"" << f.height - f.bottom + 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">"
        << xml_escape(group_labels[g]) << "</text>\n";
  }
  if (std::isfinite(guide))
    out << "<line x1=\"" << f.left << "\" y1=\"" << fmt(f.ty(guide)) << "\" x2=\""
        << f.width - f.right << "\" y2=\"" << fmt(f.ty(guide))
        << "\" stroke=\"#444\" stroke-dasharray=\"5 3\"/>\n";

  int ly = f.top + 4;
  for (std::size_t b = 0; b < bar_labels.size(); ++b) {
    out << "<rect x=\"" << f.width - f.right - 90 << "\" y=\"" << ly
        << "\" width=\"10\" height=\"10\" fill=\"" << kPalette[b % kPaletteSize] << "\"/>\n";
    out << "<text x=\"" << f.width - f.right - 76 << "\" y=\"" << ly + 9
        << "\" font-family=\"sans-serif\" font-size=\"10\">" << xml_escape(bar_labels[b])
        << "</text>\n";
    ly += 14;
  }
  out << "</svg>\n";
  return out.str();
}

std::string heatmap_svg(const std::vector<std::string>& row_labels,
                        const std::vector<std::string>& col_labels,
                        const std::vector<std::vector<double>>& values,
                        const PlotOptions& opts) {
  if (values.size() != row_labels.size())
    throw std::invalid_argument("heatmap_svg: values/rows mismatch");
  std::ostringstream out;
  open_svg(out, opts);
  const int left = 110, top = 40, right = 20, bottom = 80;
  const double cw = double(opts.width - left - right) / double(col_labels.size());
  const double ch = double(opts.height - top - bottom) / double(row_labels.size());

  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& row : values)
    for (double v : row) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  if (!(lo < hi)) hi = lo + 1;

  auto color = [&](double v) {
    const double t = (v - lo) / (hi - lo);
    const int r = static_cast<int>(255 * t);
    const int b = static_cast<int>(255 * (1 - t));
    const int g = static_cast<int>(80 + 60 * (1 - std::abs(2 * t - 1)));
    char buf[16];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", r, g, b);
    return std::string(buf);
  };

  for (std::size_t r = 0; r < values.size(); ++r) {
    for (std::size_t c = 0; c < values[r].size(); ++c) {
      out << "<rect x=\"" << fmt(left + cw * double(c)) << "\" y=\"" << fmt(top + ch * double(r))
          << "\" width=\"" << fmt(cw) << "\" height=\"" << fmt(ch) << "\" fill=\""
          << color(values[r][c]) << "\"/>\n";
    }
    out << "<text x=\"" << left - 4 << "\" y=\"" << fmt(top + ch * (double(r) + 0.6))
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"9\">"
        << xml_escape(row_labels[r]) << "</text>\n";
  }
  for (std::size_t c = 0; c < col_labels.size(); ++c)
    out << "<text x=\"" << fmt(left + cw * (double(c) + 0.5)) << "\" y=\""
        << opts.height - bottom + 12 << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
        << "font-size=\"9\" transform=\"rotate(-45 " << fmt(left + cw * (double(c) + 0.5)) << " "
        << opts.height - bottom + 12 << ")\">" << xml_escape(col_labels[c]) << "</text>\n";
  out << "</svg>\n";
  return out.str();
}

}  // namespace urbanflow::report
