// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#include "tlc/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tlc/common.hpp"

namespace tlc {

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

}  // namespace tlc

namespace tlc::io {

void atomic_write(const std::string& path, const std::string& bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw NumericsError("cannot open for write: " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw NumericsError("short write: " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string read_bytes(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open for read: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::uint64_t file_checksum(const std::string& path) {
  const std::string bytes = read_bytes(path);
  return fnv1a64(bytes.data(), bytes.size());
}

std::string fmt_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  // try increasing precision until the decimal round-trips exactly
  for (int prec = 1; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof(buf), "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) return buf;
  }
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void Csv::header(const std::vector<std::string>& cols) { row(cols); }

void Csv::row(const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) body += ',';
    body += cells[i];
  }
  body += '\n';
}

namespace {

struct Extent {
  double lo, hi;
};

Extent extent_of(const std::vector<std::vector<double>>& series) {
  Extent e{0.0, 1.0};
  bool first = true;
  for (const auto& s : series) {
    for (double v : s) {
      if (!std::isfinite(v)) continue;
      if (first) {
        e.lo = e.hi = v;
        first = false;
      } else {
        e.lo = std::min(e.lo, v);
        e.hi = std::max(e.hi, v);
      }
    }
  }
  if (e.hi <= e.lo) e.hi = e.lo + 1.0;
  return e;
}

const char* kSeriesColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                               "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

}  // namespace

std::string line_plot_svg(const std::vector<std::vector<double>>& xs,
                          const std::vector<std::vector<double>>& ys,
                          const std::vector<std::string>& labels, const std::string& title) {
  const int w = 640, h = 420, ml = 60, mr = 20, mt = 40, mb = 40;
  const Extent ex = extent_of(xs), ey = extent_of(ys);
  auto px = [&](double x) { return ml + (x - ex.lo) / (ex.hi - ex.lo) * (w - ml - mr); };
  auto py = [&](double y) { return h - mb - (y - ey.lo) / (ey.hi - ey.lo) * (h - mt - mb); };

  std::ostringstream s;
  s << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  s << "<rect width='100%' height='100%' fill='white'/>\n";
  s << "<text x='" << w / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
    << "</text>\n";
  s << "<line x1='" << ml << "' y1='" << h - mb << "' x2='" << w - mr << "' y2='" << h - mb
    << "' stroke='black'/>\n";
  s << "<line x1='" << ml << "' y1='" << mt << "' x2='" << ml << "' y2='" << h - mb
    << "' stroke='black'/>\n";
  for (int tick = 0; tick <= 4; ++tick) {
    const double fx = ex.lo + (ex.hi - ex.lo) * tick / 4.0;
    const double fy = ey.lo + (ey.hi - ey.lo) * tick / 4.0;
    s << "<text x='" << px(fx) << "' y='" << h - mb + 16
      << "' text-anchor='middle' font-size='10'>" << fmt_double(std::round(fx * 1e3) / 1e3)
      << "</text>\n";
    s << "<text x='" << ml - 6 << "' y='" << py(fy) + 3 << "' text-anchor='end' font-size='10'>"
      << fmt_double(std::round(fy * 1e3) / 1e3) << "</text>\n";
  }
  for (std::size_t k = 0; k < ys.size(); ++k) {
    const auto& X = xs[std::min(k, xs.size() - 1)];
    const auto& Y = ys[k];
    const char* color = kSeriesColors[k % 8];
    s << "<polyline fill='none' stroke='" << color << "' stroke-width='1.5' points='";
    for (std::size_t i = 0; i < Y.size() && i < X.size(); ++i) {
      if (!std::isfinite(Y[i]) || !std::isfinite(X[i])) continue;
      s << px(X[i]) << ',' << py(Y[i]) << ' ';
    }
    s << "'/>\n";
    if (k < labels.size())
      s << "<text x='" << w - mr - 140 << "' y='" << mt + 14 * (k + 1) << "' fill='" << color
        << "' font-size='11'>" << labels[k] << "</text>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string heatmap_svg(const std::vector<double>& values, int nx, int ny,
                        const std::string& title) {
  const int cell = std::max(2, 480 / std::max(nx, ny));
  const int w = nx * cell + 40, h = ny * cell + 60;
  double lo = 0.0, hi = 1.0;
  bool first = true;
  for (double v : values) {
    if (!std::isfinite(v)) continue;
    if (first) {
      lo = hi = v;
      first = false;
    } else {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (hi <= lo) hi = lo + 1.0;
  std::ostringstream s;
  s << "<svg xmlns='http://www.w3.org/2000/svg' width='" << w << "' height='" << h << "'>\n";
  s << "<rect width='100%' height='100%' fill='white'/>\n";
  s << "<text x='" << w / 2 << "' y='20' text-anchor='middle' font-size='14'>" << title
    << "</text>\n";
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      const double v = values[static_cast<std::size_t>(j) * nx + i];
      int r = 255, g = 255, b = 255;
      if (std::isfinite(v)) {
        const double u = (v - lo) / (hi - lo);
        r = static_cast<int>(255 * u);
        g = static_cast<int>(64 + 128 * (1.0 - std::abs(2 * u - 1)));
        b = static_cast<int>(255 * (1.0 - u));
      }
      s << "<rect x='" << 20 + i * cell << "' y='" << 40 + (ny - 1 - j) * cell << "' width='"
        << cell << "' height='" << cell << "' fill='rgb(" << r << ',' << g << ',' << b
        << ")'/>\n";
    }
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace tlc::io
