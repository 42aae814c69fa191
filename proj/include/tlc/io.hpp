// Copyright 2026 the tlc authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tlc::io {

// All file writes go through this: write to <path>.tmp, then rename, so an
// interrupted run never leaves a truncated artifact.
void atomic_write(const std::string& path, const std::string& bytes);

std::string read_bytes(const std::string& path);

std::uint64_t file_checksum(const std::string& path);

// Shortest decimal form that round-trips the exact double, for CSV output.
std::string fmt_double(double v);

struct Csv {
  std::string body;
  void header(const std::vector<std::string>& cols);
  void row(const std::vector<std::string>& cells);
};

// Minimal presentational plots; every plotted number also exists in CSV.
std::string line_plot_svg(const std::vector<std::vector<double>>& xs,
                          const std::vector<std::vector<double>>& ys,
                          const std::vector<std::string>& labels, const std::string& title);
std::string heatmap_svg(const std::vector<double>& values, int nx, int ny,
                        const std::string& title);

}  // namespace tlc::io
