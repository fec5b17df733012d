#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vbd/cost_bench.hpp"
#include "vbd/defense_bench.hpp"
#include "vbd/eval_suite.hpp"

namespace vbd::report {

struct Series {
  std::string name;
  std::vector<double> y;
};

// Line plot with linear axes; y is fixed to [0, 1] when every value lies there.
std::string svg_line_plot(const std::string& title, const std::string& x_label, std::span<const double> x,
                          std::span<const Series> series);

// File-name-safe form of a label: lowercase ASCII letters, digits and '_'.
std::string slug(std::string_view label);

// Writes summary.md, metrics.csv, one CSV and one SVG per curve, and the cost
// records plus their plot when given. Returns the written paths. Throws
// std::filesystem::filesystem_error when out_dir cannot be created or written.
std::vector<std::filesystem::path> emit_report(std::span<const eval::MetricsReport> records,
                                               std::span<const defense::DefenseCurve> curves,
                                               const std::optional<cost::CostBenchResult>& cost,
                                               const std::filesystem::path& out_dir);

}  // namespace vbd::report
