#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gjam/eval.hpp"

namespace gjam::plot {

struct Series {
  std::string name;
  std::vector<double> y;
  std::vector<double> err;  // optional symmetric error bars
};

std::string line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                       const std::vector<double>& x, const std::vector<Series>& series);

/// Row-major values, rows.size() x cols.size(). Cells are annotated with the value.
std::string heatmap(const std::string& title, const std::vector<std::string>& rows,
                    const std::vector<std::string>& cols, const std::vector<double>& values, double lo, double hi,
                    const char* cell_format = "%.1f");

/// Row-normalized percentages.
std::string confusion_chart(const std::string& title, const ConfusionMatrix& cm,
                            const std::vector<std::string>& class_names);

void write_svg(const std::filesystem::path& path, const std::string& svg);

}  // namespace gjam::plot
