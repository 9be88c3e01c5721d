#pragma once

#include <string>
#include <vector>

namespace pendular::svg {

struct Series {
  std::string label;
  std::vector<double> x, y;
  bool dashed = false;
};

struct Chart {
  std::string title;
  std::string x_label, y_label;
  bool log_x = false;
  bool log_y = false;
  std::vector<Series> series;
};

/// Static line chart; non-finite and (on log axes) non-positive points are skipped.
std::string render(const Chart& chart);

}  // namespace pendular::svg
