#pragma once

#include <string>
#include <vector>

#include "pirnn/tensor.hpp"

namespace pirnn::svg {

// Grayscale heat map of a matrix with values in [0, 1]; darker is larger.
std::string heatmap(const Tensor& m, const std::vector<std::string>& row_labels,
                    const std::vector<std::string>& col_labels, const std::string& title);

struct Series {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

// Polylines on shared axes, both in [0, x_max] x [0, y_max].
std::string line_plot(const std::vector<Series>& series, const std::string& x_label, const std::string& y_label,
                      const std::string& title);

}  // namespace pirnn::svg
