#include "pirnn/svg.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace pirnn::svg {

namespace {

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace

std::string heatmap(const Tensor& m, const std::vector<std::string>& row_labels,
                    const std::vector<std::string>& col_labels, const std::string& title) {
  constexpr int cell = 24, left = 48, top = 48;
  const int w = left + static_cast<int>(m.cols()) * cell + 16;
  const int h = top + static_cast<int>(m.rows()) * cell + 16;
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h << "\" font-family=\"sans-serif\" font-size=\"10\">\n";
  o << "<text x=\"" << left << "\" y=\"14\" font-size=\"12\">" << escape(title) << "</text>\n";
  for (std::size_t j = 0; j < m.cols() && j < col_labels.size(); ++j) {
    o << "<text x=\"" << left + static_cast<int>(j) * cell + cell / 2 << "\" y=\"" << top - 6
      << "\" text-anchor=\"middle\">" << escape(col_labels[j]) << "</text>\n";
  }
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const int y = top + static_cast<int>(i) * cell;
    if (i < row_labels.size()) {
      o << "<text x=\"" << left - 6 << "\" y=\"" << y + cell / 2 + 4 << "\" text-anchor=\"end\">" << escape(row_labels[i]) << "</text>\n";
    }
    for (std::size_t j = 0; j < m.cols(); ++j) {
      const int shade = static_cast<int>(std::lround(255.0 * (1.0 - std::clamp(m(i, j), 0.0, 1.0))));
      o << "<rect x=\"" << left + static_cast<int>(j) * cell << "\" y=\"" << y << "\" width=\"" << cell
        << "\" height=\"" << cell << "\" fill=\"rgb(" << shade << ',' << shade << ',' << shade << ")\" stroke=\"#ccc\"/>\n";
    }
  }
  o << "</svg>\n";
  return o.str();
}

std::string line_plot(const std::vector<Series>& series, const std::string& x_label, const std::string& y_label,
                      const std::string& title) {
  constexpr int left = 56, top = 32, pw = 360, ph = 280;
  double x_max = 1e-12, y_max = 1e-12;
  for (const auto& s : series) {
    for (double v : s.x) x_max = std::max(x_max, v);
    for (double v : s.y) y_max = std::max(y_max, v);
  }
  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << left + pw + 140 << "\" height=\"" << top + ph + 48
    << "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  o << "<text x=\"" << left << "\" y=\"18\" font-size=\"12\">" << escape(title) << "</text>\n";
  o << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << pw << "\" height=\"" << ph << "\" fill=\"none\" stroke=\"#000\"/>\n";
  o << "<text x=\"" << left + pw / 2 << "\" y=\"" << top + ph + 32 << "\" text-anchor=\"middle\">" << escape(x_label)
    << " (max " << x_max << ")</text>\n";
  o << "<text x=\"14\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 14 " << top + ph / 2
    << ")\" text-anchor=\"middle\">" << escape(y_label) << " (max " << y_max << ")</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto& s = series[k];
    const char* color = kPalette[k % std::size(kPalette)];
    o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < std::min(s.x.size(), s.y.size()); ++i) {
      o << left + pw * s.x[i] / x_max << ',' << top + ph - ph * s.y[i] / y_max << ' ';
    }
    o << "\"/>\n";
    o << "<text x=\"" << left + pw + 10 << "\" y=\"" << top + 14 + 16 * static_cast<int>(k) << "\" fill=\"" << color
      << "\">" << escape(s.name) << "</text>\n";
  }
  o << "</svg>\n";
  return o.str();
}

}  // namespace pirnn::svg
