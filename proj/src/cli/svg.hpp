#pragma once

#include <string>
#include <vector>

namespace eigendrift::cli {

// Minimal self-contained SVG plotting (fixed 800x600 viewBox).

struct Series {
    std::vector<double> x;
    std::vector<double> y;
    std::string label;
    std::string color = "#1f77b4";
    bool markers = true;
};

struct PlotOptions {
    std::string title;
    std::string xlabel;
    std::string ylabel;
    std::vector<double> vlines;  // vertical reference lines (e.g. beta_c)
    bool log_y = false;
};

void write_line_plot(const std::string& path,
                     const std::vector<Series>& series,
                     const PlotOptions& opts);

void write_histogram(const std::string& path, const std::vector<double>& values,
                     int n_bins, const PlotOptions& opts);

}  // namespace eigendrift::cli
