#include "svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

namespace eigendrift::cli {

namespace {

constexpr double kW = 800.0, kH = 600.0;
constexpr double kL = 80.0, kR = 30.0, kT = 50.0, kB = 60.0;

struct Frame {
    double x0, x1, y0, y1;
    double px(double x) const {
        return kL + (x - x0) / (x1 - x0) * (kW - kL - kR);
    }
    double py(double y) const {
        return kH - kB - (y - y0) / (y1 - y0) * (kH - kT - kB);
    }
};

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

void pad_range(double& lo, double& hi) {
    if (!(hi > lo)) {
        double c = std::isfinite(lo) ? lo : 0.0;
        lo = c - 1.0;
        hi = c + 1.0;
    } else {
        double pad = 0.05 * (hi - lo);
        lo -= pad;
        hi += pad;
    }
}

std::vector<double> ticks(double lo, double hi, int n = 5) {
    std::vector<double> out;
    double span = hi - lo;
    double raw = span / n;
    double mag = std::pow(10.0, std::floor(std::log10(raw)));
    double step = mag;
    for (double m : {1.0, 2.0, 2.5, 5.0, 10.0})
        if (mag * m >= raw) {
            step = mag * m;
            break;
        }
    double t = std::ceil(lo / step) * step;
    for (; t <= hi + 1e-12 * span; t += step) out.push_back(t);
    return out;
}

void header(std::ostream& os, const PlotOptions& o) {
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 800 600\" "
          "width=\"800\" height=\"600\">\n"
       << "<rect width=\"800\" height=\"600\" fill=\"white\"/>\n"
       << "<text x=\"400\" y=\"28\" text-anchor=\"middle\" "
          "font-family=\"sans-serif\" font-size=\"18\">"
       << o.title << "</text>\n"
       << "<text x=\"400\" y=\"588\" text-anchor=\"middle\" "
          "font-family=\"sans-serif\" font-size=\"14\">"
       << o.xlabel << "</text>\n"
       << "<text x=\"18\" y=\"300\" text-anchor=\"middle\" "
          "font-family=\"sans-serif\" font-size=\"14\" "
          "transform=\"rotate(-90 18 300)\">"
       << o.ylabel << "</text>\n";
}

void axes(std::ostream& os, const Frame& f) {
    os << "<rect x=\"" << kL << "\" y=\"" << kT << "\" width=\""
       << kW - kL - kR << "\" height=\"" << kH - kT - kB
       << "\" fill=\"none\" stroke=\"black\"/>\n";
    for (double t : ticks(f.x0, f.x1)) {
        double p = f.px(t);
        os << "<line x1=\"" << p << "\" y1=\"" << kH - kB << "\" x2=\"" << p
           << "\" y2=\"" << kH - kB + 5 << "\" stroke=\"black\"/>\n"
           << "<text x=\"" << p << "\" y=\"" << kH - kB + 20
           << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
              "font-size=\"12\">"
           << fmt(t) << "</text>\n";
    }
    for (double t : ticks(f.y0, f.y1)) {
        double p = f.py(t);
        os << "<line x1=\"" << kL - 5 << "\" y1=\"" << p << "\" x2=\"" << kL
           << "\" y2=\"" << p << "\" stroke=\"black\"/>\n"
           << "<text x=\"" << kL - 8 << "\" y=\"" << p + 4
           << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
              "font-size=\"12\">"
           << fmt(t) << "</text>\n";
    }
}

}  // namespace

void write_line_plot(const std::string& path,
                     const std::vector<Series>& series,
                     const PlotOptions& opts) {
    Frame f{std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity(),
            std::numeric_limits<double>::infinity(),
            -std::numeric_limits<double>::infinity()};
    for (const auto& s : series)
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            double y = opts.log_y ? std::log10(std::max(s.y[i], 1e-300))
                                  : s.y[i];
            if (!std::isfinite(s.x[i]) || !std::isfinite(y)) continue;
            f.x0 = std::min(f.x0, s.x[i]);
            f.x1 = std::max(f.x1, s.x[i]);
            f.y0 = std::min(f.y0, y);
            f.y1 = std::max(f.y1, y);
        }
    for (double v : opts.vlines)
        if (std::isfinite(v)) {
            f.x0 = std::min(f.x0, v);
            f.x1 = std::max(f.x1, v);
        }
    pad_range(f.x0, f.x1);
    pad_range(f.y0, f.y1);

    std::ofstream os(path);
    header(os, opts);
    axes(os, f);
    for (double v : opts.vlines) {
        if (!std::isfinite(v)) continue;
        double p = f.px(v);
        os << "<line x1=\"" << p << "\" y1=\"" << kT << "\" x2=\"" << p
           << "\" y2=\"" << kH - kB
           << "\" stroke=\"#d62728\" stroke-dasharray=\"6 4\"/>\n";
    }
    double ly = kT + 16.0;
    for (const auto& s : series) {
        std::ostringstream pts;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            double y = opts.log_y ? std::log10(std::max(s.y[i], 1e-300))
                                  : s.y[i];
            if (!std::isfinite(s.x[i]) || !std::isfinite(y)) continue;
            pts << f.px(s.x[i]) << "," << f.py(y) << " ";
        }
        os << "<polyline points=\"" << pts.str()
           << "\" fill=\"none\" stroke=\"" << s.color
           << "\" stroke-width=\"1.5\"/>\n";
        if (s.markers)
            for (std::size_t i = 0; i < s.x.size(); ++i) {
                double y = opts.log_y ? std::log10(std::max(s.y[i], 1e-300))
                                      : s.y[i];
                if (!std::isfinite(s.x[i]) || !std::isfinite(y)) continue;
                os << "<circle cx=\"" << f.px(s.x[i]) << "\" cy=\"" << f.py(y)
                   << "\" r=\"3\" fill=\"" << s.color << "\"/>\n";
            }
        if (!s.label.empty()) {
            os << "<text x=\"" << kW - kR - 8 << "\" y=\"" << ly
               << "\" text-anchor=\"end\" font-family=\"sans-serif\" "
                  "font-size=\"12\" fill=\""
               << s.color << "\">" << s.label << "</text>\n";
            ly += 16.0;
        }
    }
    os << "</svg>\n";
}

void write_histogram(const std::string& path, const std::vector<double>& values,
                     int n_bins, const PlotOptions& opts) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (double v : values)
        if (std::isfinite(v)) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    if (values.empty() || !(hi >= lo)) {
        lo = 0.0;
        hi = 1.0;
    }
    if (hi == lo) hi = lo + 1.0;
    n_bins = std::max(1, n_bins);
    std::vector<double> counts(n_bins, 0.0);
    for (double v : values) {
        if (!std::isfinite(v)) continue;
        int b = std::min(n_bins - 1,
                         static_cast<int>((v - lo) / (hi - lo) * n_bins));
        counts[std::max(0, b)] += 1.0;
    }
    Frame f{lo, hi, 0.0, *std::max_element(counts.begin(), counts.end())};
    pad_range(f.y0, f.y1);
    f.y0 = 0.0;

    std::ofstream os(path);
    header(os, opts);
    axes(os, f);
    double bw = (hi - lo) / n_bins;
    for (int b = 0; b < n_bins; ++b) {
        double x = f.px(lo + b * bw), x2 = f.px(lo + (b + 1) * bw);
        double y = f.py(counts[b]);
        os << "<rect x=\"" << x << "\" y=\"" << y << "\" width=\""
           << std::max(0.5, x2 - x - 1.0) << "\" height=\""
           << (kH - kB) - y
           << "\" fill=\"#1f77b4\" fill-opacity=\"0.7\"/>\n";
    }
    os << "</svg>\n";
}

}  // namespace eigendrift::cli
