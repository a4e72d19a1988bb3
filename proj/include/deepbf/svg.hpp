#pragma once

// Minimal self-contained SVG line and scatter plots.

#include <string>
#include <utility>
#include <vector>

namespace deepbf::svg {

struct Series {
    std::string label;
    std::vector<std::pair<double, double>> points;
    bool scatter = false; // dots instead of a polyline
};

struct Plot {
    std::string title;
    std::string x_label;
    std::string y_label;
    std::vector<Series> series;
    bool diagonal = false; // draw y = x as a guide
};

std::string render(const Plot& plot);

} // namespace deepbf::svg
