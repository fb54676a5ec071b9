#pragma once

#include "evo/core.hpp"
#include "evo/models.hpp"
#include "evo/rewards.hpp"

#include <functional>
#include <string>
#include <vector>

namespace evo {

struct Segment {
    double x0, y0, x1, y1;
};

/// Marching squares on a regular grid. values[j * nx + i] sits at
/// (xmin + i * dx, ymin + j * dy). Saddle cells are split by the cell-centre
/// average.
std::vector<Segment> contour_segments(const std::vector<double>& values, std::size_t nx, std::size_t ny, double xmin,
                                      double ymin, double dx, double dy, double level);

struct Series {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
    std::vector<double> err;  // optional symmetric error bars
};

struct CurvePlot {
    std::string title;
    std::string x_label;
    std::string y_label;
    bool log_x = false;
    std::vector<Series> series;
};

std::string render_curves(const CurvePlot& plot);

struct ScatterPlot {
    std::string title;
    double extent = 2.6;  // square window [-extent, extent]^2
    std::size_t grid = 121;
    int contour_levels = 6;
};

/// Samples over density contours of `model` and the reward's best level set.
/// Only the first two coordinates are drawn.
std::string render_scatter(const ScatterPlot& plot, const GaussianMixture& model, const RewardFn& fn,
                           const Batch& samples);

}  // namespace evo
