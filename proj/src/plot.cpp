#include "evo/plot.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>

namespace evo {

namespace {

enum Edge { Bottom, Right, Top, Left };

}  // namespace

std::vector<Segment> contour_segments(const std::vector<double>& values, std::size_t nx, std::size_t ny, double xmin,
                                      double ymin, double dx, double dy, double level) {
    if (nx < 2 || ny < 2 || values.size() != nx * ny) throw std::invalid_argument("contour_segments: bad grid");
    std::vector<Segment> out;
    auto at = [&](std::size_t i, std::size_t j) { return values[j * nx + i]; };
    auto frac = [&](double lo, double hi) {
        const double d = hi - lo;
        return d == 0.0 ? 0.5 : std::clamp((level - lo) / d, 0.0, 1.0);
    };
    for (std::size_t j = 0; j + 1 < ny; ++j) {
        for (std::size_t i = 0; i + 1 < nx; ++i) {
            const double a = at(i, j), b = at(i + 1, j), c = at(i + 1, j + 1), d = at(i, j + 1);
            if (!(std::isfinite(a) && std::isfinite(b) && std::isfinite(c) && std::isfinite(d))) continue;
            const int code = (a >= level) | (b >= level) << 1 | (c >= level) << 2 | (d >= level) << 3;
            if (code == 0 || code == 15) continue;
            const double x = xmin + static_cast<double>(i) * dx;
            const double y = ymin + static_cast<double>(j) * dy;
            auto point = [&](Edge e) -> std::array<double, 2> {
                switch (e) {
                    case Bottom: return {x + frac(a, b) * dx, y};
                    case Right: return {x + dx, y + frac(b, c) * dy};
                    case Top: return {x + frac(d, c) * dx, y + dy};
                    case Left: return {x, y + frac(a, d) * dy};
                }
                return {x, y};
            };
            auto emit = [&](Edge e0, Edge e1) {
                const auto p = point(e0);
                const auto q = point(e1);
                out.push_back({p[0], p[1], q[0], q[1]});
            };
            const bool centre_high = 0.25 * (a + b + c + d) >= level;
            switch (code) {
                case 1: case 14: emit(Left, Bottom); break;
                case 2: case 13: emit(Bottom, Right); break;
                case 3: case 12: emit(Left, Right); break;
                case 4: case 11: emit(Right, Top); break;
                case 6: case 9: emit(Bottom, Top); break;
                case 7: case 8: emit(Left, Top); break;
                case 5:
                    if (centre_high) { emit(Bottom, Right); emit(Left, Top); }
                    else { emit(Left, Bottom); emit(Right, Top); }
                    break;
                case 10:
                    if (centre_high) { emit(Left, Bottom); emit(Right, Top); }
                    else { emit(Bottom, Right); emit(Left, Top); }
                    break;
                default: break;
            }
        }
    }
    return out;
}

namespace {

constexpr std::array<const char*, 6> kPalette{"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string escape(const std::string& text) {
    std::string out;
    for (char ch : text) {
        switch (ch) {
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '&': out += "&amp;"; break;
            case '"': out += "&quot;"; break;
            default: out += ch;
        }
    }
    return out;
}

std::string tick(double v) { return fmt::format("{:.4g}", v); }

}  // namespace

std::string render_curves(const CurvePlot& plot) {
    constexpr double W = 640, H = 420, L = 70, R = 160, T = 40, B = 50;
    double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
    for (const auto& s : plot.series) {
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i]) || (plot.log_x && !(s.x[i] > 0.0))) continue;
            const double e = i < s.err.size() && std::isfinite(s.err[i]) ? s.err[i] : 0.0;
            xmin = std::min(xmin, s.x[i]);
            xmax = std::max(xmax, s.x[i]);
            ymin = std::min(ymin, s.y[i] - e);
            ymax = std::max(ymax, s.y[i] + e);
        }
    }
    if (!std::isfinite(xmin)) xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    auto tx = [&](double v) { return plot.log_x ? std::log10(v) : v; };
    double x0 = tx(xmin), x1 = tx(xmax);
    if (x1 <= x0) x0 -= 0.5, x1 += 0.5;
    if (ymax <= ymin) ymin -= 0.5, ymax += 0.5;
    const double pad = 0.05 * (ymax - ymin);
    ymin -= pad;
    ymax += pad;
    auto px = [&](double v) { return L + (tx(v) - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double v) { return H - B - (v - ymin) / (ymax - ymin) * (H - T - B); };

    std::ostringstream svg;
    svg << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" font-family="sans-serif" font-size="12">)", W, H) << '\n';
    svg << fmt::format(R"(<rect width="{}" height="{}" fill="white"/>)", W, H) << '\n';
    svg << fmt::format(R"(<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>)", (W - R + L) / 2, escape(plot.title)) << '\n';
    svg << fmt::format(R"(<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>)", L, T, W - L - R, H - T - B) << '\n';
    for (int k = 0; k <= 4; ++k) {
        const double yv = ymin + (ymax - ymin) * k / 4.0;
        svg << fmt::format(R"(<text x="{:.2f}" y="{:.2f}" text-anchor="end">{}</text>)", L - 6, py(yv) + 4, tick(yv)) << '\n';
        const double xv = plot.log_x ? std::pow(10.0, x0 + (x1 - x0) * k / 4.0) : x0 + (x1 - x0) * k / 4.0;
        svg << fmt::format(R"(<text x="{:.2f}" y="{:.2f}" text-anchor="middle">{}</text>)", px(xv), H - B + 16, tick(xv)) << '\n';
    }
    svg << fmt::format(R"(<text x="{}" y="{}" text-anchor="middle">{}</text>)", (W - R + L) / 2, H - 12, escape(plot.x_label)) << '\n';
    svg << fmt::format(R"svg(<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>)svg", (H - B + T) / 2, (H - B + T) / 2, escape(plot.y_label)) << '\n';

    for (std::size_t si = 0; si < plot.series.size(); ++si) {
        const auto& s = plot.series[si];
        const char* colour = kPalette[si % kPalette.size()];
        std::string points;
        for (std::size_t i = 0; i < s.x.size(); ++i) {
            if (!std::isfinite(s.y[i]) || (plot.log_x && !(s.x[i] > 0.0))) continue;
            points += fmt::format("{:.2f},{:.2f} ", px(s.x[i]), py(s.y[i]));
            svg << fmt::format(R"(<circle cx="{:.2f}" cy="{:.2f}" r="2.5" fill="{}"/>)", px(s.x[i]), py(s.y[i]), colour) << '\n';
            if (i < s.err.size() && std::isfinite(s.err[i]) && s.err[i] > 0.0) {
                svg << fmt::format(R"(<line x1="{0:.2f}" y1="{1:.2f}" x2="{0:.2f}" y2="{2:.2f}" stroke="{3}"/>)", px(s.x[i]),
                                   py(s.y[i] - s.err[i]), py(s.y[i] + s.err[i]), colour)
                    << '\n';
            }
        }
        if (!points.empty()) {
            svg << fmt::format(R"(<polyline points="{}" fill="none" stroke="{}" stroke-width="1.5"/>)", points, colour) << '\n';
        }
        const double ly = T + 16 + 18.0 * static_cast<double>(si);
        svg << fmt::format(R"(<line x1="{}" y1="{:.2f}" x2="{}" y2="{:.2f}" stroke="{}" stroke-width="2"/>)", W - R + 12, ly - 4, W - R + 32, ly - 4, colour) << '\n';
        svg << fmt::format(R"(<text x="{}" y="{:.2f}">{}</text>)", W - R + 38, ly, escape(s.label)) << '\n';
    }
    svg << "</svg>\n";
    return svg.str();
}

std::string render_scatter(const ScatterPlot& plot, const GaussianMixture& model, const RewardFn& fn,
                           const Batch& samples) {
    constexpr double S = 480, M = 30;
    const double e = plot.extent;
    const std::size_t n = plot.grid;
    const double step = 2.0 * e / static_cast<double>(n - 1);
    auto px = [&](double v) { return M + (v + e) / (2.0 * e) * S; };
    auto py = [&](double v) { return M + S - (v + e) / (2.0 * e) * S; };

    std::vector<double> density(n * n), rew(n * n);
    std::vector<double> point(model.dim(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        for (std::size_t i = 0; i < n; ++i) {
            point[0] = -e + static_cast<double>(i) * step;
            if (point.size() > 1) point[1] = -e + static_cast<double>(j) * step;
            density[j * n + i] = log_density_p0(model, point);
            rew[j * n + i] = fn(point);
        }
    }

    std::ostringstream svg;
    svg << fmt::format(R"(<svg xmlns="http://www.w3.org/2000/svg" width="{0}" height="{1}" font-family="sans-serif" font-size="12">)", S + 2 * M, S + 2 * M + 10) << '\n';
    svg << fmt::format(R"(<rect width="{}" height="{}" fill="white"/>)", S + 2 * M, S + 2 * M + 10) << '\n';
    svg << fmt::format(R"(<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>)", M + S / 2, escape(plot.title)) << '\n';
    svg << fmt::format(R"(<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>)", M, M, S, S) << '\n';

    auto draw = [&](const std::vector<Segment>& segs, const char* colour, double width) {
        if (segs.empty()) return;
        std::string path;
        for (const auto& s : segs) {
            path += fmt::format("M{:.2f} {:.2f}L{:.2f} {:.2f}", px(s.x0), py(s.y0), px(s.x1), py(s.y1));
        }
        svg << fmt::format(R"(<path d="{}" fill="none" stroke="{}" stroke-width="{}"/>)", path, colour, width) << '\n';
    };

    const double peak = *std::max_element(density.begin(), density.end());
    for (int k = 1; k <= plot.contour_levels; ++k) {
        // Levels spaced in log density below the peak.
        const double level = peak - 1.5 * static_cast<double>(k);
        draw(contour_segments(density, n, n, -e, -e, step, step, level), "#9ecae1", 1.0);
    }

    double rmax = -std::numeric_limits<double>::infinity(), rmin = -rmax;
    for (double v : rew) {
        if (std::isfinite(v)) rmax = std::max(rmax, v), rmin = std::min(rmin, v);
    }
    if (std::isfinite(rmax) && rmax > rmin) {
        const double level = rmax - 0.02 * (rmax - rmin);
        draw(contour_segments(rew, n, n, -e, -e, step, step, level), "#d62728", 1.5);
    }

    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto p = samples.row(i);
        const double y = p.size() > 1 ? p[1] : 0.0;
        if (std::abs(p[0]) > e || std::abs(y) > e) continue;
        svg << fmt::format(R"(<circle cx="{:.2f}" cy="{:.2f}" r="2.5" fill="#08306b" fill-opacity="0.7"/>)", px(p[0]), py(y)) << '\n';
    }
    svg << "</svg>\n";
    return svg.str();
}

}  // namespace evo
