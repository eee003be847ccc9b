// Static SVG figures for a mission: map contours with the trajectory, sensor
// footprint, time series and solver times. Plain <polyline>/<path> output.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "searchmpc/coverage.hpp"
#include "searchmpc/mission.hpp"
#include "searchmpc/results.hpp"

namespace searchmpc {

namespace svg {

inline std::string num(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4g", v);
    return buf;
}

struct Frame {
    double x0, x1, y0, y1;  // data range
    double width{640}, height{400}, margin{50};

    double px(double x) const { return margin + (x - x0) / (x1 - x0) * (width - 2 * margin); }
    double py(double y) const { return height - margin - (y - y0) / (y1 - y0) * (height - 2 * margin); }
};

inline Frame padded(double x0, double x1, double y0, double y1) {
    if (!(x1 > x0)) { x0 -= 0.5; x1 += 0.5; }
    if (!(y1 > y0)) { y0 -= 0.5; y1 += 0.5; }
    const double dy = 0.05 * (y1 - y0);
    return {x0, x1, y0 - dy, y1 + dy};
}

/// Square data aspect for map views.
inline Frame square(double x0, double x1, double y0, double y1) {
    const double span = std::max(x1 - x0, y1 - y0);
    const double cx = 0.5 * (x0 + x1), cy = 0.5 * (y0 + y1);
    return {cx - 0.5 * span, cx + 0.5 * span, cy - 0.5 * span, cy + 0.5 * span, 560, 560, 50};
}

inline std::string header(const Frame& f, const std::string& title) {
    std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(f.width) +
                    "\" height=\"" + num(f.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s += "<text x=\"" + num(f.width / 2) + "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">" + title +
         "</text>\n";
    return s;
}

inline std::string axes(const Frame& f, const std::string& xlabel, const std::string& ylabel) {
    std::string s;
    const double l = f.margin, r = f.width - f.margin, t = f.margin, b = f.height - f.margin;
    s += "<rect x=\"" + num(l) + "\" y=\"" + num(t) + "\" width=\"" + num(r - l) + "\" height=\"" +
         num(b - t) + "\" fill=\"none\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double xv = f.x0 + (f.x1 - f.x0) * i / 4.0;
        const double yv = f.y0 + (f.y1 - f.y0) * i / 4.0;
        s += "<text x=\"" + num(f.px(xv)) + "\" y=\"" + num(b + 15) + "\" text-anchor=\"middle\">" + num(xv) +
             "</text>\n";
        s += "<text x=\"" + num(l - 5) + "\" y=\"" + num(f.py(yv) + 4) + "\" text-anchor=\"end\">" + num(yv) +
             "</text>\n";
    }
    s += "<text x=\"" + num((l + r) / 2) + "\" y=\"" + num(f.height - 10) + "\" text-anchor=\"middle\">" +
         xlabel + "</text>\n";
    s += "<text x=\"15\" y=\"" + num((t + b) / 2) + "\" text-anchor=\"middle\" transform=\"rotate(-90 15 " +
         num((t + b) / 2) + ")\">" + ylabel + "</text>\n";
    return s;
}

inline std::string polyline(const Frame& f, const std::vector<double>& xs, const std::vector<double>& ys,
                            const std::string& color, double width = 1.5) {
    std::string s = "<polyline fill=\"none\" stroke=\"" + color + "\" stroke-width=\"" + num(width) +
                    "\" points=\"";
    for (std::size_t i = 0; i < xs.size(); ++i) s += num(f.px(xs[i])) + "," + num(f.py(ys[i])) + " ";
    return s + "\"/>\n";
}

inline std::string legend(const Frame& f, const std::vector<std::pair<std::string, std::string>>& items) {
    std::string s;
    double y = f.margin + 15;
    for (const auto& [label, color] : items) {
        const double x = f.width - f.margin - 90;
        s += "<line x1=\"" + num(x) + "\" y1=\"" + num(y - 4) + "\" x2=\"" + num(x + 20) + "\" y2=\"" +
             num(y - 4) + "\" stroke=\"" + color + "\" stroke-width=\"2\"/>\n";
        s += "<text x=\"" + num(x + 25) + "\" y=\"" + num(y) + "\">" + label + "</text>\n";
        y += 16;
    }
    return s;
}

}  // namespace svg

/// Line segments of the level set {h = level} on a sampled lattice (marching squares).
inline std::vector<std::array<Vec2, 2>> contour_segments(const UncertaintyMap& map, Vec2 lo, Vec2 hi,
                                                         int n, double level) {
    std::vector<double> v((n + 1) * (n + 1));
    const Vec2 step = (hi - lo) / n;
    auto at = [&](int i, int j) -> Vec2 { return lo + Vec2(i * step.x(), j * step.y()); };
    for (int j = 0; j <= n; ++j)
        for (int i = 0; i <= n; ++i) v[j * (n + 1) + i] = map.eval_density(at(i, j));
    auto val = [&](int i, int j) { return v[j * (n + 1) + i]; };
    auto cross = [&](int i0, int j0, int i1, int j1) {
        const double a = val(i0, j0), b = val(i1, j1);
        const double t = (level - a) / (b - a);
        return Vec2(at(i0, j0) + t * (at(i1, j1) - at(i0, j0)));
    };
    std::vector<std::array<Vec2, 2>> segs;
    for (int j = 0; j < n; ++j) {
        for (int i = 0; i < n; ++i) {
            // Corners counter-clockwise from the lower left; edges 0..3 follow them.
            const int code = (val(i, j) > level) | (val(i + 1, j) > level) << 1 |
                             (val(i + 1, j + 1) > level) << 2 | (val(i, j + 1) > level) << 3;
            if (code == 0 || code == 15) continue;
            const Vec2 e[4] = {cross(i, j, i + 1, j), cross(i + 1, j, i + 1, j + 1),
                               cross(i, j + 1, i + 1, j + 1), cross(i, j, i, j + 1)};
            auto add = [&](int a, int b) { segs.push_back({e[a], e[b]}); };
            switch (code) {
                case 1: case 14: add(0, 3); break;
                case 2: case 13: add(0, 1); break;
                case 3: case 12: add(1, 3); break;
                case 4: case 11: add(1, 2); break;
                case 6: case 9: add(0, 2); break;
                case 7: case 8: add(2, 3); break;
                case 5: add(0, 1); add(2, 3); break;
                case 10: add(0, 3); add(1, 2); break;
                default: break;
            }
        }
    }
    return segs;
}

namespace detail {

inline svg::Frame map_frame(const MissionLog& log) {
    const auto& g = log.grid;
    return svg::square(g.origin.x(), g.origin.x() + g.width * g.cell_size, g.origin.y(),
                       g.origin.y() + g.height * g.cell_size);
}

inline std::string trajectory_path(const svg::Frame& f, const MissionLog& log, const std::string& color) {
    std::vector<double> xs, ys;
    for (const auto& s : log.states) {
        xs.push_back(s.position.x());
        ys.push_back(s.position.y());
    }
    std::string out = svg::polyline(f, xs, ys, color, 1.5);
    if (!xs.empty())
        out += "<circle cx=\"" + svg::num(f.px(xs.front())) + "\" cy=\"" + svg::num(f.py(ys.front())) +
               "\" r=\"4\" fill=\"green\"/>\n";
    return out;
}

inline std::string series_plot(const std::string& title, const std::string& ylabel, const std::vector<double>& t,
                               const std::vector<std::pair<std::string, std::vector<double>>>& series) {
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd"};
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& [_, ys] : series)
        for (double y : ys) {
            lo = std::min(lo, y);
            hi = std::max(hi, y);
        }
    if (t.empty() || !std::isfinite(lo)) return "";
    const auto f = svg::padded(t.front(), t.back(), lo, hi);
    std::string s = svg::header(f, title) + svg::axes(f, "t [s]", ylabel);
    std::vector<std::pair<std::string, std::string>> items;
    for (std::size_t i = 0; i < series.size(); ++i) {
        s += svg::polyline(f, t, series[i].second, colors[i % 4]);
        items.emplace_back(series[i].first, colors[i % 4]);
    }
    if (series.size() > 1) s += svg::legend(f, items);
    return s + "</svg>\n";
}

}  // namespace detail

/// Writes trajectory, footprint, position, velocity, coverage and solve-time SVGs into dir.
inline void render_plots(const std::filesystem::path& dir, const MissionLog& log, const Scenario& sc) {
    std::filesystem::create_directories(dir);
    const double r = sc.planner.radius();
    const auto f = detail::map_frame(log);
    const Vec2 lo(f.x0, f.y0), hi(f.x1, f.y1);

    // Trajectory over the map's level curves.
    {
        double peak = 0.0;
        for (const auto& t : sc.map.terms()) peak = std::max(peak, sc.map.eval_density(t.source.mean));
        std::string s = svg::header(f, "Trajectory") + svg::axes(f, "x [m]", "y [m]");
        for (int l = 1; l <= 8; ++l) {
            std::string path = "<path fill=\"none\" stroke=\"#999\" stroke-width=\"0.8\" d=\"";
            for (const auto& seg : contour_segments(sc.map, lo, hi, 120, peak * l / 9.0))
                path += "M" + svg::num(f.px(seg[0].x())) + " " + svg::num(f.py(seg[0].y())) + "L" +
                        svg::num(f.px(seg[1].x())) + " " + svg::num(f.py(seg[1].y()));
            s += path + "\"/>\n";
        }
        s += detail::trajectory_path(f, log, "#d62728");
        write_text(dir / "trajectory.svg", s + "</svg>\n");
    }

    // Sensor footprint: covered cells shaded, one circle per visited position.
    {
        CoverageMask mask(log.grid);
        for (const auto& st : log.states) mask.stamp_disk(st.position, r);
        std::string s = svg::header(f, "Sensor footprint") + svg::axes(f, "x [m]", "y [m]");
        const double c = log.grid.cell_size;
        const double cw = f.px(c) - f.px(0.0);
        const auto bits = mask.bits();
        std::string cells = "<g fill=\"#9ecae1\">\n";
        for (std::size_t idx = 0; idx < bits.size(); ++idx) {
            if (!bits[idx]) continue;
            const Vec2 p = mask.center_of(idx);
            cells += "<rect x=\"" + svg::num(f.px(p.x() - 0.5 * c)) + "\" y=\"" + svg::num(f.py(p.y() + 0.5 * c)) +
                     "\" width=\"" + svg::num(cw) + "\" height=\"" + svg::num(cw) + "\"/>\n";
        }
        s += cells + "</g>\n";
        const double rpx = f.px(r) - f.px(0.0);
        const std::size_t stride = std::max<std::size_t>(1, log.states.size() / 60);
        for (std::size_t k = 0; k < log.states.size(); k += stride) {
            const Vec2 p = log.states[k].position;
            s += "<circle cx=\"" + svg::num(f.px(p.x())) + "\" cy=\"" + svg::num(f.py(p.y())) + "\" r=\"" +
                 svg::num(rpx) + "\" fill=\"none\" stroke=\"#3182bd\" stroke-width=\"0.5\"/>\n";
        }
        s += detail::trajectory_path(f, log, "#d62728");
        write_text(dir / "footprint.svg", s + "</svg>\n");
    }

    std::vector<double> x, y, vx, vy, speed;
    for (const auto& st : log.states) {
        x.push_back(st.position.x());
        y.push_back(st.position.y());
        vx.push_back(st.velocity.x());
        vy.push_back(st.velocity.y());
        speed.push_back(st.velocity.norm());
    }
    write_text(dir / "position.svg", detail::series_plot("Position", "[m]", log.times, {{"x", x}, {"y", y}}));
    write_text(dir / "velocity.svg", detail::series_plot("Velocity", "[m/s]", log.times,
                                                         {{"vx", vx}, {"vy", vy}, {"|v|", speed}}));
    write_text(dir / "coverage.svg",
               detail::series_plot("Uncertainty covered", "H", log.times, {{"H", log.coverage_series}}));
    std::vector<double> ts, ms;
    for (const auto& rec : log.solve_stats) {
        ts.push_back(log.times[rec.step]);
        ms.push_back(rec.solve_ms);
    }
    write_text(dir / "solve_time.svg", detail::series_plot("Computation time", "[ms]", ts, {{"solve", ms}}));
}

}  // namespace searchmpc
