#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "crowdnav/logfmt.hpp"

namespace crowdnav {

/// Dependency-free SVG emission. All numbers are printed with a fixed format
/// so identical inputs render byte-identical files.
class SvgBuilder {
public:
    SvgBuilder(double width, double height) : w_(width), h_(height) {
        append("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%g\" height=\"%g\" "
               "viewBox=\"0 0 %g %g\">\n",
               w_, h_, w_, h_);
    }

    void rect(double x, double y, double w, double h, const std::string& style) {
        append("<rect x=\"%.3f\" y=\"%.3f\" width=\"%.3f\" height=\"%.3f\" style=\"%s\"/>\n",
               x, y, w, h, style.c_str());
    }

    void circle(double cx, double cy, double r, const std::string& style) {
        append("<circle cx=\"%.3f\" cy=\"%.3f\" r=\"%.3f\" style=\"%s\"/>\n", cx, cy, r,
               style.c_str());
    }

    void line(double x1, double y1, double x2, double y2, const std::string& style) {
        append("<line x1=\"%.3f\" y1=\"%.3f\" x2=\"%.3f\" y2=\"%.3f\" style=\"%s\"/>\n", x1,
               y1, x2, y2, style.c_str());
    }

    void polyline(const std::vector<std::pair<double, double>>& pts,
                  const std::string& style) {
        if (pts.empty()) return;
        std::string points;
        for (const auto& [x, y] : pts) {
            char buf[64];
            std::snprintf(buf, sizeof(buf), "%.3f,%.3f ", x, y);
            points += buf;
        }
        append("<polyline points=\"%s\" style=\"%s\"/>\n", points.c_str(), style.c_str());
    }

    /// Filled circular sector (for the FoV wedge).
    void wedge(double cx, double cy, double radius, double heading_rad, double fov_rad,
               const std::string& style) {
        if (fov_rad <= 0.0) return;
        double a0 = heading_rad - 0.5 * fov_rad;
        double a1 = heading_rad + 0.5 * fov_rad;
        double x0 = cx + radius * std::cos(a0), y0 = cy - radius * std::sin(a0);
        double x1 = cx + radius * std::cos(a1), y1 = cy - radius * std::sin(a1);
        int large = fov_rad > M_PI ? 1 : 0;
        append("<path d=\"M %.3f %.3f L %.3f %.3f A %.3f %.3f 0 %d 0 %.3f %.3f Z\" "
               "style=\"%s\"/>\n",
               cx, cy, x0, y0, radius, radius, large, x1, y1, style.c_str());
    }

    void text(double x, double y, const std::string& s, double size = 12.0,
              const std::string& extra = "") {
        append("<text x=\"%.3f\" y=\"%.3f\" font-size=\"%.1f\" font-family=\"monospace\" "
               "%s>%s</text>\n",
               x, y, size, extra.c_str(), s.c_str());
    }

    void cross(double x, double y, double r, const std::string& style) {
        line(x - r, y - r, x + r, y + r, style);
        line(x - r, y + r, x + r, y - r, style);
    }

    std::string finish() {
        if (!finished_) {
            body_ += "</svg>\n";
            finished_ = true;
        }
        return body_;
    }

private:
    template <typename... Args>
    void append(const char* f, Args... args) {
        char buf[1024];
        std::snprintf(buf, sizeof(buf), f, args...);
        body_ += buf;
    }

    double w_, h_;
    std::string body_;
    bool finished_ = false;
};

/// Renders an episode: robot path, human paths, FoV wedge samples, believed
/// positions, start and goal markers.
inline std::string render_episode_svg(const EpisodeLog& log, double canvas = 640.0,
                                      int wedge_every = 10) {
    double half = log.config.get_double("sim.arena", 12.0) * 0.5;
    double range = log.config.get_double("sensor.max_range", 5.0);
    double fov_deg = log.config.get_double("sensor.fov_deg", 270.0);
    double margin = 30.0;
    double scale = (canvas - 2 * margin) / (2 * half);
    auto X = [&](double wx) { return margin + (wx + half) * scale; };
    auto Y = [&](double wy) { return canvas - margin - (wy + half) * scale; };

    SvgBuilder svg(canvas, canvas);
    svg.rect(0, 0, canvas, canvas, "fill:white");
    svg.rect(X(-half), Y(half), 2 * half * scale, 2 * half * scale,
             "fill:none;stroke:#333;stroke-width:1.5");

    // FoV wedges at sampled steps
    for (std::size_t i = 0; i < log.steps.size(); i += wedge_every) {
        const LogStep& s = log.steps[i];
        svg.wedge(X(s.robot_pos.x), Y(s.robot_pos.y), range * scale, s.heading,
                  deg_to_rad(fov_deg), "fill:#4488ff;fill-opacity:0.05;stroke:none");
    }

    // human paths
    std::size_t n_humans = log.init_humans.size();
    for (std::size_t hid = 0; hid < n_humans; ++hid) {
        std::vector<std::pair<double, double>> pts;
        pts.emplace_back(X(log.init_humans[hid].x), Y(log.init_humans[hid].y));
        for (const LogStep& s : log.steps)
            if (hid < s.humans.size()) pts.emplace_back(X(s.humans[hid].x), Y(s.humans[hid].y));
        svg.polyline(pts, "fill:none;stroke:#999;stroke-width:1");
        if (!log.steps.empty() && hid < log.steps.back().humans.size()) {
            const Vec2& p = log.steps.back().humans[hid];
            double r = hid < log.human_radii.size() ? log.human_radii[hid] : 0.3;
            svg.circle(X(p.x), Y(p.y), r * scale, "fill:#bbb;stroke:#666;stroke-width:1");
        }
    }

    // believed positions
    for (const LogStep& s : log.steps)
        for (const auto& b : s.beliefs)
            svg.cross(X(b.pos.x), Y(b.pos.y), 3.0, "stroke:#e67e22;stroke-width:1.2");

    // robot path
    std::vector<std::pair<double, double>> rp;
    rp.emplace_back(X(log.init_robot_pos.x), Y(log.init_robot_pos.y));
    for (const LogStep& s : log.steps) rp.emplace_back(X(s.robot_pos.x), Y(s.robot_pos.y));
    svg.polyline(rp, "fill:none;stroke:#1060c0;stroke-width:2");
    svg.circle(X(log.init_robot_pos.x), Y(log.init_robot_pos.y), 4,
               "fill:#1060c0;stroke:none");
    if (!log.steps.empty()) {
        const LogStep& last = log.steps.back();
        double rr = log.config.get_double("robot.radius", 0.3);
        svg.circle(X(last.robot_pos.x), Y(last.robot_pos.y), rr * scale,
                   "fill:#1060c0;fill-opacity:0.5;stroke:#1060c0");
    }

    // goal marker
    svg.cross(X(log.goal.x), Y(log.goal.y), 6.0, "stroke:#10a010;stroke-width:2.5");
    svg.circle(X(log.goal.x), Y(log.goal.y), 8.0, "fill:none;stroke:#10a010;stroke-width:1.5");

    svg.text(margin, 18.0,
             "policy " + log.policy + "  seed " + std::to_string(log.episode_seed) +
                 "  end " + event_name(log.terminal_event()));
    return svg.finish();
}

struct ChartSeries {
    std::string label;
    std::vector<double> x;
    std::vector<double> y;
};

/// Minimal line chart with axes, ticks and a legend, for the sweep plots.
inline std::string render_line_chart(const std::string& title, const std::string& x_label,
                                     const std::string& y_label,
                                     const std::vector<ChartSeries>& series,
                                     double width = 560.0, double height = 400.0) {
    static const char* colors[] = {"#1060c0", "#e67e22", "#10a010", "#c01060",
                                   "#707070", "#806010"};
    double ml = 60, mr = 130, mt = 40, mb = 50;
    double x_min = 1e300, x_max = -1e300, y_min = 1e300, y_max = -1e300;
    for (const auto& s : series) {
        for (double v : s.x) {
            x_min = std::min(x_min, v);
            x_max = std::max(x_max, v);
        }
        for (double v : s.y) {
            y_min = std::min(y_min, v);
            y_max = std::max(y_max, v);
        }
    }
    if (x_min > x_max) {
        x_min = 0;
        x_max = 1;
    }
    if (y_min > y_max) {
        y_min = 0;
        y_max = 1;
    }
    if (y_max == y_min) y_max = y_min + 1.0;
    if (x_max == x_min) x_max = x_min + 1.0;
    double pw = width - ml - mr, ph = height - mt - mb;
    auto X = [&](double v) { return ml + (v - x_min) / (x_max - x_min) * pw; };
    auto Y = [&](double v) { return mt + ph - (v - y_min) / (y_max - y_min) * ph; };

    SvgBuilder svg(width, height);
    svg.rect(0, 0, width, height, "fill:white");
    svg.text(ml, 22, title, 14);
    svg.line(ml, mt, ml, mt + ph, "stroke:#333;stroke-width:1");
    svg.line(ml, mt + ph, ml + pw, mt + ph, "stroke:#333;stroke-width:1");
    for (int i = 0; i <= 4; ++i) {
        double fy = y_min + (y_max - y_min) * i / 4.0;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3g", fy);
        svg.text(8, Y(fy) + 4, buf, 10);
        svg.line(ml - 3, Y(fy), ml, Y(fy), "stroke:#333;stroke-width:1");
    }
    for (int i = 0; i <= 4; ++i) {
        double fx = x_min + (x_max - x_min) * i / 4.0;
        char buf[32];
        std::snprintf(buf, sizeof(buf), "%.3g", fx);
        svg.text(X(fx) - 8, mt + ph + 16, buf, 10);
        svg.line(X(fx), mt + ph, X(fx), mt + ph + 3, "stroke:#333;stroke-width:1");
    }
    svg.text(ml + pw / 2 - 20, height - 12, x_label, 11);
    svg.text(8, mt - 8, y_label, 11);

    for (std::size_t si = 0; si < series.size(); ++si) {
        const char* color = colors[si % 6];
        std::vector<std::pair<double, double>> pts;
        for (std::size_t i = 0; i < series[si].x.size(); ++i)
            pts.emplace_back(X(series[si].x[i]), Y(series[si].y[i]));
        svg.polyline(pts, std::string("fill:none;stroke:") + color + ";stroke-width:2");
        for (auto& [px, py] : pts)
            svg.circle(px, py, 3.0, std::string("fill:") + color + ";stroke:none");
        svg.text(ml + pw + 10, mt + 14 + 16 * static_cast<double>(si), series[si].label, 11,
                 std::string("fill=\"") + color + "\"");
    }
    return svg.finish();
}

}  // namespace crowdnav
