#pragma once

// Deterministic SVG 1.1 line charts rendered straight from the summary CSVs;
// no plotting dependency. Same CSV in, same bytes out.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace colnn {

enum class PlotKind { AlignmentVsS, DecayCurve, StepsizePanel };

inline PlotKind plot_kind_from_name(const std::string& s) {
    if (s == "alignment_vs_s") return PlotKind::AlignmentVsS;
    if (s == "decay_curve") return PlotKind::DecayCurve;
    if (s == "stepsize_panel") return PlotKind::StepsizePanel;
    throw std::invalid_argument("unknown plot kind: " + s);
}

namespace svg_detail {

struct Csv {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int col(const std::string& name) const {
        for (size_t i = 0; i < header.size(); ++i) {
            if (header[i] == name) return static_cast<int>(i);
        }
        throw std::invalid_argument("csv: missing column " + name);
    }
};

inline Csv parse_csv(const std::string& text) {
    Csv csv;
    std::istringstream is(text);
    std::string line;
    bool first = true;
    while (std::getline(is, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::string cur;
        for (char ch : line) {
            if (ch == ',') {
                fields.push_back(cur);
                cur.clear();
            } else {
                cur.push_back(ch);
            }
        }
        fields.push_back(cur);
        if (first) {
            csv.header = fields;
            first = false;
        } else {
            csv.rows.push_back(fields);
        }
    }
    if (csv.header.empty()) throw std::invalid_argument("csv: empty input");
    return csv;
}

struct Point {
    double x = 0, y = 0, err = 0;
};

struct Series {
    std::string name;
    std::vector<Point> pts;
};

inline std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

constexpr const char* kPalette[10] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
                                      "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

// Shared line-chart renderer. x_pos maps data x to an abstract axis position;
// tick labels come from the caller.
inline std::string render_chart(const std::vector<Series>& series,
                                const std::vector<std::pair<double, std::string>>& x_ticks,
                                const std::string& x_label, const std::string& y_label, bool log_y) {
    const double width = 720, height = 480;
    const double ml = 70, mr = 180, mt = 30, mb = 55;
    const double pw = width - ml - mr, ph = height - mt - mb;

    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& s : series) {
        for (const auto& p : s.pts) {
            xmin = std::min(xmin, p.x);
            xmax = std::max(xmax, p.x);
            const double lo = log_y ? p.y : p.y - p.err;
            const double hi = log_y ? p.y : p.y + p.err;
            ymin = std::min(ymin, lo);
            ymax = std::max(ymax, hi);
        }
    }
    if (xmin > xmax) throw std::invalid_argument("render_chart: no points");
    if (xmin == xmax) {
        xmin -= 0.5;
        xmax += 0.5;
    }
    if (log_y) {
        ymin = std::log10(std::max(ymin, 1e-12));
        ymax = std::log10(std::max(ymax, 1e-12));
    }
    if (ymin == ymax) {
        ymin -= 0.5;
        ymax += 0.5;
    }
    const double ypad = 0.05 * (ymax - ymin);
    ymin -= ypad;
    ymax += ypad;

    auto px = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto py = [&](double y) {
        const double v = log_y ? std::log10(std::max(y, 1e-12)) : y;
        return mt + (1.0 - (v - ymin) / (ymax - ymin)) * ph;
    };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width
       << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
    os << "<rect x=\"" << ml << "\" y=\"" << mt << "\" width=\"" << pw << "\" height=\"" << ph
       << "\" fill=\"none\" stroke=\"#333\"/>\n";

    for (const auto& [xv, label] : x_ticks) {
        const double x = px(xv);
        os << "<line x1=\"" << fmt(x) << "\" y1=\"" << fmt(mt + ph) << "\" x2=\"" << fmt(x)
           << "\" y2=\"" << fmt(mt + ph + 5) << "\" stroke=\"#333\"/>\n";
        os << "<text x=\"" << fmt(x) << "\" y=\"" << fmt(mt + ph + 18)
           << "\" font-size=\"11\" text-anchor=\"middle\">" << label << "</text>\n";
    }
    const int n_yticks = 6;
    for (int i = 0; i <= n_yticks; ++i) {
        const double v = ymin + (ymax - ymin) * i / n_yticks;
        const double y = mt + (1.0 - static_cast<double>(i) / n_yticks) * ph;
        const double shown = log_y ? std::pow(10.0, v) : v;
        os << "<line x1=\"" << fmt(ml - 5) << "\" y1=\"" << fmt(y) << "\" x2=\"" << fmt(ml)
           << "\" y2=\"" << fmt(y) << "\" stroke=\"#333\"/>\n";
        os << "<text x=\"" << fmt(ml - 8) << "\" y=\"" << fmt(y + 4)
           << "\" font-size=\"11\" text-anchor=\"end\">" << fmt(shown) << "</text>\n";
    }
    os << "<text x=\"" << fmt(ml + pw / 2) << "\" y=\"" << fmt(height - 12)
       << "\" font-size=\"13\" text-anchor=\"middle\">" << x_label << "</text>\n";
    os << "<text x=\"18\" y=\"" << fmt(mt + ph / 2)
       << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 " << fmt(mt + ph / 2)
       << ")\">" << y_label << "</text>\n";

    int ci = 0;
    for (const auto& s : series) {
        const std::string color = kPalette[ci % 10];
        // one-standard-error band (suppressed for single points and log-y)
        if (!log_y && s.pts.size() > 1) {
            std::ostringstream band;
            band << "<polygon fill=\"" << color << "\" fill-opacity=\"0.15\" stroke=\"none\" points=\"";
            for (const auto& p : s.pts) band << fmt(px(p.x)) << "," << fmt(py(p.y + p.err)) << " ";
            for (auto it = s.pts.rbegin(); it != s.pts.rend(); ++it) {
                band << fmt(px(it->x)) << "," << fmt(py(it->y - it->err)) << " ";
            }
            band << "\"/>\n";
            os << band.str();
        }
        if (s.pts.size() > 1) {
            os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.8\" points=\"";
            for (const auto& p : s.pts) os << fmt(px(p.x)) << "," << fmt(py(p.y)) << " ";
            os << "\"/>\n";
        }
        for (const auto& p : s.pts) {
            os << "<circle cx=\"" << fmt(px(p.x)) << "\" cy=\"" << fmt(py(p.y)) << "\" r=\"3\" fill=\""
               << color << "\"/>\n";
        }
        const double ly = mt + 16 + 18 * ci;
        os << "<line x1=\"" << fmt(ml + pw + 10) << "\" y1=\"" << fmt(ly) << "\" x2=\""
           << fmt(ml + pw + 30) << "\" y2=\"" << fmt(ly) << "\" stroke=\"" << color
           << "\" stroke-width=\"1.8\"/>\n";
        os << "<text x=\"" << fmt(ml + pw + 35) << "\" y=\"" << fmt(ly + 4) << "\" font-size=\"11\">"
           << s.name << "</text>\n";
        ++ci;
    }
    os << "</svg>\n";
    return os.str();
}

// s=0 cannot sit on a log axis; it gets a dedicated slot one decade left of
// the smallest positive value.
inline double s_axis_pos(double s, double min_positive) {
    if (s > 0.0) return std::log10(s);
    return std::log10(min_positive) - 1.0;
}

}  // namespace svg_detail

inline std::string render_svg(const std::string& summary_csv_text, PlotKind kind) {
    using namespace svg_detail;
    Csv csv = parse_csv(summary_csv_text);
    if (csv.rows.empty()) throw std::invalid_argument("render_svg: empty CSV");

    if (kind == PlotKind::DecayCurve) {
        const int c_cell = csv.col("cell"), c_bias = csv.col("bias"), c_step = csv.col("step");
        const int c_mean = csv.col("mean_abs_state");
        std::map<std::string, Series> by;
        for (const auto& r : csv.rows) {
            const std::string name = r[c_cell] + (r[c_bias] == "1" ? " (bias)" : " (no bias)");
            Series& s = by[name];
            s.name = name;
            s.pts.push_back({std::stod(r[c_step]), std::stod(r[c_mean]), 0.0});
        }
        std::vector<Series> series;
        for (auto& [k, s] : by) {
            std::sort(s.pts.begin(), s.pts.end(), [](const Point& a, const Point& b) { return a.x < b.x; });
            series.push_back(std::move(s));
        }
        std::vector<std::pair<double, std::string>> ticks;
        double max_step = 0;
        for (const auto& s : series) {
            for (const auto& p : s.pts) max_step = std::max(max_step, p.x);
        }
        for (int t = 0; t <= static_cast<int>(max_step); t += 2) {
            ticks.push_back({static_cast<double>(t), std::to_string(t)});
        }
        return render_chart(series, ticks, "step", "mean |state|", /*log_y=*/true);
    }

    const int c_s = csv.col("s_percent"), c_est = csv.col("estimator");
    const int c_mean = csv.col("mean_alignment"), c_err = csv.col("stderr_alignment");
    const int c_ss = csv.col("SS");
    double min_pos = 1e300;
    for (const auto& r : csv.rows) {
        const double s = std::stod(r[c_s]);
        if (s > 0) min_pos = std::min(min_pos, s);
    }
    if (min_pos == 1e300) min_pos = 1.0;
    std::map<std::string, Series> by;
    std::vector<double> s_values;
    for (const auto& r : csv.rows) {
        std::string name = r[c_est];
        if (kind == PlotKind::StepsizePanel) name += " SS=" + r[c_ss];
        Series& se = by[name];
        se.name = name;
        const double s = std::stod(r[c_s]);
        s_values.push_back(s);
        se.pts.push_back({s_axis_pos(s, min_pos), std::stod(r[c_mean]), std::stod(r[c_err])});
    }
    std::vector<Series> series;
    for (auto& [k, s] : by) {
        std::sort(s.pts.begin(), s.pts.end(), [](const Point& a, const Point& b) { return a.x < b.x; });
        series.push_back(std::move(s));
    }
    std::sort(s_values.begin(), s_values.end());
    s_values.erase(std::unique(s_values.begin(), s_values.end()), s_values.end());
    std::vector<std::pair<double, std::string>> ticks;
    for (double s : s_values) ticks.push_back({s_axis_pos(s, min_pos), fmt(s)});
    return render_chart(series, ticks, "lateral connections s (%)", "alignment (%)", /*log_y=*/false);
}

}  // namespace colnn
