#include "bisched/plot.hpp"

#include "bisched/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace bisched {

namespace {

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& text) {
    std::string out;
    for (char c : text) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

std::string fixed(double v) {
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(2);
    s << v;
    return s.str();
}

std::string tick_label(double v) {
    std::ostringstream s;
    s << std::setprecision(4) << v;
    return s.str();
}

// Roughly five round tick values covering [lo, hi].
std::vector<double> ticks(double lo, double hi) {
    const double span = hi - lo;
    const double raw = span / 5.0;
    const double magnitude = std::pow(10.0, std::floor(std::log10(raw)));
    double step = magnitude;
    for (double m : {1.0, 2.0, 5.0, 10.0})
        if (m * magnitude >= raw) {
            step = m * magnitude;
            break;
        }
    std::vector<double> out;
    for (double v = std::ceil(lo / step) * step; v <= hi + 1e-9 * span; v += step) out.push_back(v == 0.0 ? 0.0 : v);
    return out;
}

}  // namespace

std::vector<PlotSeries> aggregate_series(const CsvTable& table, const std::string& x_column,
                                         const std::string& y_column, const std::string& group_column) {
    if (table.rows.empty()) throw ParseError("plot: CSV has no data rows");
    const int xc = table.require_column(x_column);
    const int yc = table.require_column(y_column);
    const int gc = group_column.empty() ? -1 : table.column(group_column);

    std::map<std::string, std::map<double, std::vector<double>>> groups;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const auto& row = table.rows[r];
        if (row.size() != table.header.size())
            throw ParseError("plot: line " + std::to_string(table.line_numbers[r]) + " has the wrong number of fields");
        double x = 0.0, y = 0.0;
        if (!parse_double(row[xc], x) || !parse_double(row[yc], y) || !std::isfinite(x) || !std::isfinite(y))
            throw ParseError("plot: line " + std::to_string(table.line_numbers[r]) + " has a non-numeric value");
        groups[gc >= 0 ? row[gc] : y_column][x].push_back(y);
    }

    std::vector<PlotSeries> out;
    for (const auto& [name, by_x] : groups) {
        PlotSeries s;
        s.name = name;
        for (const auto& [x, ys] : by_x) {
            const double n = static_cast<double>(ys.size());
            double mean = 0.0;
            for (double y : ys) mean += y;
            mean /= n;
            double half = 0.0;
            if (ys.size() > 1) {
                double ss = 0.0;
                for (double y : ys) ss += (y - mean) * (y - mean);
                half = 1.96 * std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
            }
            s.points.push_back({x, mean, mean - half, mean + half, static_cast<int>(ys.size())});
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::string render_svg(const std::vector<PlotSeries>& series, const PlotStyle& style) {
    if (series.empty()) throw ValidationError("plot: nothing to draw");
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : series)
        for (const auto& p : s.points) {
            x0 = std::min(x0, p.x);
            x1 = std::max(x1, p.x);
            y0 = std::min(y0, p.lower);
            y1 = std::max(y1, p.upper);
        }
    if (!(x0 <= x1)) throw ValidationError("plot: series have no points");
    if (x1 == x0) x1 = x0 + 1.0;
    if (y1 == y0) {
        y0 -= 0.5;
        y1 += 0.5;
    }

    const double left = 70, right = 20, top = 40, bottom = 50;
    const double w = style.width - left - right;
    const double h = style.height - top - bottom;
    auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * w; };
    auto py = [&](double y) { return top + (y1 - y) / (y1 - y0) * h; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << style.width << "\" height=\"" << style.height
        << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    if (!style.title.empty())
        svg << "<text x=\"" << style.width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">"
            << escape(style.title) << "</text>\n";

    svg << "<g stroke=\"black\" fill=\"none\">\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << top + h << "\" x2=\"" << left + w << "\" y2=\"" << top + h
        << "\"/>\n";
    svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + h << "\"/>\n";
    svg << "</g>\n";
    for (double v : ticks(x0, x1))
        svg << "<text x=\"" << fixed(px(v)) << "\" y=\"" << top + h + 16 << "\" text-anchor=\"middle\">"
            << tick_label(v) << "</text>\n";
    for (double v : ticks(y0, y1))
        svg << "<text x=\"" << left - 6 << "\" y=\"" << fixed(py(v) + 4) << "\" text-anchor=\"end\">" << tick_label(v)
            << "</text>\n";
    svg << "<text class=\"x-label\" x=\"" << left + w / 2 << "\" y=\"" << style.height - 10
        << "\" text-anchor=\"middle\">" << escape(style.x_label) << "</text>\n";
    svg << "<text class=\"y-label\" x=\"16\" y=\"" << top + h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 "
        << top + h / 2 << ")\">" << escape(style.y_label) << "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const auto& s = series[k];
        const char* colour = kPalette[k % std::size(kPalette)];
        svg << "<polygon class=\"band\" fill=\"" << colour << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
        for (const auto& p : s.points) svg << fixed(px(p.x)) << ',' << fixed(py(p.upper)) << ' ';
        for (auto it = s.points.rbegin(); it != s.points.rend(); ++it)
            svg << fixed(px(it->x)) << ',' << fixed(py(it->lower)) << ' ';
        svg << "\"/>\n";
        svg << "<polyline class=\"mean\" fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& p : s.points) svg << fixed(px(p.x)) << ',' << fixed(py(p.mean)) << ' ';
        svg << "\"/>\n";
        svg << "<text x=\"" << left + w - 4 << "\" y=\"" << top + 14 + 16 * k << "\" text-anchor=\"end\" fill=\""
            << colour << "\">" << escape(s.name) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

void emit_plot(const std::string& csv_path, const std::string& svg_path, const std::string& y_column,
               const std::string& x_column, const std::string& group_column) {
    const CsvTable table = load_csv(csv_path);
    PlotStyle style;
    style.title = y_column;
    style.x_label = x_column;
    style.y_label = y_column;
    const std::string svg = render_svg(aggregate_series(table, x_column, y_column, group_column), style);
    std::ofstream out(svg_path, std::ios::binary);
    if (!out) throw Error("cannot write '" + svg_path + "'");
    out << svg;
}

}  // namespace bisched
