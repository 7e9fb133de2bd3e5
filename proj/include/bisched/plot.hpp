#pragma once

#include "bisched/csv.hpp"

#include <string>
#include <vector>

namespace bisched {

struct SeriesPoint {
    double x = 0.0;
    double mean = 0.0;
    double lower = 0.0; // mean - 1.96 sd / sqrt(n)
    double upper = 0.0;
    int samples = 0;
};

struct PlotSeries {
    std::string name;
    std::vector<SeriesPoint> points; // sorted by x
};

/// Groups rows by `group_column` (one series per distinct value, a single
/// series when the column is empty or absent) and aggregates the values of
/// `y_column` over rows sharing the same x. sd is the sample standard
/// deviation; a single sample gives a zero-width band.
std::vector<PlotSeries> aggregate_series(const CsvTable& table, const std::string& x_column,
                                         const std::string& y_column, const std::string& group_column = "policy");

struct PlotStyle {
    std::string title;
    std::string x_label = "t";
    std::string y_label;
    int width = 640;
    int height = 400;
};

/// Standalone SVG text: one polyline per series with a shaded band.
std::string render_svg(const std::vector<PlotSeries>& series, const PlotStyle& style);

/// Reads a metrics CSV and writes an SVG of `y_column` against `x_column`.
/// Throws ParseError on empty or malformed input; no file is written then.
void emit_plot(const std::string& csv_path, const std::string& svg_path, const std::string& y_column,
               const std::string& x_column = "t", const std::string& group_column = "policy");

}  // namespace bisched
