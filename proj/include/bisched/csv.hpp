#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bisched {

/// Comma-separated table with a header row. Fields are unquoted; a
/// trailing '\r' is dropped from each line.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<long> line_numbers; // 1-based source line of each row

    /// Index of a header column, or -1.
    int column(const std::string& name) const;
    /// Like column() but throws ParseError when absent.
    int require_column(const std::string& name) const;
};

std::vector<std::string> split_csv_line(const std::string& line);

/// Reads header and rows. Rows are kept even when their width differs
/// from the header, so callers can reject them with a reason.
CsvTable read_csv(std::istream& in);
CsvTable load_csv(const std::string& path);

/// Shortest decimal text that reads back to the same double.
std::string format_number(double value);

/// Strict conversions: the whole field must be consumed.
bool parse_double(const std::string& field, double& out);
bool parse_long(const std::string& field, long& out);

/// Writes one line joined by commas and terminated by '\n'.
void write_csv_row(std::ostream& out, const std::vector<std::string>& fields);

}  // namespace bisched
