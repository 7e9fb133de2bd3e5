#include "bisched/csv.hpp"

#include "bisched/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>

namespace bisched {

int CsvTable::column(const std::string& name) const {
    for (std::size_t k = 0; k < header.size(); ++k)
        if (header[k] == name) return static_cast<int>(k);
    return -1;
}

int CsvTable::require_column(const std::string& name) const {
    const int k = column(name);
    if (k < 0) throw ParseError("CSV is missing column '" + name + "'");
    return k;
}

std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string::npos) {
            fields.push_back(line.substr(start));
            return fields;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

CsvTable read_csv(std::istream& in) {
    CsvTable table;
    std::string line;
    long number = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!have_header) {
            if (line.empty()) throw ParseError("CSV header row is empty");
            table.header = split_csv_line(line);
            have_header = true;
            continue;
        }
        if (line.empty()) continue;
        table.rows.push_back(split_csv_line(line));
        table.line_numbers.push_back(number);
    }
    if (!have_header) throw ParseError("CSV input is empty");
    return table;
}

CsvTable load_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open '" + path + "'");
    try {
        return read_csv(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what());
    }
}

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    char buffer[64];
    const auto result = std::to_chars(buffer, buffer + sizeof buffer, value);
    return std::string(buffer, result.ptr);
}

bool parse_double(const std::string& field, double& out) {
    if (field.empty()) return false;
    const char* end = field.data() + field.size();
    const auto result = std::from_chars(field.data(), end, out);
    return result.ec == std::errc() && result.ptr == end;
}

bool parse_long(const std::string& field, long& out) {
    if (field.empty()) return false;
    const char* end = field.data() + field.size();
    const auto result = std::from_chars(field.data(), end, out);
    return result.ec == std::errc() && result.ptr == end;
}

void write_csv_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t k = 0; k < fields.size(); ++k) {
        if (k) out << ',';
        out << fields[k];
    }
    out << '\n';
}

}  // namespace bisched
