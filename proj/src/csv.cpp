#include "battdiag/csv.hpp"

#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>

namespace battdiag::csv {

namespace {

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    for (;;) {
        std::size_t pos = line.find(',', start);
        if (pos == std::string::npos) {
            out.push_back(trim(line.substr(start)));
            break;
        }
        out.push_back(trim(line.substr(start, pos - start)));
        start = pos + 1;
    }
    return out;
}

}  // namespace

std::string format_double(double x) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", x);
    return buf;
}

double parse_double(const std::string& s, const std::string& context,
                    int line_number) {
    errno = 0;
    char* end = nullptr;
    double v = std::strtod(s.c_str(), &end);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE) {
        throw ParseError(context + ": line " + std::to_string(line_number) +
                         ": not a number: '" + s + "'");
    }
    return v;
}

long long parse_int(const std::string& s, const std::string& context,
                    int line_number) {
    errno = 0;
    char* end = nullptr;
    long long v = std::strtoll(s.c_str(), &end, 10);
    if (end == s.c_str() || *end != '\0' || errno == ERANGE) {
        throw ParseError(context + ": line " + std::to_string(line_number) +
                         ": not an integer: '" + s + "'");
    }
    return v;
}

Table read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path + ": cannot open file");

    Table table;
    std::string line;
    int line_number = 0;
    while (std::getline(in, line)) {
        ++line_number;
        if (trim(line).empty()) continue;
        if (table.header.empty()) {
            table.header = split_line(line);
            continue;
        }
        Row row;
        row.fields = split_line(line);
        row.line_number = line_number;
        if (row.fields.size() != table.header.size()) {
            throw ParseError(path + ": line " + std::to_string(line_number) +
                             ": expected " + std::to_string(table.header.size()) +
                             " fields, got " + std::to_string(row.fields.size()));
        }
        table.rows.push_back(std::move(row));
    }
    if (table.header.empty()) throw ParseError(path + ": missing header row");
    return table;
}

Table read_file(const std::string& path,
                const std::vector<std::string>& expected_header) {
    Table table = read_file(path);
    if (table.header != expected_header) {
        throw ParseError(path + ": unexpected header '" + join(table.header) +
                         "', expected '" + join(expected_header) + "'");
    }
    return table;
}

void write_file(const std::string& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows) {
    std::ofstream out(path);
    if (!out) throw Error(path + ": cannot open file for writing");
    out << join(header) << '\n';
    for (const auto& row : rows) out << join(row) << '\n';
    if (!out) throw Error(path + ": write failed");
}

std::string join(const std::vector<std::string>& fields) {
    std::string s;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) s += ',';
        s += fields[i];
    }
    return s;
}

}  // namespace battdiag::csv
