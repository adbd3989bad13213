#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "battdiag/common.hpp"

// Minimal CSV handling for the fixed, comma-separated, unquoted formats this
// project emits. Doubles are printed with 17 significant digits so every
// emitted file parses back to bit-identical values.
namespace battdiag::csv {

// One parsed line, split on commas, whitespace-trimmed.
struct Row {
    std::vector<std::string> fields;
    int line_number = 0;  // 1-based position in the file
};

struct Table {
    std::vector<std::string> header;
    std::vector<Row> rows;
};

std::string format_double(double x);
double parse_double(const std::string& s, const std::string& context,
                    int line_number);
long long parse_int(const std::string& s, const std::string& context,
                    int line_number);

// Reads the whole file; throws ParseError with file/line context on
// structural problems (missing header, ragged rows).
Table read_file(const std::string& path);

// expected_header is matched exactly; mismatch names both headers.
Table read_file(const std::string& path,
                const std::vector<std::string>& expected_header);

void write_file(const std::string& path, const std::vector<std::string>& header,
                const std::vector<std::vector<std::string>>& rows);

std::string join(const std::vector<std::string>& fields);

}  // namespace battdiag::csv
