#include <cmath>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "battdiag/csv.hpp"
#include "doctest.h"
#include "test_util.hpp"

using namespace battdiag;

TEST_CASE("format/parse round trip is bit exact") {
    const double values[] = {0.0,       -0.0,   1.0 / 3.0,        1e-300,
                             1e300,     -2.5e-17, 3.141592653589793, 294.57452196,
                             -1.0e-9,   123456789.123456789};
    for (double v : values) {
        const std::string s = csv::format_double(v);
        const double back = csv::parse_double(s, "test", 1);
        CHECK(std::memcmp(&back, &v, sizeof v) == 0);
    }
    CHECK(std::signbit(csv::parse_double(csv::format_double(-0.0), "t", 1)));
}

TEST_CASE("parse_double rejects junk with context and line number") {
    CHECK_THROWS_AS(csv::parse_double("abc", "col q", 7), ParseError);
    CHECK_THROWS_AS(csv::parse_double("", "col q", 7), ParseError);
    CHECK_THROWS_AS(csv::parse_double("1.5x", "col q", 7), ParseError);
    try {
        csv::parse_double("oops", "col q", 7);
        FAIL("expected throw");
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("col q") != std::string::npos);
        CHECK(msg.find("7") != std::string::npos);
        CHECK(msg.find("oops") != std::string::npos);
    }
}

TEST_CASE("parse_int accepts integers only") {
    CHECK(csv::parse_int("42", "t", 1) == 42);
    CHECK(csv::parse_int("-17", "t", 1) == -17);
    CHECK_THROWS_AS(csv::parse_int("4.2", "t", 1), ParseError);
    CHECK_THROWS_AS(csv::parse_int("", "t", 1), ParseError);
    CHECK_THROWS_AS(csv::parse_int("12a", "t", 1), ParseError);
}

TEST_CASE("write_file then read_file round trips") {
    TempDir tmp;
    const std::string path = tmp.file("table.csv");
    const std::vector<std::string> header = {"a", "b", "c"};
    const std::vector<std::vector<std::string>> rows = {
        {"1", csv::format_double(1.0 / 7.0), "x"},
        {"2", csv::format_double(-0.0), "y"},
    };
    csv::write_file(path, header, rows);

    const csv::Table t = csv::read_file(path, header);
    REQUIRE(t.rows.size() == 2);
    CHECK(t.header == header);
    CHECK(t.rows[0].fields[1] == csv::format_double(1.0 / 7.0));
    CHECK(t.rows[1].fields[2] == "y");
    CHECK(t.rows[0].line_number == 2);
    CHECK(t.rows[1].line_number == 3);
}

TEST_CASE("read_file skips blank lines and trims whitespace") {
    TempDir tmp;
    const std::string path = tmp.file("padded.csv");
    {
        std::ofstream out(path);
        out << "a, b ,c\n\n  \n 1,2 ,3\n";
    }
    const csv::Table t = csv::read_file(path);
    CHECK(t.header == std::vector<std::string>{"a", "b", "c"});
    REQUIRE(t.rows.size() == 1);
    CHECK(t.rows[0].fields == std::vector<std::string>{"1", "2", "3"});
    CHECK(t.rows[0].line_number == 4);
}

TEST_CASE("ragged row reports its line") {
    TempDir tmp;
    const std::string path = tmp.file("ragged.csv");
    {
        std::ofstream out(path);
        out << "a,b\n1,2\n3\n";
    }
    try {
        csv::read_file(path);
        FAIL("expected throw");
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 3") != std::string::npos);
    }
}

TEST_CASE("header mismatch names both headers") {
    TempDir tmp;
    const std::string path = tmp.file("hdr.csv");
    csv::write_file(path, {"x", "y"}, {});
    try {
        csv::read_file(path, {"x", "z"});
        FAIL("expected throw");
    } catch (const ParseError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("x,y") != std::string::npos);
        CHECK(msg.find("x,z") != std::string::npos);
    }
}

TEST_CASE("missing file and missing header both fail") {
    TempDir tmp;
    CHECK_THROWS_AS(csv::read_file(tmp.file("nope.csv")), ParseError);
    const std::string path = tmp.file("empty.csv");
    { std::ofstream out(path); }
    CHECK_THROWS_AS(csv::read_file(path), ParseError);
}

TEST_CASE("join concatenates with commas") {
    CHECK(csv::join({}) == "");
    CHECK(csv::join({"a"}) == "a");
    CHECK(csv::join({"a", "b", "c"}) == "a,b,c");
}
