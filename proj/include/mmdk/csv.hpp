#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace mmdk::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    // Index of a header column, or -1.
    int column(const std::string& name) const;
    // Like column() but throws FormatError naming the file context.
    std::size_t require(const std::string& name) const;
};

// RFC 4180 subset: comma separated, double-quoted fields with "" escapes,
// LF or CRLF line endings. Every row must have the header's width.
Table parse(std::istream& in);
Table read(const std::filesystem::path& path);

std::string quote(const std::string& field);
void write_row(std::ostream& out, const std::vector<std::string>& fields);

// Shortest decimal representation that round-trips a double.
std::string format_double(double value);
double parse_double(const std::string& text);

}  // namespace mmdk::csv
