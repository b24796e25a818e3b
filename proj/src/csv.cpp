#include "mmdk/csv.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "mmdk/error.hpp"

namespace mmdk::csv {

int Table::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return static_cast<int>(i);
    return -1;
}

std::size_t Table::require(const std::string& name) const {
    const int c = column(name);
    if (c < 0) throw FormatError("csv: missing required column '" + name + "'");
    return static_cast<std::size_t>(c);
}

namespace {

// Reads one record; returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields, std::size_t& line_no) {
    fields.clear();
    if (in.peek() == std::char_traits<char>::eof()) return false;
    std::string field;
    bool quoted = false;
    bool any = false;
    for (;;) {
        const int c = in.get();
        if (c == std::char_traits<char>::eof()) {
            if (quoted) throw FormatError("csv: unterminated quote at line " + std::to_string(line_no));
            break;
        }
        any = true;
        if (quoted) {
            if (c == '"') {
                if (in.peek() == '"') {
                    field.push_back('"');
                    in.get();
                } else {
                    quoted = false;
                }
            } else {
                if (c == '\n') ++line_no;
                field.push_back(static_cast<char>(c));
            }
            continue;
        }
        if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(std::move(field));
            field.clear();
        } else if (c == '\r') {
            if (in.peek() == '\n') in.get();
            break;
        } else if (c == '\n') {
            break;
        } else {
            field.push_back(static_cast<char>(c));
        }
    }
    ++line_no;
    fields.push_back(std::move(field));
    return any;
}

}  // namespace

Table parse(std::istream& in) {
    Table table;
    std::size_t line_no = 1;
    if (!read_record(in, table.header, line_no)) throw FormatError("csv: empty input");
    if (!table.header.empty() && table.header[0].starts_with("\xEF\xBB\xBF"))
        table.header[0].erase(0, 3);
    std::vector<std::string> fields;
    while (read_record(in, fields, line_no)) {
        if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
        if (fields.size() != table.header.size())
            throw FormatError("csv: line " + std::to_string(line_no - 1) + " has " +
                              std::to_string(fields.size()) + " fields, expected " +
                              std::to_string(table.header.size()));
        table.rows.push_back(fields);
    }
    return table;
}

Table read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("csv: cannot open " + path.string());
    try {
        return parse(in);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::string quote(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << quote(fields[i]);
    }
    out << '\n';
}

std::string format_double(double value) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, value);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& text) {
    double value = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    while (first < last && *first == ' ') ++first;
    while (last > first && last[-1] == ' ') --last;
    if (first < last && *first == '+') ++first;
    const auto res = std::from_chars(first, last, value);
    if (res.ec != std::errc() || res.ptr != last)
        throw FormatError("not a number: '" + text + "'");
    return value;
}

}  // namespace mmdk::csv
