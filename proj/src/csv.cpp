#include "cimpact/csv.hpp"

#include "cimpact/errors.hpp"

#include <charconv>
#include <istream>
#include <sstream>

namespace cimpact {

bool CsvReader::next(CsvRow& out) {
    out.clear();
    std::string field;
    bool in_quotes = false;
    bool started = false;     // any character of this record consumed
    bool field_open = false;  // a field is being accumulated

    int ci;
    while ((ci = in_.get()) != std::char_traits<char>::eof()) {
        char c = static_cast<char>(ci);
        if (!started) {
            if (c == '\n') {
                ++line_;
                continue; // blank line
            }
            if (c == '\r')
                continue;
            if (c == '#') { // metadata/comment line
                ++line_;
                while ((ci = in_.get()) != std::char_traits<char>::eof() &&
                       static_cast<char>(ci) != '\n') {
                }
                continue;
            }
            started = true;
            record_line_ = line_ + 1;
        }

        if (in_quotes) {
            if (c == '"') {
                if (in_.peek() == '"') {
                    in_.get();
                    field += '"';
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n')
                    ++line_;
                field += c;
            }
            continue;
        }

        switch (c) {
        case '"':
            in_quotes = true;
            field_open = true;
            break;
        case ',':
            out.push_back(std::move(field));
            field.clear();
            field_open = false;
            break;
        case '\r':
            break;
        case '\n':
            ++line_;
            out.push_back(std::move(field));
            return true;
        default:
            field += c;
            field_open = true;
            break;
        }
    }

    if (!started)
        return false;
    (void)field_open;
    out.push_back(std::move(field)); // final record without trailing newline
    return true;
}

std::string csv_escape(const std::string& field) {
    // a bare leading '#' would read back as a metadata comment line
    bool needs_quotes = field.find_first_of(",\"\n\r") != std::string::npos ||
                        (!field.empty() && field[0] == '#');
    if (!needs_quotes)
        return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"')
            out += '"';
        out += c;
    }
    out += '"';
    return out;
}

std::string csv_join(const CsvRow& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i)
            out += ',';
        out += csv_escape(fields[i]);
    }
    return out;
}

std::vector<CsvRow> csv_parse_all(const std::string& text) {
    std::istringstream in(text);
    CsvReader reader(in);
    std::vector<CsvRow> rows;
    CsvRow row;
    while (reader.next(row))
        rows.push_back(row);
    return rows;
}

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t");
    if (b == std::string::npos)
        return "";
    std::size_t e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, ptr);
}

double parse_double_strict(const std::string& field, std::size_t line) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc{} || ptr != field.data() + field.size())
        throw MalformedRow("line " + std::to_string(line) +
                           ": expected a number, got '" + field + "'");
    return v;
}

} // namespace cimpact
