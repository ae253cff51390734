#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cimpact {

using CsvRow = std::vector<std::string>;

/// Streaming RFC-4180-ish CSV reader: quoted fields may contain commas,
/// quotes and newlines; both LF and CRLF records are accepted. Lines whose
/// first character is '#' (outside a quoted field) carry artifact metadata
/// and are skipped. Blank lines are skipped.
class CsvReader {
public:
    explicit CsvReader(std::istream& in) : in_(in) {}

    /// Reads one record into `out`. Returns false at end of input.
    bool next(CsvRow& out);

    /// 1-based line number where the last record started.
    std::size_t line() const { return record_line_; }

private:
    std::istream& in_;
    std::size_t line_ = 0;
    std::size_t record_line_ = 0;
};

/// Field quoted only when it needs to be.
std::string csv_escape(const std::string& field);

/// Joins fields into one CSV record (no trailing newline).
std::string csv_join(const CsvRow& fields);

/// Collects every record of `text`. Convenience for tests and small files.
std::vector<CsvRow> csv_parse_all(const std::string& text);

std::string trim(const std::string& s);

/// Shortest decimal form that round-trips the double exactly (to_chars),
/// so CSV/JSON artifacts are byte-stable and lossless.
std::string format_double(double v);

/// Strict double parse of a whole field; throws MalformedRow with the line
/// number on anything else.
double parse_double_strict(const std::string& field, std::size_t line);

} // namespace cimpact
