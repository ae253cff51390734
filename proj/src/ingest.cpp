#include "cimpact/ingest.hpp"

#include "cimpact/csv.hpp"
#include "cimpact/errors.hpp"

#include <httplib.h>

#include <algorithm>
#include <cctype>
#include <charconv>
#include <chrono>
#include <istream>
#include <ostream>
#include <sstream>
#include <thread>

namespace cimpact {

namespace {

std::string normalize_header(const std::string& name) {
    std::string out;
    for (unsigned char c : name)
        if (!std::isspace(c) && c != '_')
            out += static_cast<char>(std::tolower(c));
    return out;
}

std::size_t find_column(const CsvRow& header, const std::string& normalized,
                        bool required) {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (normalize_header(header[i]) == normalized)
            return i;
    if (required)
        throw MissingColumn(normalized);
    return static_cast<std::size_t>(-1);
}

std::string field_at(const CsvRow& row, std::size_t idx) {
    if (idx == static_cast<std::size_t>(-1) || idx >= row.size())
        return "";
    return trim(row[idx]);
}

std::optional<long> to_long(const std::string& s) {
    long value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        return std::nullopt;
    return value;
}

} // namespace

std::string ingest_report_json(const IngestReport& r) {
    std::ostringstream out;
    out << "{\"rows_read\":" << r.rows_read << ",\"rows_kept\":" << r.rows_kept
        << ",\"rows_skipped_malformed\":" << r.rows_skipped_malformed
        << ",\"rows_out_of_scope\":" << r.rows_out_of_scope << "}";
    return out.str();
}

std::pair<std::vector<ServiceRequest>, IngestReport>
parse_requests(std::istream& in, ParseMode mode) {
    CsvReader reader(in);
    CsvRow row;
    if (!reader.next(row))
        throw MissingColumn("uniquekey (empty input)");

    const std::size_t c_key = find_column(row, "uniquekey", true);
    const std::size_t c_date = find_column(row, "createddate", true);
    const std::size_t c_type = find_column(row, "complainttype", true);
    const std::size_t c_zip = find_column(row, "incidentzip", true);
    const std::size_t c_agency = find_column(row, "agency", false);
    const std::size_t c_descriptor = find_column(row, "descriptor", false);
    const std::size_t c_borough = find_column(row, "borough", false);

    std::vector<ServiceRequest> requests;
    IngestReport report;

    while (reader.next(row)) {
        ++report.rows_read;

        const std::string key = field_at(row, c_key);
        const std::string date_text = field_at(row, c_date);
        const std::string type = field_at(row, c_type);
        const auto date = parse_date(date_text);

        if (key.empty() || type.empty() || !date) {
            if (mode == ParseMode::Strict)
                throw MalformedRow("line " + std::to_string(reader.line()) +
                                   ": bad request row (key='" + key + "', date='" +
                                   date_text + "', type='" + type + "')");
            ++report.rows_skipped_malformed;
            continue;
        }

        const std::string zip = field_at(row, c_zip);
        if (!zip_is_valid(zip)) {
            // No zone of impact can be assigned; excluded, not an error.
            ++report.rows_out_of_scope;
            continue;
        }

        requests.push_back(ServiceRequest{key, *date, field_at(row, c_agency), type,
                                          field_at(row, c_descriptor), zip,
                                          field_at(row, c_borough)});
        ++report.rows_kept;
    }
    return {std::move(requests), report};
}

void write_requests(std::ostream& out, std::span<const ServiceRequest> requests) {
    out << "Unique Key,Created Date,Agency,Complaint Type,Descriptor,Incident Zip,Borough\n";
    for (const auto& r : requests) {
        out << csv_join({r.unique_key, format_date_mdy(r.created_date), r.agency,
                         r.complaint_type, r.descriptor, r.incident_zip, r.borough})
            << "\n";
    }
}

int parse_duration_months(const std::string& text) {
    std::istringstream in(text);
    std::vector<std::string> tokens;
    std::string tok;
    while (in >> tok)
        tokens.push_back(tok);

    auto unit_of = [](std::string t) -> std::optional<int> {
        std::transform(t.begin(), t.end(), t.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        if (t == "year" || t == "years")
            return 12;
        if (t == "month" || t == "months")
            return 1;
        return std::nullopt;
    };

    if (tokens.size() != 2 && tokens.size() != 4)
        throw MalformedDuration(text);

    int months = 0;
    bool seen_year = false, seen_month = false;
    for (std::size_t i = 0; i + 1 < tokens.size(); i += 2) {
        const auto n = to_long(tokens[i]);
        const auto unit = unit_of(tokens[i + 1]);
        if (!n || *n < 0 || !unit)
            throw MalformedDuration(text);
        if (*unit == 12) {
            if (seen_year || seen_month) // years must come first, at most once
                throw MalformedDuration(text);
            seen_year = true;
        } else {
            if (seen_month)
                throw MalformedDuration(text);
            seen_month = true;
        }
        months += static_cast<int>(*n) * *unit;
    }
    if (months < 1)
        throw MalformedDuration(text);
    return months;
}

std::vector<ConstructionProject> parse_projects(std::istream& in) {
    CsvReader reader(in);
    CsvRow row;
    if (!reader.next(row))
        throw MissingColumn("id (empty input)");

    std::size_t c_id = static_cast<std::size_t>(-1);
    for (std::size_t i = 0; i < row.size(); ++i) {
        const std::string n = normalize_header(row[i]);
        if (n == "id" || n == "#")
            c_id = i;
    }
    if (c_id == static_cast<std::size_t>(-1))
        throw MissingColumn("id");
    const std::size_t c_start = find_column(row, "start", true);
    const std::size_t c_duration = find_column(row, "duration", true);
    const std::size_t c_zip = find_column(row, "zip", true);

    std::vector<ConstructionProject> projects;
    while (reader.next(row)) {
        const std::string id_text = field_at(row, c_id);
        const auto id = to_long(id_text);
        if (!id || *id <= 0)
            throw MalformedRow("line " + std::to_string(reader.line()) +
                               ": project id must be a positive integer, got '" +
                               id_text + "'");
        const std::string start_text = field_at(row, c_start);
        const auto start = parse_date(start_text);
        if (!start)
            throw MalformedDate(start_text);
        const int duration = parse_duration_months(field_at(row, c_duration));
        const std::string zip = field_at(row, c_zip);
        if (!zip_is_valid(zip))
            throw MalformedRow("line " + std::to_string(reader.line()) +
                               ": project zip must be 5 digits, got '" + zip + "'");
        projects.push_back(ConstructionProject{static_cast<int>(*id), *start,
                                               duration, zip});
    }
    return projects;
}

void write_projects(std::ostream& out, std::span<const ConstructionProject> projects) {
    out << "id,start,duration,zip\n";
    for (const auto& p : projects) {
        const int years = p.duration_months / 12;
        const int months = p.duration_months % 12;
        std::string duration;
        if (years > 0)
            duration = std::to_string(years) + (years == 1 ? " year" : " years");
        if (months > 0) {
            if (!duration.empty())
                duration += ' ';
            duration += std::to_string(months) + (months == 1 ? " month" : " months");
        }
        out << csv_join({std::to_string(p.id), format_date_mdy(p.start_date),
                         duration, p.zip})
            << "\n";
    }
}

std::vector<ServiceRequest> filter_requests(std::span<const ServiceRequest> requests,
                                            const ConstructionProject& project,
                                            const AnalysisWindow& window) {
    std::vector<ServiceRequest> kept;
    for (const auto& r : requests) {
        if (r.incident_zip != project.zip)
            continue;
        if (!window.month_index(r.created_date))
            continue;
        kept.push_back(r);
    }
    return kept;
}

// -- open-data portal client -------------------------------------------------

namespace {

struct ParsedUrl {
    std::string origin; // scheme://host[:port]
    std::string path;   // starts with '/'
};

ParsedUrl parse_url(const std::string& url) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw NetworkError("bad endpoint URL: " + url);
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos)
        return {url, "/"};
    return {url.substr(0, path_start), url.substr(path_start)};
}

bool looks_like_csv(const httplib::Response& res) {
    if (!res.has_header("Content-Type"))
        return true; // permissive when the server does not say
    const std::string ct = res.get_header_value("Content-Type");
    return ct.find("csv") != std::string::npos ||
           ct.find("text/plain") != std::string::npos;
}

} // namespace

std::string fetch_remote(const std::string& url,
                         const std::vector<std::pair<std::string, std::string>>& filters,
                         const FetchOptions& options) {
    const ParsedUrl parsed = parse_url(url);
    httplib::Client client(parsed.origin);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(30, 0);

    std::vector<CsvRow> records; // header + data rows across pages
    std::size_t offset = 0;

    while (true) {
        httplib::Params params;
        for (const auto& [k, v] : filters)
            params.emplace(k, v);
        params.emplace(options.limit_param, std::to_string(options.page_size));
        params.emplace(options.offset_param, std::to_string(offset));
        const std::string target =
            httplib::append_query_params(parsed.path, params);

        httplib::Result res{nullptr, httplib::Error::Unknown};
        int backoff = options.backoff_ms;
        for (int attempt = 1; attempt <= options.max_attempts; ++attempt) {
            res = client.Get(target);
            const bool transient = !res || res->status >= 500;
            if (!transient)
                break;
            if (attempt == options.max_attempts) {
                std::ostringstream msg;
                msg << "fetch failed after " << options.max_attempts << " attempts: "
                    << url;
                if (res)
                    msg << " (HTTP " << res->status << ")";
                else
                    msg << " (" << httplib::to_string(res.error()) << ")";
                throw NetworkError(msg.str());
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
            backoff *= 2;
        }

        if (res->status != 200)
            throw NetworkError("HTTP " + std::to_string(res->status) + " from " + url);
        if (!looks_like_csv(*res))
            throw NonCsvResponse("endpoint returned '" +
                                 res->get_header_value("Content-Type") +
                                 "', expected CSV: " + url);

        const std::vector<CsvRow> page = csv_parse_all(res->body);
        if (page.empty())
            throw NonCsvResponse("page with no header from " + url);
        if (records.empty()) {
            records = page;
        } else {
            if (page.front() != records.front())
                throw NonCsvResponse("page header changed mid-fetch from " + url);
            records.insert(records.end(), page.begin() + 1, page.end());
        }

        const std::size_t page_rows = page.size() - 1;
        if (page_rows < static_cast<std::size_t>(options.page_size))
            break;
        offset += page_rows;
    }

    std::string out;
    for (const auto& rec : records) {
        out += csv_join(rec);
        out += '\n';
    }
    return out;
}

} // namespace cimpact
