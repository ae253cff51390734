#pragma once

#include "cimpact/core.hpp"

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace cimpact {

/// Per-run ingest accounting. rows_read = rows_kept + rows_skipped_malformed
/// + rows_out_of_scope always holds.
struct IngestReport {
    std::size_t rows_read = 0;
    std::size_t rows_kept = 0;
    std::size_t rows_skipped_malformed = 0;
    std::size_t rows_out_of_scope = 0;
};

std::string ingest_report_json(const IngestReport& report);

enum class ParseMode {
    Strict,  ///< first malformed row aborts (fixtures)
    Lenient, ///< malformed rows are skipped and counted (bulk exports)
};

/// Parses a 311-export CSV. The header must name at least Unique Key,
/// Created Date, Complaint Type and Incident Zip (case and spacing are
/// ignored); every other column is dropped. Rows with a missing or
/// malformed zip have no zone of impact and are counted out of scope.
std::pair<std::vector<ServiceRequest>, IngestReport>
parse_requests(std::istream& in, ParseMode mode);

/// Serializes requests in the export dialect (Table 2 columns). Parsing the
/// result reproduces the retained fields exactly.
void write_requests(std::ostream& out, std::span<const ServiceRequest> requests);

/// Duration text like "2 years 6 months", "1 year" or "7 months", in months.
int parse_duration_months(const std::string& text);

/// Parses the project table (columns id, start, duration, zip). Always
/// strict: these files are 27 rows, not 16 million.
std::vector<ConstructionProject> parse_projects(std::istream& in);

void write_projects(std::ostream& out, std::span<const ConstructionProject> projects);

/// Requests in the project's zip whose date falls inside the window.
std::vector<ServiceRequest> filter_requests(std::span<const ServiceRequest> requests,
                                            const ConstructionProject& project,
                                            const AnalysisWindow& window);

// -- open-data portal client -------------------------------------------------

struct FetchOptions {
    int page_size = 1000;
    int max_attempts = 3;    ///< per page, on transient failures
    int backoff_ms = 100;    ///< first retry delay, doubled each attempt
    std::string limit_param = "$limit";
    std::string offset_param = "$offset";
};

/// Pages through an offset/limit CSV endpoint and returns the concatenated
/// result with a single header. Retries transient failures (connection
/// errors, 5xx) with exponential backoff; 4xx and non-CSV bodies fail fast.
std::string fetch_remote(const std::string& url,
                         const std::vector<std::pair<std::string, std::string>>& filters,
                         const FetchOptions& options = {});

} // namespace cimpact
