#pragma once

#include <array>
#include <chrono>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace cimpact {

using Date = std::chrono::year_month_day;

Date make_date(int year, unsigned month, unsigned day);

/// Accepts M/D/YY, MM/DD/YYYY and ISO YYYY-MM-DD. Two-digit years pivot at
/// 70 (>= 70 is 19xx). Anything after the first space (a time of day in
/// some exports) is ignored.
std::optional<Date> parse_date(std::string_view text);

std::string format_date_iso(Date d);
/// MM/DD/YY with zero padding, the dialect of the project and request
/// tables. Only valid for years in the two-digit pivot range 1970-2069.
std::string format_date_mdy(Date d);

/// Calendar-month shift keeping the day of month, clamped to the last day
/// of the target month (01/31 + 1 month = 02/28 or 02/29).
Date add_months_clamped(Date base, int delta_months);

/// Whole days in the half-open interval [a, b).
long days_between(Date a, Date b);
Date add_days(Date d, long days);

// -- domain records --------------------------------------------------------

/// One 311 complaint record, reduced to the retained columns.
struct ServiceRequest {
    std::string unique_key;
    Date created_date{};
    std::string agency;
    std::string complaint_type;
    std::string descriptor;
    std::string incident_zip; // 5 decimal digits; empty when unknown
    std::string borough;
};

/// True iff `zip` is exactly five decimal digits.
bool zip_is_valid(std::string_view zip);

struct ConstructionProject {
    int id = 0;
    Date start_date{};
    int duration_months = 1;
    std::string zip;
};

/// The 24 analysis months around a project start: months 1-12 are the
/// baseline year before the start, month 13 begins exactly at the start
/// date. Boundaries keep the start day of month, clamping on short months.
class AnalysisWindow {
public:
    static constexpr int kMonths = 24;
    static constexpr int kFirstPostMonth = 13;

    explicit AnalysisWindow(Date start_date);

    Date anchor() const { return bounds_[0]; }
    /// Start (inclusive) of month t in 1..24.
    Date month_start(int t) const { return bounds_[t - 1]; }
    /// End (exclusive) of month t in 1..24.
    Date month_end(int t) const { return bounds_[t]; }

    /// Month index t in 1..24 containing `d`, or absent when out of window.
    std::optional<int> month_index(Date d) const;

private:
    std::array<Date, kMonths + 1> bounds_;
};

AnalysisWindow expand_window(const ConstructionProject& project);
std::optional<int> month_index(Date d, const AnalysisWindow& window);

// -- complaint taxonomy ------------------------------------------------------

enum class QoLIndicator { Environment, Waste, Safety, Transportation, Other };

std::string_view indicator_name(QoLIndicator q);
std::optional<QoLIndicator> parse_indicator(std::string_view name);

/// Complaint-type -> QoL-indicator mapping, shipped as a data file so other
/// cities can plug in their own taxonomy.
class Whitelist {
public:
    /// CSV with header `complaint_type,qol_indicator`.
    static Whitelist from_csv(std::istream& in);

    std::optional<QoLIndicator> lookup(const std::string& complaint_type) const;
    bool contains(const std::string& complaint_type) const;
    std::size_t size() const { return map_.size(); }
    const std::map<std::string, QoLIndicator>& entries() const { return map_; }

private:
    std::map<std::string, QoLIndicator> map_;
};

/// Dense, ordered index over the distinct complaint types of a run.
class ComplaintCatalog {
public:
    ComplaintCatalog() = default;
    /// Deduplicates and sorts, so catalogs are canonical for a given input.
    static ComplaintCatalog from_types(std::vector<std::string> types);
    static ComplaintCatalog observed(std::span<const ServiceRequest> requests);

    std::size_t size() const { return types_.size(); }
    const std::string& type_at(std::size_t i) const { return types_[i]; }
    std::optional<std::size_t> index_of(const std::string& type) const;
    const std::vector<std::string>& types() const { return types_; }

private:
    std::vector<std::string> types_;
    std::map<std::string, std::size_t> index_;
};

} // namespace cimpact
