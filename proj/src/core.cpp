#include "cimpact/core.hpp"

#include "cimpact/csv.hpp"
#include "cimpact/errors.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <istream>

namespace cimpact {

namespace {

bool all_digits(std::string_view s) {
    if (s.empty())
        return false;
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isdigit(c) != 0; });
}

std::optional<int> to_int(std::string_view s) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
    if (ec != std::errc{} || ptr != s.data() + s.size())
        return std::nullopt;
    return value;
}

std::vector<std::string_view> split(std::string_view s, char sep) {
    std::vector<std::string_view> parts;
    std::size_t pos = 0;
    while (true) {
        std::size_t next = s.find(sep, pos);
        if (next == std::string_view::npos) {
            parts.push_back(s.substr(pos));
            break;
        }
        parts.push_back(s.substr(pos, next - pos));
        pos = next + 1;
    }
    return parts;
}

} // namespace

Date make_date(int year, unsigned month, unsigned day) {
    return Date{std::chrono::year{year}, std::chrono::month{month},
                std::chrono::day{day}};
}

std::optional<Date> parse_date(std::string_view text) {
    // drop a time-of-day suffix if present
    if (auto sp = text.find(' '); sp != std::string_view::npos)
        text = text.substr(0, sp);
    if (text.empty())
        return std::nullopt;

    int y;
    unsigned m, d;
    if (text.find('/') != std::string_view::npos) {
        auto parts = split(text, '/');
        if (parts.size() != 3 || !all_digits(parts[0]) || !all_digits(parts[1]) ||
            !all_digits(parts[2]))
            return std::nullopt;
        auto mm = to_int(parts[0]);
        auto dd = to_int(parts[1]);
        auto yy = to_int(parts[2]);
        if (!mm || !dd || !yy)
            return std::nullopt;
        if (parts[2].size() <= 2)
            y = *yy >= 70 ? 1900 + *yy : 2000 + *yy;
        else if (parts[2].size() == 4)
            y = *yy;
        else
            return std::nullopt;
        m = static_cast<unsigned>(*mm);
        d = static_cast<unsigned>(*dd);
    } else if (text.find('-') != std::string_view::npos) {
        auto parts = split(text, '-');
        if (parts.size() != 3 || parts[0].size() != 4 || !all_digits(parts[0]) ||
            !all_digits(parts[1]) || !all_digits(parts[2]))
            return std::nullopt;
        y = *to_int(parts[0]);
        m = static_cast<unsigned>(*to_int(parts[1]));
        d = static_cast<unsigned>(*to_int(parts[2]));
    } else {
        return std::nullopt;
    }

    Date date = make_date(y, m, d);
    if (!date.ok())
        return std::nullopt;
    return date;
}

std::string format_date_iso(Date d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", int(d.year()),
                  unsigned(d.month()), unsigned(d.day()));
    return buf;
}

std::string format_date_mdy(Date d) {
    int y = int(d.year());
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02u/%02u/%02d", unsigned(d.month()),
                  unsigned(d.day()), y % 100);
    return buf;
}

Date add_months_clamped(Date base, int delta_months) {
    auto ym = base.year() / base.month() + std::chrono::months{delta_months};
    Date shifted{ym.year(), ym.month(), base.day()};
    if (!shifted.ok())
        shifted = ym.year() / ym.month() / std::chrono::last;
    return shifted;
}

long days_between(Date a, Date b) {
    return (std::chrono::sys_days{b} - std::chrono::sys_days{a}).count();
}

Date add_days(Date d, long days) {
    return Date{std::chrono::sys_days{d} + std::chrono::days{days}};
}

bool zip_is_valid(std::string_view zip) {
    return zip.size() == 5 && all_digits(zip);
}

// -- AnalysisWindow ----------------------------------------------------------

AnalysisWindow::AnalysisWindow(Date start_date) {
    // Boundaries are all derived from the start date so month 13 begins
    // exactly at it, even when the anchor itself had to clamp.
    for (int j = 0; j <= kMonths; ++j)
        bounds_[j] = add_months_clamped(start_date, j - 12);
}

std::optional<int> AnalysisWindow::month_index(Date d) const {
    if (d < bounds_[0] || d >= bounds_[kMonths])
        return std::nullopt;
    auto it = std::upper_bound(bounds_.begin(), bounds_.end(), d);
    return static_cast<int>(it - bounds_.begin());
}

AnalysisWindow expand_window(const ConstructionProject& project) {
    return AnalysisWindow(project.start_date);
}

std::optional<int> month_index(Date d, const AnalysisWindow& window) {
    return window.month_index(d);
}

// -- taxonomy ----------------------------------------------------------------

std::string_view indicator_name(QoLIndicator q) {
    switch (q) {
    case QoLIndicator::Environment:
        return "Environment";
    case QoLIndicator::Waste:
        return "Waste";
    case QoLIndicator::Safety:
        return "Safety";
    case QoLIndicator::Transportation:
        return "Transportation";
    case QoLIndicator::Other:
        return "Other";
    }
    return "Other";
}

std::optional<QoLIndicator> parse_indicator(std::string_view name) {
    for (QoLIndicator q :
         {QoLIndicator::Environment, QoLIndicator::Waste, QoLIndicator::Safety,
          QoLIndicator::Transportation, QoLIndicator::Other}) {
        std::string_view n = indicator_name(q);
        if (n.size() == name.size() &&
            std::equal(n.begin(), n.end(), name.begin(), [](char a, char b) {
                return std::tolower(static_cast<unsigned char>(a)) ==
                       std::tolower(static_cast<unsigned char>(b));
            }))
            return q;
    }
    return std::nullopt;
}

Whitelist Whitelist::from_csv(std::istream& in) {
    CsvReader reader(in);
    CsvRow row;
    if (!reader.next(row))
        throw MissingColumn("complaint_type");
    if (row.size() < 2 || trim(row[0]) != "complaint_type" ||
        trim(row[1]) != "qol_indicator")
        throw MissingColumn("complaint_type,qol_indicator header");

    Whitelist wl;
    while (reader.next(row)) {
        if (row.size() < 2)
            throw MalformedRow("whitelist line " + std::to_string(reader.line()) +
                               ": expected 2 columns");
        std::string type = trim(row[0]);
        auto q = parse_indicator(trim(row[1]));
        if (type.empty() || !q)
            throw MalformedRow("whitelist line " + std::to_string(reader.line()) +
                               ": unknown indicator '" + trim(row[1]) + "'");
        wl.map_[type] = *q;
    }
    return wl;
}

std::optional<QoLIndicator> Whitelist::lookup(const std::string& complaint_type) const {
    auto it = map_.find(complaint_type);
    if (it == map_.end())
        return std::nullopt;
    return it->second;
}

bool Whitelist::contains(const std::string& complaint_type) const {
    return map_.count(complaint_type) != 0;
}

ComplaintCatalog ComplaintCatalog::from_types(std::vector<std::string> types) {
    std::sort(types.begin(), types.end());
    types.erase(std::unique(types.begin(), types.end()), types.end());
    ComplaintCatalog cat;
    cat.types_ = std::move(types);
    for (std::size_t i = 0; i < cat.types_.size(); ++i)
        cat.index_[cat.types_[i]] = i;
    return cat;
}

ComplaintCatalog ComplaintCatalog::observed(std::span<const ServiceRequest> requests) {
    std::vector<std::string> types;
    types.reserve(requests.size());
    for (const auto& r : requests)
        types.push_back(r.complaint_type);
    return from_types(std::move(types));
}

std::optional<std::size_t> ComplaintCatalog::index_of(const std::string& type) const {
    auto it = index_.find(type);
    if (it == index_.end())
        return std::nullopt;
    return it->second;
}

} // namespace cimpact
