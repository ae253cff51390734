#include "cimpact/features.hpp"

#include "cimpact/csv.hpp"
#include "cimpact/errors.hpp"
#include "cimpact/ingest.hpp"
#include "cimpact/models.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <ostream>

namespace cimpact {

std::int64_t MonthlySeries::pre_total() const {
    std::int64_t s = 0;
    for (int t = 1; t <= 12; ++t)
        s += count_at(t);
    return s;
}

std::int64_t MonthlySeries::post_total() const {
    std::int64_t s = 0;
    for (int t = 13; t <= 24; ++t)
        s += count_at(t);
    return s;
}

double MonthlySeries::pre_slope() const {
    // OLS slope over (m, counts[m]) for m = 1..12; sum of (m - 6.5)^2 is 143.
    const double mean_m = 6.5;
    double cov = 0.0;
    for (int m = 1; m <= 12; ++m)
        cov += (m - mean_m) * static_cast<double>(count_at(m));
    return cov / 143.0;
}

std::vector<MonthlySeries> aggregate_monthly(std::span<const ServiceRequest> filtered,
                                             const ConstructionProject& project,
                                             const AnalysisWindow& window,
                                             const ComplaintCatalog& catalog) {
    std::vector<MonthlySeries> out(catalog.size());
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        out[i].project_id = project.id;
        out[i].type_index = i;
    }
    for (const auto& r : filtered) {
        const auto idx = catalog.index_of(r.complaint_type);
        if (!idx)
            continue; // type outside the catalog carries no index
        const auto t = window.month_index(r.created_date);
        if (!t)
            continue; // precondition: filtered to the window
        ++out[*idx].counts[static_cast<std::size_t>(*t - 1)];
    }
    return out;
}

std::vector<ProjectSeries> build_project_series(std::span<const ServiceRequest> requests,
                                                std::span<const ConstructionProject> projects,
                                                const ComplaintCatalog& catalog) {
    std::vector<ProjectSeries> out;
    out.reserve(projects.size());
    for (const auto& p : projects) {
        AnalysisWindow window = expand_window(p);
        auto filtered = filter_requests(requests, p, window);
        out.push_back(ProjectSeries{p, window,
                                    aggregate_monthly(filtered, p, window, catalog)});
    }
    return out;
}

double complaint_ratio(std::span<const std::int64_t> counts_at_month, std::size_t i,
                       double alpha) {
    const std::size_t n_types = counts_at_month.size();
    if (n_types == 0 || i >= n_types)
        throw Error("complaint_ratio: type index out of range");
    const double numerator = static_cast<double>(counts_at_month[i]) + alpha;
    if (numerator <= 0.0)
        throw UndefinedRatio("complaint ratio undefined: zero count without smoothing");
    double total = 0.0;
    for (std::int64_t c : counts_at_month)
        total += static_cast<double>(c) + alpha;
    const double mean_count = total / static_cast<double>(n_types);
    return std::log(numerator / mean_count);
}

std::string_view target_kind_name(TargetKind k) {
    return k == TargetKind::Count ? "count" : "log_ratio";
}

TargetKind parse_target_kind(std::string_view name) {
    if (name == "count")
        return TargetKind::Count;
    if (name == "log_ratio" || name == "ratio")
        return TargetKind::LogRatio;
    throw DataError("unknown target kind: '" + std::string(name) + "'");
}

Dataset build_dataset(std::span<const ProjectSeries> projects,
                      const ComplaintCatalog& catalog,
                      std::span<const std::size_t> selected_types,
                      TargetKind target_kind, double alpha) {
    if (selected_types.empty())
        throw EmptyDataset("no selected complaint types");

    // dense category codes over the distinct zips, in sorted order
    std::map<std::string, double> zip_code;
    for (const auto& ps : projects)
        zip_code.emplace(ps.project.zip, 0.0);
    {
        double code = 0.0;
        for (auto& [zip, c] : zip_code)
            c = code++;
    }

    Dataset ds;
    ds.feature_names = {"duration_months", "zip_code",   "month_offset",
                        "calendar_month",  "complaint_type", "pre_mean",
                        "pre_total",       "pre_slope"};
    ds.target_kind = target_kind;
    ds.x.n_cols = ds.feature_names.size();

    std::vector<std::int64_t> month_counts(catalog.size());
    for (const auto& ps : projects) {
        for (int t = 13; t <= 24; ++t) {
            for (std::size_t j = 0; j < catalog.size(); ++j)
                month_counts[j] = ps.series[j].count_at(t);
            for (std::size_t type : selected_types) {
                const MonthlySeries& s = ps.series[type];
                double target;
                if (target_kind == TargetKind::Count) {
                    target = static_cast<double>(s.count_at(t));
                } else {
                    try {
                        target = complaint_ratio(month_counts, type, alpha);
                    } catch (const UndefinedRatio&) {
                        continue; // row dropped
                    }
                }
                const double row[8] = {
                    static_cast<double>(ps.project.duration_months),
                    zip_code.at(ps.project.zip),
                    static_cast<double>(t - 12),
                    static_cast<double>(unsigned(ps.window.month_start(t).month())),
                    static_cast<double>(type + 1),
                    s.pre_mean(),
                    static_cast<double>(s.pre_total()),
                    s.pre_slope(),
                };
                ds.x.push_row(row);
                ds.targets.push_back(target);
                ds.keys.push_back(RowKey{ps.project.id, type, t});
            }
        }
    }
    if (ds.n_rows() == 0)
        throw EmptyDataset("every candidate row was dropped");
    return ds;
}

// -- scaler --------------------------------------------------------------------

Scaler Scaler::fit(const Matrix& x, std::span<const std::string> names) {
    if (x.n_rows == 0)
        throw EmptyDataset("cannot fit a scaler on an empty matrix");
    Scaler s;
    s.columns.assign(names.begin(), names.end());
    s.mins.assign(x.n_cols, std::numeric_limits<double>::infinity());
    s.maxs.assign(x.n_cols, -std::numeric_limits<double>::infinity());
    for (std::size_t r = 0; r < x.n_rows; ++r)
        for (std::size_t c = 0; c < x.n_cols; ++c) {
            s.mins[c] = std::min(s.mins[c], x.at(r, c));
            s.maxs[c] = std::max(s.maxs[c], x.at(r, c));
        }
    return s;
}

double Scaler::transform_value(std::size_t col, double v) const {
    const double lo = mins[col], hi = maxs[col];
    if (hi == lo)
        return 0.0;
    return (v - lo) / (hi - lo);
}

double Scaler::inverse_value(std::size_t col, double v) const {
    const double lo = mins[col], hi = maxs[col];
    return lo + v * (hi - lo);
}

Matrix Scaler::transform(const Matrix& x) const {
    if (x.n_cols != mins.size())
        throw DimensionMismatch("scaler: column count mismatch");
    Matrix out(x.n_rows, x.n_cols);
    for (std::size_t r = 0; r < x.n_rows; ++r)
        for (std::size_t c = 0; c < x.n_cols; ++c)
            out.at(r, c) = transform_value(c, x.at(r, c));
    return out;
}

nlohmann::ordered_json Scaler::to_json() const {
    nlohmann::ordered_json j;
    for (std::size_t c = 0; c < columns.size(); ++c)
        j[columns[c]] = {{"min", mins[c]}, {"max", maxs[c]}};
    return j;
}

Scaler Scaler::from_json(const nlohmann::ordered_json& j) {
    Scaler s;
    for (const auto& [name, mm] : j.items()) {
        if (!name.empty() && name[0] == '_')
            continue; // metadata keys live beside the columns
        s.columns.push_back(name);
        s.mins.push_back(mm.at("min").get<double>());
        s.maxs.push_back(mm.at("max").get<double>());
    }
    return s;
}

// -- wrapper selection ------------------------------------------------------------

FeatureRanking wrapper_select(const Dataset& dataset, int max_depth,
                              double importance_floor) {
    if (dataset.n_rows() == 0)
        throw EmptyDataset("wrapper_select on empty dataset");

    TreeFitParams params;
    params.max_depth = max_depth;
    Tree tree = tree_fit(dataset.x, dataset.targets, params);

    double total_gain = 0.0;
    for (double g : tree.split_gain)
        total_gain += g;

    FeatureRanking result;
    for (std::size_t i = 0; i < dataset.feature_names.size(); ++i) {
        const double imp = total_gain > 0.0 ? tree.split_gain[i] / total_gain : 0.0;
        result.ranked.push_back(RankedFeature{i, dataset.feature_names[i], imp});
    }
    std::stable_sort(result.ranked.begin(), result.ranked.end(),
                     [](const RankedFeature& a, const RankedFeature& b) {
                         return a.importance > b.importance;
                     });

    std::vector<std::size_t> keep;
    for (std::size_t i = 0; i < dataset.feature_names.size(); ++i) {
        const double imp = total_gain > 0.0 ? tree.split_gain[i] / total_gain : 0.0;
        if (imp >= importance_floor)
            keep.push_back(i);
    }

    result.pruned.target_kind = dataset.target_kind;
    result.pruned.targets = dataset.targets;
    result.pruned.keys = dataset.keys;
    for (std::size_t i : keep)
        result.pruned.feature_names.push_back(dataset.feature_names[i]);
    result.pruned.x = dataset.x.select_cols(keep);
    return result;
}

// -- serialization ------------------------------------------------------------------

void write_dataset_csv(std::ostream& out, const Dataset& dataset,
                       std::string_view meta) {
    out << "# target_kind=" << target_kind_name(dataset.target_kind);
    if (!meta.empty())
        out << ' ' << meta;
    out << '\n';

    CsvRow header = dataset.feature_names;
    header.push_back("target");
    out << csv_join(header) << '\n';

    CsvRow row(header.size());
    for (std::size_t r = 0; r < dataset.n_rows(); ++r) {
        for (std::size_t c = 0; c < dataset.x.n_cols; ++c)
            row[c] = format_double(dataset.x.at(r, c));
        row.back() = format_double(dataset.targets[r]);
        out << csv_join(row) << '\n';
    }
}

Dataset read_dataset_csv(std::istream& in) {
    Dataset ds;

    // the metadata comment precedes the header; CsvReader would skip it
    while (in.peek() == '#') {
        std::string line;
        std::getline(in, line);
        const std::string key = "target_kind=";
        if (auto pos = line.find(key); pos != std::string::npos) {
            std::string value = line.substr(pos + key.size());
            if (auto sp = value.find(' '); sp != std::string::npos)
                value = value.substr(0, sp);
            ds.target_kind = parse_target_kind(value);
        }
    }

    CsvReader reader(in);
    CsvRow row;
    if (!reader.next(row))
        throw EmptyDataset("dataset CSV has no header");
    bool has_target = !row.empty() && trim(row.back()) == "target";
    const std::size_t n_features = row.size() - (has_target ? 1 : 0);
    for (std::size_t i = 0; i < n_features; ++i)
        ds.feature_names.push_back(trim(row[i]));
    ds.x.n_cols = n_features;

    std::vector<double> values(n_features);
    while (reader.next(row)) {
        if (row.size() != n_features + (has_target ? 1 : 0))
            throw MalformedRow("dataset line " + std::to_string(reader.line()) +
                               ": wrong column count");
        for (std::size_t i = 0; i < n_features; ++i)
            values[i] = parse_double_strict(trim(row[i]), reader.line());
        ds.x.push_row(values);
        if (has_target)
            ds.targets.push_back(parse_double_strict(trim(row.back()), reader.line()));
    }
    return ds;
}

} // namespace cimpact
