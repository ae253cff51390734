#pragma once

#include "cimpact/core.hpp"
#include "cimpact/matrix.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace cimpact {

/// Monthly complaint counts for one (project, complaint type) pair across
/// the 24 analysis months. counts[t-1] is the total for month t.
struct MonthlySeries {
    int project_id = 0;
    std::size_t type_index = 0;
    std::array<std::int64_t, 24> counts{};

    std::int64_t count_at(int t) const { return counts[static_cast<std::size_t>(t - 1)]; }
    std::int64_t pre_total() const;
    std::int64_t post_total() const;
    double pre_mean() const { return static_cast<double>(pre_total()) / 12.0; }
    /// Least-squares slope of counts over baseline months 1..12.
    double pre_slope() const;
};

/// One project's filtered, aggregated view: the window plus a series for
/// every catalog type (all-zero series included).
struct ProjectSeries {
    ConstructionProject project;
    AnalysisWindow window;
    std::vector<MonthlySeries> series; // indexed by catalog type index
};

/// Aggregates requests (already filtered to this project's zip and window)
/// into per-type monthly counts over the full catalog.
std::vector<MonthlySeries> aggregate_monthly(std::span<const ServiceRequest> filtered,
                                             const ConstructionProject& project,
                                             const AnalysisWindow& window,
                                             const ComplaintCatalog& catalog);

/// Convenience: filter + aggregate for every project.
std::vector<ProjectSeries> build_project_series(std::span<const ServiceRequest> requests,
                                                std::span<const ConstructionProject> projects,
                                                const ComplaintCatalog& catalog);

/// Log complaint ratio of type i against the mean count over all types at
/// one month: ln((c_i + alpha) / (sum_j (c_j + alpha) / I)). Throws
/// UndefinedRatio when alpha is 0 and c_i is 0 (callers drop the row).
double complaint_ratio(std::span<const std::int64_t> counts_at_month, std::size_t i,
                       double alpha);

// -- dataset ------------------------------------------------------------------

enum class TargetKind { Count, LogRatio };

std::string_view target_kind_name(TargetKind k);
TargetKind parse_target_kind(std::string_view name);

/// Identity of a dataset row: which (project, type, post month) it scores.
struct RowKey {
    int project_id = 0;
    std::size_t type_index = 0;
    int month_t = 0; // 13..24
};

struct Dataset {
    std::vector<std::string> feature_names;
    Matrix x; // raw feature values; normalization is a separate, persisted step
    std::vector<double> targets;
    TargetKind target_kind = TargetKind::Count;
    std::vector<RowKey> keys; // parallel to rows; empty when re-imported from CSV

    std::size_t n_rows() const { return x.n_rows; }
};

/// One row per (project, selected type, post month t in 13..24) whose target
/// is defined. Features: duration, zip category code, month offset, calendar
/// month, complaint type index, pre-window mean / total / trend slope.
Dataset build_dataset(std::span<const ProjectSeries> projects,
                      const ComplaintCatalog& catalog,
                      std::span<const std::size_t> selected_types,
                      TargetKind target_kind, double alpha);

// -- normalization ---------------------------------------------------------------

/// Per-column min-max scaler to [0, 1] on training data. Constant columns
/// map to 0; unseen values are not clipped.
struct Scaler {
    std::vector<std::string> columns;
    std::vector<double> mins;
    std::vector<double> maxs;

    static Scaler fit(const Matrix& x, std::span<const std::string> names);
    Matrix transform(const Matrix& x) const;
    double transform_value(std::size_t col, double v) const;
    /// Inverse of transform for non-constant columns.
    double inverse_value(std::size_t col, double v) const;

    nlohmann::ordered_json to_json() const;
    static Scaler from_json(const nlohmann::ordered_json& j);
};

// -- wrapper feature selection ------------------------------------------------------

struct RankedFeature {
    std::size_t index = 0;
    std::string name;
    double importance = 0.0; // variance-reduction share, sums to 1
};

struct FeatureRanking {
    std::vector<RankedFeature> ranked; // descending importance
    Dataset pruned;                    // features below the floor removed
};

/// Fits one regression tree on all features and ranks them by the total
/// variance reduction of their splits; features under `importance_floor`
/// are dropped from the returned dataset.
FeatureRanking wrapper_select(const Dataset& dataset, int max_depth,
                              double importance_floor);

// -- serialization -------------------------------------------------------------------

/// CSV with feature columns then `target`. `meta` (if nonempty) is written
/// as a leading `# ...` comment; target kind is always recorded there.
void write_dataset_csv(std::ostream& out, const Dataset& dataset,
                       std::string_view meta = {});

/// Reads a dataset CSV; accepts files without a target column (prediction
/// inputs). Row keys are not representable in this format and stay empty.
Dataset read_dataset_csv(std::istream& in);

} // namespace cimpact
