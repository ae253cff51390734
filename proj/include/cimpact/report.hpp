#pragma once

#include "cimpact/evaluate.hpp"
#include "cimpact/features.hpp"
#include "cimpact/models.hpp"

#include <json.hpp>

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace cimpact {

/// Percentage change of a complaint type over a post-start month window,
/// predicted vs actual, against the baseline-year monthly mean.
struct ChangeEntry {
    std::string complaint_type;
    int window_start = 1; // months after start, 1..12
    int window_end = 12;
    double predicted_change_pct = 0.0;
    double actual_change_pct = 0.0;
    bool undefined_baseline = false; // no project had baseline complaints
};

struct ChangeWindow {
    std::string complaint_type;
    int start = 1;
    int end = 12;
};

/// Report windows per type; types with a published per-phase window get it,
/// everything else spans the whole post year.
std::vector<ChangeWindow> default_change_windows(std::span<const std::string> types);

/// For each window: actual change = mean over projects of
/// 100 * (window monthly mean - baseline monthly mean) / baseline monthly
/// mean; predicted change replaces the window's actual counts with model
/// predictions. Projects without baseline complaints are skipped; an entry
/// with no usable project is flagged. The model must be count-trained.
std::vector<ChangeEntry> change_report(const Model& model, const Scaler& scaler,
                                       const Dataset& dataset,
                                       std::span<const ProjectSeries> projects,
                                       const ComplaintCatalog& catalog,
                                       std::span<const ChangeWindow> windows);

/// CSV columns: complaint_type,window_start,window_end,predicted_change_pct,
/// actual_change_pct,flag.
void write_changes_csv(std::ostream& out, std::span<const ChangeEntry> entries,
                       std::string_view meta = {});
nlohmann::ordered_json changes_json(std::span<const ChangeEntry> entries);

/// CSV columns: algorithm,target,depth,estimators,r_squared,mse.
void write_comparison_csv(std::ostream& out, std::span<const AlgorithmScore> rows,
                          std::string_view meta = {});
nlohmann::ordered_json comparison_json(std::span<const AlgorithmScore> rows);

/// Long-format CSV (algorithm,depth,estimators,mean_r2,mean_mse,bias,
/// variance), one row per cell. Throws IncompleteGrid unless every cell of
/// the declared axes is present exactly once.
void heatmap_export(std::ostream& out, const GridResult& grid,
                    std::string_view meta = {});

/// Re-imports a heatmap export (axes recovered from the rows).
GridResult read_grid_csv(std::istream& in);

} // namespace cimpact
