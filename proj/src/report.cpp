#include "cimpact/report.hpp"

#include "cimpact/csv.hpp"
#include "cimpact/errors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <tuple>

namespace cimpact {

std::vector<ChangeWindow> default_change_windows(std::span<const std::string> types) {
    // Published per-phase windows for the NYC complaint taxonomy.
    static const std::map<std::string, std::pair<int, int>> known = {
        {"air quality", {1, 4}},
        {"sewer", {1, 3}},
        {"safety", {4, 8}},
        {"noise construction", {1, 3}},
        {"unsanitary street condition", {10, 12}},
    };
    auto lower = [](const std::string& s) {
        std::string out = s;
        std::transform(out.begin(), out.end(), out.begin(),
                       [](unsigned char c) { return std::tolower(c); });
        return out;
    };
    std::vector<ChangeWindow> windows;
    windows.reserve(types.size());
    for (const auto& t : types) {
        auto it = known.find(lower(t));
        if (it != known.end())
            windows.push_back(ChangeWindow{t, it->second.first, it->second.second});
        else
            windows.push_back(ChangeWindow{t, 1, 12});
    }
    return windows;
}

std::vector<ChangeEntry> change_report(const Model& model, const Scaler& scaler,
                                       const Dataset& dataset,
                                       std::span<const ProjectSeries> projects,
                                       const ComplaintCatalog& catalog,
                                       std::span<const ChangeWindow> windows) {
    if (dataset.target_kind != TargetKind::Count)
        throw DataError("change_report requires a count-target model");
    if (dataset.keys.size() != dataset.n_rows())
        throw DataError("change_report needs row keys (in-memory dataset)");

    const std::vector<double> y_hat = predict(model, scaler.transform(dataset.x));

    // predictions keyed by (project, type, month)
    std::map<std::tuple<int, std::size_t, int>, double> pred;
    for (std::size_t r = 0; r < dataset.n_rows(); ++r) {
        const RowKey& k = dataset.keys[r];
        pred[{k.project_id, k.type_index, k.month_t}] = y_hat[r];
    }

    std::vector<ChangeEntry> entries;
    for (const auto& w : windows) {
        if (w.start < 1 || w.end > 12 || w.start > w.end)
            throw DataError("change window out of range for " + w.complaint_type);
        const auto type_index = catalog.index_of(w.complaint_type);
        ChangeEntry entry;
        entry.complaint_type = w.complaint_type;
        entry.window_start = w.start;
        entry.window_end = w.end;
        if (!type_index) {
            entry.undefined_baseline = true;
            entries.push_back(std::move(entry));
            continue;
        }

        const double window_len = static_cast<double>(w.end - w.start + 1);
        double actual_sum = 0.0, predicted_sum = 0.0;
        int usable = 0;
        for (const auto& ps : projects) {
            const MonthlySeries& s = ps.series[*type_index];
            const double baseline = s.pre_mean();
            if (baseline <= 0.0)
                continue; // no baseline complaints, percentage undefined
            double actual_mean = 0.0, predicted_mean = 0.0;
            bool have_all_predictions = true;
            for (int m = w.start; m <= w.end; ++m) {
                const int t = 12 + m;
                actual_mean += static_cast<double>(s.count_at(t));
                auto it = pred.find({ps.project.id, *type_index, t});
                if (it == pred.end()) {
                    have_all_predictions = false;
                    break;
                }
                predicted_mean += it->second;
            }
            if (!have_all_predictions)
                continue;
            actual_mean /= window_len;
            predicted_mean /= window_len;
            actual_sum += 100.0 * (actual_mean - baseline) / baseline;
            predicted_sum += 100.0 * (predicted_mean - baseline) / baseline;
            ++usable;
        }
        if (usable == 0) {
            entry.undefined_baseline = true;
        } else {
            entry.actual_change_pct = actual_sum / usable;
            entry.predicted_change_pct = predicted_sum / usable;
        }
        entries.push_back(std::move(entry));
    }
    return entries;
}

void write_changes_csv(std::ostream& out, std::span<const ChangeEntry> entries,
                       std::string_view meta) {
    if (!meta.empty())
        out << "# " << meta << '\n';
    out << "complaint_type,window_start,window_end,predicted_change_pct,"
           "actual_change_pct,flag\n";
    for (const auto& e : entries) {
        CsvRow row{e.complaint_type, std::to_string(e.window_start),
                   std::to_string(e.window_end)};
        if (e.undefined_baseline) {
            row.insert(row.end(), {"", "", "undefined_baseline"});
        } else {
            row.push_back(format_double(e.predicted_change_pct));
            row.push_back(format_double(e.actual_change_pct));
            row.push_back("ok");
        }
        out << csv_join(row) << '\n';
    }
}

nlohmann::ordered_json changes_json(std::span<const ChangeEntry> entries) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& e : entries) {
        nlohmann::ordered_json j;
        j["complaint_type"] = e.complaint_type;
        j["window_start"] = e.window_start;
        j["window_end"] = e.window_end;
        if (e.undefined_baseline) {
            j["predicted_change_pct"] = nullptr;
            j["actual_change_pct"] = nullptr;
            j["flag"] = "undefined_baseline";
        } else {
            j["predicted_change_pct"] = e.predicted_change_pct;
            j["actual_change_pct"] = e.actual_change_pct;
            j["flag"] = "ok";
        }
        arr.push_back(std::move(j));
    }
    return arr;
}

void write_comparison_csv(std::ostream& out, std::span<const AlgorithmScore> rows,
                          std::string_view meta) {
    if (!meta.empty())
        out << "# " << meta << '\n';
    out << "algorithm,target,depth,estimators,r_squared,mse\n";
    for (const auto& r : rows) {
        out << csv_join({std::string(algorithm_name(r.algorithm)),
                         std::string(target_kind_name(r.target_kind)),
                         r.depth > 0 ? std::to_string(r.depth) : "",
                         r.estimators > 0 ? std::to_string(r.estimators) : "",
                         format_double(r.r_squared), format_double(r.mse)})
            << '\n';
    }
}

nlohmann::ordered_json comparison_json(std::span<const AlgorithmScore> rows) {
    nlohmann::ordered_json arr = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        nlohmann::ordered_json j;
        j["algorithm"] = std::string(algorithm_name(r.algorithm));
        j["target"] = std::string(target_kind_name(r.target_kind));
        if (r.depth > 0)
            j["depth"] = r.depth;
        if (r.estimators > 0)
            j["estimators"] = r.estimators;
        j["r_squared"] = r.r_squared;
        j["mse"] = r.mse;
        arr.push_back(std::move(j));
    }
    return arr;
}

void heatmap_export(std::ostream& out, const GridResult& grid, std::string_view meta) {
    const std::size_t expected = grid.depth_axis.size() * grid.estimator_axis.size();
    if (grid.cells.size() != expected)
        throw IncompleteGrid("grid has " + std::to_string(grid.cells.size()) +
                             " cells, axes demand " + std::to_string(expected));
    std::set<std::pair<int, int>> seen;
    for (const auto& c : grid.cells)
        if (!seen.insert({c.depth, c.estimators}).second)
            throw IncompleteGrid("duplicate cell depth=" + std::to_string(c.depth) +
                                 " estimators=" + std::to_string(c.estimators));
    for (int d : grid.depth_axis)
        for (int e : grid.estimator_axis)
            if (!seen.count({d, e}))
                throw IncompleteGrid("missing cell depth=" + std::to_string(d) +
                                     " estimators=" + std::to_string(e));

    if (!meta.empty())
        out << "# " << meta << '\n';
    out << "algorithm,depth,estimators,mean_r2,mean_mse,bias,variance\n";
    for (const auto& c : grid.cells) {
        out << csv_join({std::string(algorithm_name(grid.algorithm)),
                         std::to_string(c.depth), std::to_string(c.estimators),
                         format_double(c.mean.r_squared), format_double(c.mean.mse),
                         format_double(c.mean.bias), format_double(c.mean.variance)})
            << '\n';
    }
}

GridResult read_grid_csv(std::istream& in) {
    CsvReader reader(in);
    CsvRow row;
    if (!reader.next(row) || row.size() != 7 || row[0] != "algorithm")
        throw DataError("not a grid export (bad header)");

    GridResult grid;
    std::set<int> depths, estimators;
    bool first = true;
    while (reader.next(row)) {
        if (row.size() != 7)
            throw MalformedRow("grid line " + std::to_string(reader.line()));
        if (first) {
            grid.algorithm = parse_algorithm(row[0]);
            first = false;
        }
        GridCell cell;
        cell.depth = static_cast<int>(parse_double_strict(row[1], reader.line()));
        cell.estimators = static_cast<int>(parse_double_strict(row[2], reader.line()));
        cell.mean.r_squared = parse_double_strict(row[3], reader.line());
        cell.mean.mse = parse_double_strict(row[4], reader.line());
        cell.mean.bias = parse_double_strict(row[5], reader.line());
        cell.mean.variance = parse_double_strict(row[6], reader.line());
        depths.insert(cell.depth);
        estimators.insert(cell.estimators);
        grid.cells.push_back(cell);
    }
    if (grid.cells.empty())
        throw DataError("grid export has no cells");
    grid.depth_axis.assign(depths.begin(), depths.end());
    grid.estimator_axis.assign(estimators.begin(), estimators.end());
    grid.best_index = best_cell_index(grid.cells);
    return grid;
}

} // namespace cimpact
