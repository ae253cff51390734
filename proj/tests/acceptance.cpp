// Acceptance suite: runs every toolkit-level criterion at its stated
// tolerance and prints one PASS/FAIL line per criterion. Exits nonzero if
// any criterion fails.

#include "cimpact/core.hpp"
#include "cimpact/csv.hpp"
#include "cimpact/errors.hpp"
#include "cimpact/evaluate.hpp"
#include "cimpact/features.hpp"
#include "cimpact/ingest.hpp"
#include "cimpact/models.hpp"
#include "cimpact/report.hpp"
#include "cimpact/rng.hpp"
#include "cimpact/selection.hpp"
#include "cimpact/stats.hpp"
#include "cimpact/synth.hpp"

#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace cimpact;

namespace {

struct Outcome {
    bool pass = true;
    std::ostringstream detail;
};

#define EXPECT(cond, label)                                                        \
    do {                                                                           \
        if (!(cond)) {                                                             \
            out.pass = false;                                                      \
            out.detail << " [" << label << "]";                                    \
        }                                                                          \
    } while (0)

// -- shared helpers ----------------------------------------------------------------

std::string cli_bin() {
    const char* bin = std::getenv("CIMPACT_BIN");
    return bin ? bin : "";
}

int run_cli(const std::string& args) {
    const std::string cmd = cli_bin() + " " + args + " >/dev/null 2>&1";
    return WEXITSTATUS(std::system(cmd.c_str()));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

struct TempDir {
    fs::path root;
    explicit TempDir(const std::string& tag) {
        root = fs::temp_directory_path() /
               ("cimpact_accept_" + tag + "_" + std::to_string(::getpid()));
        fs::remove_all(root);
        fs::create_directories(root);
    }
    ~TempDir() { fs::remove_all(root); }
};

/// End-to-end data prep shared by the statistical criteria: generate, run
/// the rows through ingest, aggregate per project.
struct Prepared {
    SynthOutput synth;
    ComplaintCatalog catalog;
    std::vector<ProjectSeries> series;
};

Prepared prepare(const SynthConfig& cfg) {
    Prepared p;
    p.synth = generate(cfg);
    std::ostringstream csv;
    write_requests(csv, p.synth.requests);
    std::istringstream in(csv.str());
    auto [requests, report] = parse_requests(in, ParseMode::Strict);
    if (report.rows_kept != p.synth.requests.size())
        throw Error("generated rows did not survive ingest");
    p.catalog = ComplaintCatalog::observed(requests);
    p.series = build_project_series(requests, p.synth.projects, p.catalog);
    return p;
}

// -- criterion 1: numeric kernels ----------------------------------------------------

Outcome criterion_numeric_kernels() {
    Outcome out;

    // published one-sided critical values: (df, t, upper-tail p)
    const struct {
        double df, t, p;
    } table[] = {{1, 1.000, 0.25}, {10, 1.812, 0.05}, {30, 2.457, 0.01}};
    for (const auto& row : table)
        EXPECT(std::fabs(t_cdf(row.t, row.df) - (1.0 - row.p)) <= 1e-3, "t-table");

    for (double t : {-9.0, -2.0, -0.3, 0.0, 0.7, 1.0, 4.0, 30.0}) {
        const double closed = 0.5 + std::atan(t) / 3.14159265358979323846;
        EXPECT(std::fabs(t_cdf(t, 1.0) - closed) <= 1e-10, "df1-closed-form");
    }

    {
        Rng rng(101);
        Matrix x(60, 2);
        std::vector<double> y(60);
        for (std::size_t i = 0; i < 60; ++i) {
            x.at(i, 0) = rng.uniform(-3.0, 3.0);
            x.at(i, 1) = rng.uniform(0.0, 10.0);
            y[i] = 3.0 * x.at(i, 0) - 2.0 * x.at(i, 1) + 1.0;
        }
        const LinearModel m = ols_fit(x, y);
        EXPECT(std::fabs(m.coefficients[0] - 3.0) <= 1e-8, "ols-coef0");
        EXPECT(std::fabs(m.coefficients[1] + 2.0) <= 1e-8, "ols-coef1");
        EXPECT(std::fabs(m.intercept - 1.0) <= 1e-8, "ols-intercept");
    }

    {
        Rng rng(202);
        for (int trial = 0; trial < 1000; ++trial) {
            const std::size_t n = 2 + rng.uniform_below(50);
            std::vector<double> y(n), y_hat(n);
            bool degenerate = true;
            for (std::size_t i = 0; i < n; ++i) {
                y[i] = rng.uniform(-50.0, 50.0);
                y_hat[i] = y[i] + rng.uniform(-20.0, 20.0);
                if (i > 0 && y[i] != y[0])
                    degenerate = false;
            }
            if (degenerate)
                continue;
            const ScoreSet s = score(y, y_hat);
            EXPECT(std::fabs(s.mse - (s.bias * s.bias + s.variance)) <= 1e-12,
                   "mse-identity");
        }
    }
    return out;
}

// -- criterion 2: tree oracle equivalence --------------------------------------------

Outcome criterion_tree_oracle() {
    Outcome out;
    Rng rng(777);
    int splits = 0;
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 2 + rng.uniform_below(11); // <= 12 rows
        const std::size_t d = 1 + rng.uniform_below(3);  // <= 3 features
        Matrix x(n, d);
        std::vector<double> y(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t f = 0; f < d; ++f)
                x.at(i, f) = static_cast<double>(rng.uniform_below(5));
            // dyadic targets: partial sums are exact, so score ties mean the
            // same thing to both search routes
            y[i] = static_cast<double>(rng.uniform_below(65)) * 0.25 - 8.0;
        }

        // brute force over every (feature, midpoint) candidate
        bool found = false;
        int best_f = -1;
        double best_thr = 0.0, best_score = 0.0;
        const bool pure =
            *std::min_element(y.begin(), y.end()) ==
            *std::max_element(y.begin(), y.end());
        if (!pure) {
            for (std::size_t f = 0; f < d; ++f) {
                std::vector<double> vals;
                for (std::size_t r = 0; r < n; ++r)
                    vals.push_back(x.at(r, f));
                std::sort(vals.begin(), vals.end());
                vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
                for (std::size_t v = 0; v + 1 < vals.size(); ++v) {
                    const double thr = 0.5 * (vals[v] + vals[v + 1]);
                    double sl = 0.0, sr = 0.0;
                    std::size_t nl = 0, nr = 0;
                    for (std::size_t r = 0; r < n; ++r)
                        if (x.at(r, f) <= thr) {
                            sl += y[r];
                            ++nl;
                        } else {
                            sr += y[r];
                            ++nr;
                        }
                    if (nl == 0 || nr == 0)
                        continue;
                    const double score = sl * sl / static_cast<double>(nl) +
                                         sr * sr / static_cast<double>(nr);
                    if (!found || score > best_score) {
                        found = true;
                        best_f = static_cast<int>(f);
                        best_thr = thr;
                        best_score = score;
                    }
                }
            }
        }

        TreeFitParams p;
        p.max_depth = 1;
        const Tree t = tree_fit(x, y, p);
        if (!found) {
            EXPECT(t.root->is_leaf(), "leaf-when-no-split");
            continue;
        }
        EXPECT(!t.root->is_leaf(), "split-found");
        if (t.root->is_leaf())
            continue;
        EXPECT(t.root->feature == best_f, "feature-match");
        EXPECT(t.root->threshold == best_thr, "threshold-match");
        ++splits;
    }
    out.detail << " splits=" << splits;
    EXPECT(splits >= 400, "enough-splittable-cases");
    return out;
}

// -- criterion 3: screening power and size -------------------------------------------

SynthConfig screening_config(std::uint64_t seed, double lift) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.n_projects = 10;
    cfg.project_mult_min = cfg.project_mult_max = 1.0;
    for (int i = 0; i < 20; ++i) {
        const QoLIndicator ind = static_cast<QoLIndicator>(i % 5);
        cfg.types.push_back(SynthType{"Type" + std::to_string(i), 10.0, ind});
    }
    if (lift != 1.0)
        for (int i : {2, 7, 11, 16})
            cfg.planted.push_back(
                PlantedEffect{"Type" + std::to_string(i), lift, 1, 12});
    return cfg;
}

Outcome criterion_screening() {
    Outcome out;
    const int n_seeds = 50;

    // power: planted 3x lifts must be recalled
    int planted_total = 0, planted_selected = 0;
    for (int s = 0; s < n_seeds; ++s) {
        const SynthConfig cfg = screening_config(9000 + s, 3.0);
        const Prepared p = prepare(cfg);
        std::istringstream wl_in(p.synth.whitelist_csv);
        const Whitelist wl = Whitelist::from_csv(wl_in);
        const auto outcomes = select_types(p.series, p.catalog, wl, 0.05, 5);
        for (const auto& o : outcomes) {
            const bool planted = o.complaint_type == "Type2" ||
                                 o.complaint_type == "Type7" ||
                                 o.complaint_type == "Type11" ||
                                 o.complaint_type == "Type16";
            if (planted) {
                ++planted_total;
                if (o.selected)
                    ++planted_selected;
            }
        }
    }
    const double recall =
        static_cast<double>(planted_selected) / static_cast<double>(planted_total);
    out.detail << " recall=" << recall;
    EXPECT(recall >= 0.9, "power");

    // size: under the null the selection rate stays near alpha
    int null_total = 0, null_selected = 0;
    for (int s = 0; s < n_seeds; ++s) {
        const SynthConfig cfg = screening_config(40000 + s, 1.0);
        const Prepared p = prepare(cfg);
        std::istringstream wl_in(p.synth.whitelist_csv);
        const Whitelist wl = Whitelist::from_csv(wl_in);
        const auto outcomes = select_types(p.series, p.catalog, wl, 0.05, 5);
        for (const auto& o : outcomes) {
            ++null_total;
            if (o.selected)
                ++null_selected;
        }
    }
    const double rate =
        static_cast<double>(null_selected) / static_cast<double>(null_total);
    const double half_width =
        2.576 * std::sqrt(0.05 * 0.95 / static_cast<double>(null_total));
    out.detail << " null-rate=" << rate << " ci=[" << 0.05 - half_width << ","
               << 0.05 + half_width << "]";
    EXPECT(rate >= 0.05 - half_width && rate <= 0.05 + half_width, "size");
    return out;
}

// -- criterion 4: model ordering -----------------------------------------------------

/// Nonlinear planted response: the lift depends on the (type, month window)
/// pair while every type and every month keep the same average lift, so an
/// additive model has nothing to grab beyond the baseline rate.
SynthConfig ordering_config(std::uint64_t seed) {
    SynthConfig cfg;
    cfg.seed = seed;
    cfg.n_projects = 14;
    cfg.project_mult_min = 0.7;
    cfg.project_mult_max = 1.4;
    const double lambdas[8] = {6, 7, 8, 9, 11, 12, 13, 14};
    for (int i = 0; i < 8; ++i) {
        const QoLIndicator ind = static_cast<QoLIndicator>(i % 5);
        cfg.types.push_back(SynthType{"Type" + std::to_string(i), lambdas[i], ind});
    }
    for (int i = 0; i < 8; ++i) {
        const bool early = i % 2 == 0;
        cfg.planted.push_back(PlantedEffect{"Type" + std::to_string(i), 2.5,
                                            early ? 1 : 7, early ? 6 : 12});
    }
    return cfg;
}

Outcome criterion_model_ordering() {
    Outcome out;
    const int n_seeds = 20;
    int ordered = 0;
    double sum_oracle = 0.0, sum_rf = 0.0, sum_dt = 0.0, sum_ols = 0.0;

    for (int s = 0; s < n_seeds; ++s) {
        const SynthConfig cfg = ordering_config(7000 + 31 * s);
        const Prepared p = prepare(cfg);
        std::vector<std::size_t> all_types(p.catalog.size());
        std::iota(all_types.begin(), all_types.end(), 0);
        const Dataset ds =
            build_dataset(p.series, p.catalog, all_types, TargetKind::Count, 0.0);
        const double oracle = oracle_r2(ds, cfg, p.catalog);

        AlgorithmSpec rf;
        rf.algorithm = Algorithm::RfAdaboost;
        rf.max_depth = 10;
        rf.n_estimators = 20;
        AlgorithmSpec dt;
        dt.algorithm = Algorithm::DecisionTree;
        dt.max_depth = 10;
        AlgorithmSpec ols;
        ols.algorithm = Algorithm::Ols;

        const std::uint64_t cv_seed = 5000 + s;
        const double r_rf = cross_validate(rf, ds, 10, cv_seed).mean.r_squared;
        const double r_dt = cross_validate(dt, ds, 10, cv_seed).mean.r_squared;
        const double r_ols = cross_validate(ols, ds, 10, cv_seed).mean.r_squared;

        sum_oracle += oracle;
        sum_rf += r_rf;
        sum_dt += r_dt;
        sum_ols += r_ols;
        if (r_rf >= r_dt && r_dt > r_ols)
            ++ordered;
    }

    const double mean_oracle = sum_oracle / n_seeds;
    const double mean_rf = sum_rf / n_seeds;
    const double mean_dt = sum_dt / n_seeds;
    const double mean_ols = sum_ols / n_seeds;
    out.detail << " oracle=" << mean_oracle << " rf=" << mean_rf
               << " dt=" << mean_dt << " ols=" << mean_ols
               << " ordered=" << ordered << "/" << n_seeds;

    EXPECT(mean_oracle >= 0.7 && mean_oracle <= 0.9, "oracle-sizing");
    EXPECT(ordered >= 18, "ordering");
    EXPECT(mean_rf >= mean_oracle - 0.15, "rf-near-oracle");
    EXPECT(mean_ols <= mean_rf - 0.2, "ols-gap");
    return out;
}

// -- criterion 5: grid mechanics through the CLI --------------------------------------

Outcome criterion_grid_mechanics() {
    Outcome out;
    if (cli_bin().empty()) {
        out.pass = false;
        out.detail << " [CIMPACT_BIN unset]";
        return out;
    }
    TempDir tmp("grid");

    // ~10,000-row dataset: 28 projects x 30 types x 12 post months
    SynthConfig cfg;
    cfg.seed = 12001;
    cfg.n_projects = 28;
    cfg.project_mult_min = 0.8;
    cfg.project_mult_max = 1.3;
    for (int i = 0; i < 30; ++i)
        cfg.types.push_back(SynthType{"Type" + std::to_string(i), 9.0,
                                      static_cast<QoLIndicator>(i % 5)});
    for (int i = 0; i < 30; i += 2)
        cfg.planted.push_back(PlantedEffect{"Type" + std::to_string(i), 2.5,
                                            i % 4 == 0 ? 1 : 7,
                                            i % 4 == 0 ? 6 : 12});
    {
        std::ofstream f(tmp.root / "synth.json");
        f << cfg.to_json().dump(2);
    }
    if (run_cli("synth --config " + (tmp.root / "synth.json").string() + " --out " +
                (tmp.root / "data").string()) != 0) {
        out.pass = false;
        out.detail << " [synth-failed]";
        return out;
    }

    const std::string stage_args =
        " --requests " + (tmp.root / "data/requests.csv").string() + " --projects " +
        (tmp.root / "data/projects.csv").string() + " --whitelist " +
        (tmp.root / "data/whitelist.csv").string() +
        " --target count --freq-threshold 5 --k 10 --seed 12001";

    const auto t0 = std::chrono::steady_clock::now();
    const int rc = run_cli("tune --algorithm rf_adaboost" + stage_args +
                           " --depth-min 1 --depth-max 20 --est-min 1 --est-max 20"
                           " --jobs 4 --out " +
                           (tmp.root / "rf").string());
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.detail << " tune=" << static_cast<int>(seconds) << "s";
    EXPECT(rc == 0, "tune-exit");
    EXPECT(seconds < 600.0, "tune-under-10-min");

    // full rf grid: exactly 400 cells, best == argmax of the export
    {
        std::istringstream in(slurp(tmp.root / "rf/grid.csv"));
        const GridResult grid = read_grid_csv(in);
        EXPECT(grid.cells.size() == 400, "rf-400-cells");
        const GridCell& best = grid.cells[best_cell_index(grid.cells)];
        const std::string best_json = slurp(tmp.root / "rf/best.json");
        EXPECT(best_json.find("\"depth\": " + std::to_string(best.depth)) !=
                   std::string::npos,
               "best-depth-matches-export");
        EXPECT(best_json.find("\"estimators\": " + std::to_string(best.estimators)) !=
                   std::string::npos,
               "best-estimators-matches-export");
    }

    // dt grid is one-dimensional: exactly 20 cells
    const int rc_dt = run_cli("tune --algorithm dt" + stage_args +
                              " --depth-min 1 --depth-max 20 --jobs 4 --out " +
                              (tmp.root / "dt").string());
    EXPECT(rc_dt == 0, "dt-exit");
    {
        std::istringstream in(slurp(tmp.root / "dt/grid.csv"));
        const GridResult grid = read_grid_csv(in);
        EXPECT(grid.cells.size() == 20, "dt-20-cells");
    }
    return out;
}

// -- criterion 6: change report ---------------------------------------------------------

Outcome criterion_change_report() {
    Outcome out;
    const int n_seeds = 40;
    const double lambda = 12.0;
    const int n_projects = 10;
    int within_3sigma = 0, correct_sign = 0;

    // schema check once
    {
        std::vector<ChangeEntry> entries{ChangeEntry{"Air Quality", 1, 4, 71, 55, false}};
        std::ostringstream csv;
        write_changes_csv(csv, entries);
        EXPECT(csv.str().rfind("complaint_type,window_start,window_end,"
                               "predicted_change_pct,actual_change_pct,flag\n",
                               0) == 0,
               "schema");
    }

    for (int s = 0; s < n_seeds; ++s) {
        SynthConfig cfg;
        cfg.seed = 20000 + 17 * s;
        cfg.n_projects = n_projects;
        cfg.project_mult_min = cfg.project_mult_max = 1.0;
        cfg.types = {SynthType{"Noise", lambda, QoLIndicator::Environment},
                     SynthType{"Sewer", 6.0, QoLIndicator::Waste}};
        cfg.planted = {PlantedEffect{"Noise", 2.0, 1, 3}};
        const Prepared p = prepare(cfg);
        std::vector<std::size_t> all_types(p.catalog.size());
        std::iota(all_types.begin(), all_types.end(), 0);
        const Dataset ds =
            build_dataset(p.series, p.catalog, all_types, TargetKind::Count, 0.0);

        AlgorithmSpec spec;
        spec.algorithm = Algorithm::RfAdaboost;
        spec.max_depth = 8;
        spec.n_estimators = 12;
        auto [model, scaler] = fit_spec(spec, ds, cfg.seed);

        const std::vector<ChangeWindow> windows{{"Noise", 1, 3}};
        const auto entries =
            change_report(model, scaler, ds, p.series, p.catalog, windows);
        if (entries.size() != 1 || entries[0].undefined_baseline) {
            out.pass = false;
            out.detail << " [entry-missing seed=" << s << "]";
            continue;
        }

        // delta method on (window mean)/(baseline mean) with W=2L over 3
        // months and B=L over 12 months, averaged over independent projects
        const double var_ratio = (2.0 * lambda / 3.0) / (lambda * lambda) +
                                 4.0 * (lambda / 12.0) / (lambda * lambda);
        const double sigma_pct =
            100.0 * std::sqrt(var_ratio / static_cast<double>(n_projects));
        if (std::fabs(entries[0].actual_change_pct - 100.0) <= 3.0 * sigma_pct)
            ++within_3sigma;
        if (entries[0].predicted_change_pct > 0.0)
            ++correct_sign;
    }
    out.detail << " within3sigma=" << within_3sigma << "/" << n_seeds
               << " sign=" << correct_sign << "/" << n_seeds;
    EXPECT(within_3sigma >= 38, "actual-within-3sigma");
    EXPECT(correct_sign >= 38, "predicted-sign");
    return out;
}

// -- criterion 7: end-to-end determinism -------------------------------------------------

Outcome criterion_determinism() {
    Outcome out;
    if (cli_bin().empty()) {
        out.pass = false;
        out.detail << " [CIMPACT_BIN unset]";
        return out;
    }
    TempDir tmp("determinism");
    {
        std::ofstream f(tmp.root / "config.json");
        f << R"({
          "seed": 31415,
          "targets": ["count", "log_ratio"],
          "algorithms": ["ols", "dt", "rf_adaboost"],
          "grid": {"depth_min": 1, "depth_max": 5, "est_min": 1, "est_max": 5},
          "k": 5,
          "smoothing_alpha": 1.0,
          "synth": {
            "n_projects": 8,
            "start_min": "2015-01-01",
            "start_max": "2016-06-30",
            "project_mult_min": 0.8,
            "project_mult_max": 1.2,
            "types": [
              {"name": "Noise", "lambda": 10, "indicator": "Environment"},
              {"name": "Air Quality", "lambda": 6, "indicator": "Environment"},
              {"name": "Sewer", "lambda": 5, "indicator": "Waste"},
              {"name": "Parking", "lambda": 8, "indicator": "Transportation"}
            ],
            "planted": [
              {"type": "Noise", "lift": 3.0, "window_start": 1, "window_end": 6},
              {"type": "Sewer", "lift": 2.5, "window_start": 1, "window_end": 3}
            ]
          }
        })";
    }
    const std::string config = (tmp.root / "config.json").string();
    EXPECT(run_cli("pipeline --config " + config + " --out " +
                   (tmp.root / "a").string() + " --jobs 2") == 0,
           "run-a");
    EXPECT(run_cli("pipeline --config " + config + " --out " +
                   (tmp.root / "b").string() + " --jobs 1") == 0,
           "run-b");

    std::map<std::string, std::string> a, b;
    for (const auto& e : fs::recursive_directory_iterator(tmp.root / "a"))
        if (e.is_regular_file())
            a[fs::relative(e.path(), tmp.root / "a").string()] = slurp(e.path());
    for (const auto& e : fs::recursive_directory_iterator(tmp.root / "b"))
        if (e.is_regular_file())
            b[fs::relative(e.path(), tmp.root / "b").string()] = slurp(e.path());

    EXPECT(!a.empty(), "artifacts-exist");
    EXPECT(a.size() == b.size(), "same-file-set");
    int identical = 0;
    for (const auto& [rel, bytes] : a) {
        if (b.count(rel) && b.at(rel) == bytes)
            ++identical;
        else {
            out.pass = false;
            out.detail << " [differs: " << rel << "]";
        }
    }
    out.detail << " files=" << identical << "/" << a.size();
    return out;
}

} // namespace

int main() {
    struct Criterion {
        const char* name;
        std::function<Outcome()> run;
        double budget_seconds;
    };
    const std::vector<Criterion> criteria{
        {"numeric-kernels", criterion_numeric_kernels, 1.0},
        {"tree-oracle-equivalence", criterion_tree_oracle, 30.0},
        {"screening-power-and-size", criterion_screening, 120.0},
        {"model-ordering", criterion_model_ordering, 600.0},
        {"grid-mechanics", criterion_grid_mechanics, 600.0},
        {"change-report", criterion_change_report, 600.0},
        {"end-to-end-determinism", criterion_determinism, 600.0},
    };

    bool all_pass = true;
    int index = 0;
    for (const auto& c : criteria) {
        ++index;
        const auto t0 = std::chrono::steady_clock::now();
        Outcome out;
        try {
            out = c.run();
        } catch (const std::exception& e) {
            out.pass = false;
            out.detail << " [exception: " << e.what() << "]";
        }
        const double seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        if (seconds > c.budget_seconds) {
            out.pass = false;
            out.detail << " [over budget " << c.budget_seconds << "s]";
        }
        std::printf("[%s] %d. %s (%.2fs)%s\n", out.pass ? "PASS" : "FAIL", index,
                    c.name, seconds, out.detail.str().c_str());
        std::fflush(stdout);
        all_pass = all_pass && out.pass;
    }
    return all_pass ? 0 : 1;
}
