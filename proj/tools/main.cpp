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
#include "cimpact/synth.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace cimpact::cli {

// -- small file helpers -------------------------------------------------------

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw DataError("cannot open input file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void write_text(const fs::path& path, std::string_view text) {
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError("cannot open output file: " + path.string());
    out << text;
    if (!out)
        throw DataError("failed writing " + path.string());
}

json load_json(const fs::path& path) {
    try {
        return json::parse(read_text(path));
    } catch (const json::parse_error& e) {
        throw DataError("bad JSON in " + path.string() + ": " + e.what());
    }
}

/// Hash of the analytic parameters (never paths or the worker count), so
/// identical experiments produce identical bytes wherever they run.
std::string config_hash(const json& analytic) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(analytic.dump())));
    return buf;
}

std::string meta_line(const std::string& hash, std::uint64_t seed) {
    return "config_hash=" + hash + " seed=" + std::to_string(seed);
}

void attach_meta(ordered_json& j, const std::string& hash, std::uint64_t seed) {
    j["_meta"] = {{"config_hash", hash}, {"seed", seed}};
}

std::string ingest_report_file(const IngestReport& report, const std::string& hash,
                               std::uint64_t seed) {
    ordered_json j;
    attach_meta(j, hash, seed);
    j["rows_read"] = report.rows_read;
    j["rows_kept"] = report.rows_kept;
    j["rows_skipped_malformed"] = report.rows_skipped_malformed;
    j["rows_out_of_scope"] = report.rows_out_of_scope;
    return j.dump(2) + "\n";
}

// -- shared pipeline stages ------------------------------------------------------

struct StageOptions {
    std::string requests_path;
    std::string projects_path;
    std::string whitelist_path;
    ParseMode mode = ParseMode::Lenient;
    double alpha = 0.05;
    int freq_threshold = 5;
    double smoothing_alpha = 0.0;
};

struct LoadedData {
    std::vector<ServiceRequest> requests;
    IngestReport ingest_report;
    std::vector<ConstructionProject> projects;
    Whitelist whitelist;
    ComplaintCatalog catalog;
    std::vector<ProjectSeries> series;
};

LoadedData load_inputs(const StageOptions& opt) {
    LoadedData data;
    {
        std::ifstream in(opt.requests_path, std::ios::binary);
        if (!in)
            throw DataError("cannot open requests file: " + opt.requests_path);
        auto [requests, report] = parse_requests(in, opt.mode);
        data.requests = std::move(requests);
        data.ingest_report = report;
    }
    {
        std::ifstream in(opt.projects_path, std::ios::binary);
        if (!in)
            throw DataError("cannot open projects file: " + opt.projects_path);
        data.projects = parse_projects(in);
    }
    {
        std::ifstream in(opt.whitelist_path, std::ios::binary);
        if (!in)
            throw DataError("cannot open whitelist file: " + opt.whitelist_path);
        data.whitelist = Whitelist::from_csv(in);
    }
    if (data.projects.empty())
        throw DataError("no projects in " + opt.projects_path);
    data.catalog = ComplaintCatalog::observed(data.requests);
    if (data.catalog.size() == 0)
        throw DataError("no usable requests in " + opt.requests_path);
    data.series = build_project_series(data.requests, data.projects, data.catalog);
    return data;
}

struct Screened {
    std::vector<ScreeningOutcome> outcomes;
    std::vector<std::size_t> selected;
};

Screened run_screening(const LoadedData& data, const StageOptions& opt) {
    Screened s;
    s.outcomes = select_types(data.series, data.catalog, data.whitelist, opt.alpha,
                              opt.freq_threshold);
    s.selected = selected_indices(s.outcomes, data.catalog);
    return s;
}

Dataset build_target_dataset(const LoadedData& data, const Screened& screened,
                             TargetKind kind, double smoothing_alpha) {
    if (screened.selected.empty())
        throw DataError("screening selected no complaint types; nothing to model");
    return build_dataset(data.series, data.catalog, screened.selected, kind,
                         smoothing_alpha);
}

// -- command options ---------------------------------------------------------------

struct SynthCmd {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
};

struct IngestCmd {
    std::string requests_path;
    std::string url;
    std::vector<std::string> filters;
    int page_size = 1000;
    std::string projects_path;
    std::string mode = "lenient";
    std::string report_path;
    std::string normalized_path;
};

struct SelectCmd {
    StageOptions stage;
    std::string out_dir;
    std::uint64_t seed = 0;
};

struct TrainCmd {
    StageOptions stage;
    std::string algorithm = "rf_adaboost";
    std::string target = "count";
    int depth = 8;
    int estimators = 12;
    int k = 10;
    std::uint64_t seed = 0;
    int jobs = 1;
    std::string out_dir;
};

struct TuneCmd {
    StageOptions stage;
    std::string algorithm = "rf_adaboost";
    std::string target = "count";
    int depth_min = 1, depth_max = 20;
    int est_min = 1, est_max = 20;
    int k = 10;
    std::uint64_t seed = 0;
    int jobs = 1;
    std::string out_dir;
};

struct PredictCmd {
    std::string model_path;
    std::string scaler_path;
    std::string data_path;
    std::string out_path;
};

struct ReportCmd {
    StageOptions stage;
    std::string model_path;
    std::string scaler_path;
    std::string windows_path;
    std::uint64_t seed = 0;
    std::string out_dir;
};

struct PipelineCmd {
    std::string config_path;
    std::string out_dir;
    std::optional<std::uint64_t> seed;
    std::optional<int> jobs;
};

ParseMode parse_mode(const std::string& mode) {
    if (mode == "strict")
        return ParseMode::Strict;
    if (mode == "lenient")
        return ParseMode::Lenient;
    throw CLI::ValidationError("--mode", "must be strict or lenient");
}

// -- synth -------------------------------------------------------------------------

int run_synth(const SynthCmd& cmd) {
    SynthConfig cfg = SynthConfig::from_json(load_json(cmd.config_path));
    if (cmd.seed)
        cfg.seed = *cmd.seed;
    const std::string hash = config_hash(json::parse(cfg.to_json().dump()));
    const SynthOutput out = generate(cfg);

    const fs::path dir(cmd.out_dir);
    {
        std::ostringstream s;
        s << "# " << meta_line(hash, cfg.seed) << "\n";
        write_projects(s, out.projects);
        write_text(dir / "projects.csv", s.str());
    }
    {
        std::ostringstream s;
        s << "# " << meta_line(hash, cfg.seed) << "\n";
        write_requests(s, out.requests);
        write_text(dir / "requests.csv", s.str());
    }
    write_text(dir / "whitelist.csv",
               "# " + meta_line(hash, cfg.seed) + "\n" + out.whitelist_csv);
    ordered_json manifest = out.manifest;
    attach_meta(manifest, hash, cfg.seed);
    write_text(dir / "manifest.json", manifest.dump(2) + "\n");

    std::cerr << "synth: " << out.requests.size() << " requests for "
              << out.projects.size() << " projects -> " << dir << "\n";
    return 0;
}

// -- ingest ------------------------------------------------------------------------

int run_ingest(const IngestCmd& cmd) {
    std::string csv_text;
    if (!cmd.url.empty()) {
        std::vector<std::pair<std::string, std::string>> filters;
        for (const auto& f : cmd.filters) {
            const auto eq = f.find('=');
            if (eq == std::string::npos)
                throw CLI::ValidationError("--filter", "expected key=value");
            filters.emplace_back(f.substr(0, eq), f.substr(eq + 1));
        }
        FetchOptions options;
        options.page_size = cmd.page_size;
        csv_text = fetch_remote(cmd.url, filters, options);
    } else if (!cmd.requests_path.empty()) {
        csv_text = read_text(cmd.requests_path);
    } else {
        throw CLI::ValidationError("ingest", "need --requests or --url");
    }

    std::istringstream in(csv_text);
    auto [requests, report] = parse_requests(in, parse_mode(cmd.mode));

    if (!cmd.projects_path.empty()) {
        std::ifstream pin(cmd.projects_path, std::ios::binary);
        if (!pin)
            throw DataError("cannot open projects file: " + cmd.projects_path);
        const auto projects = parse_projects(pin);
        std::cerr << "ingest: " << projects.size() << " projects parsed\n";
    }

    if (!cmd.normalized_path.empty()) {
        std::ostringstream out;
        write_requests(out, requests);
        write_text(cmd.normalized_path, out.str());
    }

    const std::string report_json = ingest_report_json(report) + "\n";
    if (!cmd.report_path.empty())
        write_text(cmd.report_path, report_json);
    else
        std::cerr << report_json;
    return 0;
}

// -- select ------------------------------------------------------------------------

json analytic_stage_json(const StageOptions& opt) {
    return json{{"alpha", opt.alpha},
                {"freq_threshold", opt.freq_threshold},
                {"smoothing_alpha", opt.smoothing_alpha},
                {"mode", opt.mode == ParseMode::Strict ? "strict" : "lenient"}};
}

int run_select(const SelectCmd& cmd) {
    const LoadedData data = load_inputs(cmd.stage);
    const Screened screened = run_screening(data, cmd.stage);
    const std::string hash = config_hash(analytic_stage_json(cmd.stage));

    const fs::path dir(cmd.out_dir);
    std::ostringstream s;
    write_screening_csv(s, screened.outcomes, meta_line(hash, cmd.seed));
    write_text(dir / "screening.csv", s.str());
    write_text(dir / "ingest_report.json",
               ingest_report_file(data.ingest_report, hash, cmd.seed));

    std::cerr << "select: " << screened.selected.size() << " of "
              << data.catalog.size() << " complaint types selected\n";
    return 0;
}

// -- train -------------------------------------------------------------------------

ordered_json cv_json(const AlgorithmSpec& spec, TargetKind kind, const CvResult& cv) {
    ordered_json j;
    j["algorithm"] = std::string(algorithm_name(spec.algorithm));
    j["target"] = std::string(target_kind_name(kind));
    if (spec.algorithm != Algorithm::Ols) {
        j["depth"] = spec.max_depth;
        if (algorithm_has_estimators(spec.algorithm))
            j["estimators"] = spec.n_estimators;
    }
    j["mean"] = {{"r_squared", cv.mean.r_squared},
                 {"mse", cv.mean.mse},
                 {"bias", cv.mean.bias},
                 {"variance", cv.mean.variance}};
    ordered_json folds = ordered_json::array();
    for (const auto& f : cv.per_fold)
        folds.push_back({{"r_squared", f.r_squared},
                         {"mse", f.mse},
                         {"bias", f.bias},
                         {"variance", f.variance}});
    j["folds"] = std::move(folds);
    return j;
}

int run_train(const TrainCmd& cmd) {
    const LoadedData data = load_inputs(cmd.stage);
    const Screened screened = run_screening(data, cmd.stage);
    const TargetKind kind = parse_target_kind(cmd.target);
    const Dataset ds =
        build_target_dataset(data, screened, kind, cmd.stage.smoothing_alpha);

    AlgorithmSpec spec;
    spec.algorithm = parse_algorithm(cmd.algorithm);
    spec.max_depth = cmd.depth;
    spec.n_estimators = cmd.estimators;

    json analytic = analytic_stage_json(cmd.stage);
    analytic["algorithm"] = cmd.algorithm;
    analytic["target"] = cmd.target;
    analytic["depth"] = cmd.depth;
    analytic["estimators"] = cmd.estimators;
    analytic["k"] = cmd.k;
    analytic["seed"] = cmd.seed;
    const std::string hash = config_hash(analytic);
    const std::string meta = meta_line(hash, cmd.seed);

    const CvResult cv = cross_validate(spec, ds, cmd.k, cmd.seed);
    auto [model, scaler] = fit_spec(spec, ds, cmd.seed, cmd.jobs);

    const fs::path dir(cmd.out_dir);
    {
        std::ostringstream s;
        write_dataset_csv(s, ds, meta);
        write_text(dir / "dataset.csv", s.str());
    }
    {
        ordered_json sj = scaler.to_json();
        attach_meta(sj, hash, cmd.seed);
        write_text(dir / "scaler.json", sj.dump(2) + "\n");
    }
    {
        ordered_json mj = model_to_json(model);
        attach_meta(mj, hash, cmd.seed);
        write_text(dir / "model.json", mj.dump() + "\n");
    }
    {
        ordered_json cj = cv_json(spec, kind, cv);
        attach_meta(cj, hash, cmd.seed);
        write_text(dir / "cv.json", cj.dump(2) + "\n");
    }
    std::cerr << "train: " << algorithm_name(spec.algorithm) << " on "
              << ds.n_rows() << " rows, mean CV R^2 = " << cv.mean.r_squared << "\n";
    return 0;
}

// -- tune --------------------------------------------------------------------------

int run_tune(const TuneCmd& cmd) {
    const LoadedData data = load_inputs(cmd.stage);
    const Screened screened = run_screening(data, cmd.stage);
    const TargetKind kind = parse_target_kind(cmd.target);
    const Dataset ds =
        build_target_dataset(data, screened, kind, cmd.stage.smoothing_alpha);

    const Algorithm algorithm = parse_algorithm(cmd.algorithm);
    if (algorithm == Algorithm::Ols)
        throw DataError("tune: OLS has no hyperparameter grid");

    json analytic = analytic_stage_json(cmd.stage);
    analytic["algorithm"] = cmd.algorithm;
    analytic["target"] = cmd.target;
    analytic["grid"] = {{"depth_min", cmd.depth_min},
                        {"depth_max", cmd.depth_max},
                        {"est_min", cmd.est_min},
                        {"est_max", cmd.est_max}};
    analytic["k"] = cmd.k;
    analytic["seed"] = cmd.seed;
    const std::string hash = config_hash(analytic);

    const GridResult grid =
        grid_search(algorithm, ds, IntRange{cmd.depth_min, cmd.depth_max},
                    IntRange{cmd.est_min, cmd.est_max}, cmd.k, cmd.seed, cmd.jobs);

    const fs::path dir(cmd.out_dir);
    {
        std::ostringstream s;
        heatmap_export(s, grid, meta_line(hash, cmd.seed));
        write_text(dir / "grid.csv", s.str());
    }
    {
        const GridCell& best = grid.best();
        ordered_json bj;
        bj["algorithm"] = std::string(algorithm_name(algorithm));
        bj["target"] = std::string(target_kind_name(kind));
        bj["depth"] = best.depth;
        if (algorithm_has_estimators(algorithm))
            bj["estimators"] = best.estimators;
        bj["r_squared"] = best.mean.r_squared;
        bj["mse"] = best.mean.mse;
        attach_meta(bj, hash, cmd.seed);
        write_text(dir / "best.json", bj.dump(2) + "\n");
    }
    std::cerr << "tune: best cell depth=" << grid.best().depth
              << " estimators=" << grid.best().estimators
              << " R^2=" << grid.best().mean.r_squared << "\n";
    return 0;
}

// -- predict -----------------------------------------------------------------------

int run_predict(const PredictCmd& cmd) {
    const Model model = model_from_json(load_json(cmd.model_path));
    const Scaler scaler =
        Scaler::from_json(ordered_json::parse(read_text(cmd.scaler_path)));
    std::istringstream in(read_text(cmd.data_path));
    const Dataset ds = read_dataset_csv(in);

    const std::vector<double> y_hat = predict(model, scaler.transform(ds.x));
    std::ostringstream out;
    out << "prediction\n";
    for (double v : y_hat)
        out << format_double(v) << "\n";
    write_text(cmd.out_path, out.str());
    std::cerr << "predict: " << y_hat.size() << " rows -> " << cmd.out_path << "\n";
    return 0;
}

// -- report ------------------------------------------------------------------------

std::vector<ChangeWindow> load_windows(const std::string& path) {
    std::vector<ChangeWindow> windows;
    for (const auto& w : load_json(path)) {
        ChangeWindow cw;
        cw.complaint_type = w.at("type").get<std::string>();
        cw.start = w.value("start", 1);
        cw.end = w.value("end", 12);
        windows.push_back(std::move(cw));
    }
    return windows;
}

int run_report(const ReportCmd& cmd) {
    const LoadedData data = load_inputs(cmd.stage);
    const Screened screened = run_screening(data, cmd.stage);
    const Dataset ds = build_target_dataset(data, screened, TargetKind::Count, 0.0);

    const Model model = model_from_json(load_json(cmd.model_path));
    const Scaler scaler =
        Scaler::from_json(ordered_json::parse(read_text(cmd.scaler_path)));

    std::vector<ChangeWindow> windows;
    if (!cmd.windows_path.empty()) {
        windows = load_windows(cmd.windows_path);
    } else {
        std::vector<std::string> selected_names;
        for (std::size_t i : screened.selected)
            selected_names.push_back(data.catalog.type_at(i));
        windows = default_change_windows(selected_names);
    }

    const auto entries =
        change_report(model, scaler, ds, data.series, data.catalog, windows);

    json analytic = analytic_stage_json(cmd.stage);
    analytic["seed"] = cmd.seed;
    const std::string hash = config_hash(analytic);

    const fs::path dir(cmd.out_dir);
    {
        std::ostringstream s;
        write_changes_csv(s, entries,
                          meta_line(hash, cmd.seed) +
                              " baseline=pre_window_monthly_mean");
        write_text(dir / "changes.csv", s.str());
    }
    {
        ordered_json cj;
        attach_meta(cj, hash, cmd.seed);
        cj["baseline"] = "pre_window_monthly_mean";
        cj["entries"] = changes_json(entries);
        write_text(dir / "changes.json", cj.dump(2) + "\n");
    }
    std::cerr << "report: " << entries.size() << " change entries\n";
    return 0;
}

// -- pipeline ----------------------------------------------------------------------

struct RunConfig {
    std::uint64_t seed = 0;
    int jobs = 1;
    double alpha = 0.05;
    int freq_threshold = 5;
    double smoothing_alpha = 0.0;
    std::vector<std::string> targets{"count"};
    std::vector<std::string> algorithms{"ols", "dt", "rf_adaboost"};
    int depth_min = 1, depth_max = 20;
    int est_min = 1, est_max = 20;
    int k = 10;
    std::string mode = "lenient";
    std::string requests_path, projects_path, whitelist_path, out_dir;
    std::optional<SynthConfig> synth;
    std::optional<std::vector<ChangeWindow>> report_windows;
};

RunConfig parse_run_config(const json& j) {
    RunConfig cfg;
    cfg.seed = j.value("seed", cfg.seed);
    cfg.jobs = j.value("jobs", cfg.jobs);
    cfg.alpha = j.value("alpha", cfg.alpha);
    cfg.freq_threshold = j.value("freq_threshold", cfg.freq_threshold);
    cfg.smoothing_alpha = j.value("smoothing_alpha", cfg.smoothing_alpha);
    if (j.contains("targets"))
        cfg.targets = j.at("targets").get<std::vector<std::string>>();
    if (j.contains("algorithms"))
        cfg.algorithms = j.at("algorithms").get<std::vector<std::string>>();
    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        cfg.depth_min = g.value("depth_min", cfg.depth_min);
        cfg.depth_max = g.value("depth_max", cfg.depth_max);
        cfg.est_min = g.value("est_min", cfg.est_min);
        cfg.est_max = g.value("est_max", cfg.est_max);
    }
    cfg.k = j.value("k", cfg.k);
    cfg.mode = j.value("mode", cfg.mode);
    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        cfg.requests_path = p.value("requests", "");
        cfg.projects_path = p.value("projects", "");
        cfg.whitelist_path = p.value("whitelist", "");
        cfg.out_dir = p.value("out_dir", "");
    }
    if (j.contains("synth"))
        cfg.synth = SynthConfig::from_json(j.at("synth"));
    if (j.contains("report_windows")) {
        std::vector<ChangeWindow> windows;
        for (const auto& w : j.at("report_windows")) {
            ChangeWindow cw;
            cw.complaint_type = w.at("type").get<std::string>();
            cw.start = w.value("start", 1);
            cw.end = w.value("end", 12);
            windows.push_back(std::move(cw));
        }
        cfg.report_windows = std::move(windows);
    }
    return cfg;
}

json analytic_run_json(const RunConfig& cfg) {
    json j;
    j["seed"] = cfg.seed;
    j["alpha"] = cfg.alpha;
    j["freq_threshold"] = cfg.freq_threshold;
    j["smoothing_alpha"] = cfg.smoothing_alpha;
    j["targets"] = cfg.targets;
    j["algorithms"] = cfg.algorithms;
    j["grid"] = {{"depth_min", cfg.depth_min},
                 {"depth_max", cfg.depth_max},
                 {"est_min", cfg.est_min},
                 {"est_max", cfg.est_max}};
    j["k"] = cfg.k;
    j["mode"] = cfg.mode;
    if (cfg.synth)
        j["synth"] = json::parse(cfg.synth->to_json().dump());
    return j;
}

int run_pipeline(const PipelineCmd& cmd) {
    RunConfig cfg = parse_run_config(load_json(cmd.config_path));
    if (cmd.seed)
        cfg.seed = *cmd.seed;
    if (cmd.jobs)
        cfg.jobs = *cmd.jobs;
    if (!cmd.out_dir.empty())
        cfg.out_dir = cmd.out_dir;
    if (cfg.out_dir.empty())
        throw CLI::ValidationError("--out",
                                   "needed unless the config sets paths.out_dir");

    const fs::path dir(cfg.out_dir);
    fs::create_directories(dir);

    // one seed governs everything, including the generator
    if (cfg.synth) {
        cfg.synth->seed = cfg.seed;
        const fs::path synth_dir = dir / "synth";
        const SynthOutput out = generate(*cfg.synth);
        const std::string synth_hash =
            config_hash(json::parse(cfg.synth->to_json().dump()));
        {
            std::ostringstream s;
            s << "# " << meta_line(synth_hash, cfg.seed) << "\n";
            write_projects(s, out.projects);
            write_text(synth_dir / "projects.csv", s.str());
        }
        {
            std::ostringstream s;
            s << "# " << meta_line(synth_hash, cfg.seed) << "\n";
            write_requests(s, out.requests);
            write_text(synth_dir / "requests.csv", s.str());
        }
        write_text(synth_dir / "whitelist.csv",
                   "# " + meta_line(synth_hash, cfg.seed) + "\n" + out.whitelist_csv);
        ordered_json manifest = out.manifest;
        attach_meta(manifest, synth_hash, cfg.seed);
        write_text(synth_dir / "manifest.json", manifest.dump(2) + "\n");

        cfg.requests_path = (synth_dir / "requests.csv").string();
        cfg.projects_path = (synth_dir / "projects.csv").string();
        cfg.whitelist_path = (synth_dir / "whitelist.csv").string();
        std::cerr << "pipeline: generated " << out.requests.size()
                  << " synthetic requests\n";
    }
    if (cfg.requests_path.empty() || cfg.projects_path.empty() ||
        cfg.whitelist_path.empty())
        throw DataError("pipeline config needs paths.requests/projects/whitelist "
                        "or a synth block");

    StageOptions stage;
    stage.requests_path = cfg.requests_path;
    stage.projects_path = cfg.projects_path;
    stage.whitelist_path = cfg.whitelist_path;
    stage.mode = parse_mode(cfg.mode);
    stage.alpha = cfg.alpha;
    stage.freq_threshold = cfg.freq_threshold;
    stage.smoothing_alpha = cfg.smoothing_alpha;

    const std::string hash = config_hash(analytic_run_json(cfg));
    const std::string meta = meta_line(hash, cfg.seed);

    const LoadedData data = load_inputs(stage);
    write_text(dir / "ingest_report.json",
               ingest_report_file(data.ingest_report, hash, cfg.seed));

    const Screened screened = run_screening(data, stage);
    {
        std::ostringstream s;
        write_screening_csv(s, screened.outcomes, meta);
        write_text(dir / "screening.csv", s.str());
    }
    std::cerr << "pipeline: " << screened.selected.size() << " of "
              << data.catalog.size() << " complaint types selected\n";

    std::vector<AlgorithmScore> comparison;
    std::optional<std::pair<Algorithm, GridCell>> best_count_model;

    for (const std::string& target : cfg.targets) {
        const TargetKind kind = parse_target_kind(target);
        const Dataset ds =
            build_target_dataset(data, screened, kind, cfg.smoothing_alpha);
        const std::string kind_tag(target_kind_name(kind));
        {
            std::ostringstream s;
            write_dataset_csv(s, ds, meta);
            write_text(dir / ("dataset_" + kind_tag + ".csv"), s.str());
        }
        {
            ordered_json sj = Scaler::fit(ds.x, ds.feature_names).to_json();
            attach_meta(sj, hash, cfg.seed);
            write_text(dir / ("scaler_" + kind_tag + ".json"), sj.dump(2) + "\n");
        }

        std::vector<GridResult> grids;
        std::optional<CvResult> ols_cv;
        for (const std::string& algo_name : cfg.algorithms) {
            const Algorithm algorithm = parse_algorithm(algo_name);
            if (algorithm == Algorithm::Ols) {
                AlgorithmSpec spec;
                spec.algorithm = Algorithm::Ols;
                ols_cv = cross_validate(spec, ds, cfg.k, cfg.seed);
                std::cerr << "pipeline: ols " << kind_tag
                          << " R^2=" << ols_cv->mean.r_squared << "\n";
                continue;
            }
            GridResult grid = grid_search(
                algorithm, ds, IntRange{cfg.depth_min, cfg.depth_max},
                IntRange{cfg.est_min, cfg.est_max}, cfg.k, cfg.seed, cfg.jobs);
            {
                std::ostringstream s;
                heatmap_export(s, grid, meta);
                write_text(dir / ("grid_" + algo_name + "_" + kind_tag + ".csv"),
                           s.str());
            }
            std::cerr << "pipeline: " << algo_name << " " << kind_tag
                      << " best depth=" << grid.best().depth
                      << " estimators=" << grid.best().estimators
                      << " R^2=" << grid.best().mean.r_squared << "\n";
            grids.push_back(std::move(grid));
        }

        const auto ranked = select_best(grids, ols_cv, kind);
        comparison.insert(comparison.end(), ranked.begin(), ranked.end());

        if (kind == TargetKind::Count)
            for (const auto& row : ranked)
                if (row.algorithm != Algorithm::Ols) {
                    best_count_model = {row.algorithm,
                                        GridCell{row.depth, row.estimators, {}}};
                    break;
                }
    }

    {
        std::ostringstream s;
        write_comparison_csv(s, comparison, meta);
        write_text(dir / "comparison.csv", s.str());
        ordered_json cj;
        attach_meta(cj, hash, cfg.seed);
        cj["rows"] = comparison_json(comparison);
        write_text(dir / "comparison.json", cj.dump(2) + "\n");
    }

    // decision-facing change table from the best count model
    if (best_count_model) {
        const Dataset ds =
            build_target_dataset(data, screened, TargetKind::Count, 0.0);
        AlgorithmSpec spec;
        spec.algorithm = best_count_model->first;
        spec.max_depth = best_count_model->second.depth;
        spec.n_estimators = std::max(1, best_count_model->second.estimators);
        auto [model, scaler] = fit_spec(spec, ds, cfg.seed, cfg.jobs);
        {
            ordered_json mj = model_to_json(model);
            attach_meta(mj, hash, cfg.seed);
            write_text(dir / "model_count.json", mj.dump() + "\n");
        }

        std::vector<ChangeWindow> windows;
        if (cfg.report_windows) {
            windows = *cfg.report_windows;
        } else {
            std::vector<std::string> names;
            for (std::size_t i : screened.selected)
                names.push_back(data.catalog.type_at(i));
            windows = default_change_windows(names);
        }
        const auto entries =
            change_report(model, scaler, ds, data.series, data.catalog, windows);
        {
            std::ostringstream s;
            write_changes_csv(s, entries, meta + " baseline=pre_window_monthly_mean");
            write_text(dir / "changes.csv", s.str());
            ordered_json cj;
            attach_meta(cj, hash, cfg.seed);
            cj["baseline"] = "pre_window_monthly_mean";
            cj["entries"] = changes_json(entries);
            write_text(dir / "changes.json", cj.dump(2) + "\n");
        }
        std::cerr << "pipeline: change report with " << entries.size()
                  << " entries\n";
    }

    std::cerr << "pipeline: artifacts in " << dir << "\n";
    return 0;
}

} // namespace cimpact::cli

int main(int argc, char** argv) {
    using namespace cimpact;
    using namespace cimpact::cli;

    CLI::App app{"Construction-impact prediction toolkit over 311-style "
                 "service-request data"};
    app.require_subcommand(1);

    SynthCmd synth_cmd;
    auto* synth = app.add_subcommand(
        "synth", "Generate seeded synthetic projects/requests with known effects");
    synth->add_option("--config", synth_cmd.config_path, "Synth config JSON")
        ->required();
    synth->add_option("--out", synth_cmd.out_dir, "Output directory")->required();
    synth->add_option("--seed", synth_cmd.seed, "Override the config seed");

    IngestCmd ingest_cmd;
    auto* ingest = app.add_subcommand(
        "ingest", "Parse and validate request/project CSVs, or fetch remotely");
    ingest->add_option("--requests", ingest_cmd.requests_path, "311-export CSV");
    ingest->add_option("--url", ingest_cmd.url,
                       "Open-data endpoint with offset/limit paging");
    ingest->add_option("--filter", ingest_cmd.filters,
                       "key=value query filter (repeatable)");
    ingest->add_option("--page-size", ingest_cmd.page_size, "Rows per page")
        ->default_val(1000);
    ingest->add_option("--projects", ingest_cmd.projects_path, "Projects CSV");
    ingest->add_option("--mode", ingest_cmd.mode, "strict or lenient")
        ->default_val("lenient");
    ingest->add_option("--report", ingest_cmd.report_path,
                       "Write the ingest report JSON here instead of stderr");
    ingest->add_option("--normalized", ingest_cmd.normalized_path,
                       "Write the parsed rows back out in canonical form");

    auto add_stage_options = [](CLI::App* cmd, StageOptions& stage) {
        cmd->add_option("--requests", stage.requests_path, "311-export CSV")
            ->required();
        cmd->add_option("--projects", stage.projects_path, "Projects CSV")
            ->required();
        cmd->add_option("--whitelist", stage.whitelist_path,
                        "complaint_type,qol_indicator CSV")
            ->required();
        cmd->add_option("--alpha", stage.alpha, "Significance level")
            ->default_val(0.05);
        cmd->add_option("--freq-threshold", stage.freq_threshold,
                        "Select types present in strictly more projects than this")
            ->default_val(5);
        cmd->add_option("--smoothing", stage.smoothing_alpha,
                        "Additive smoothing for the log ratio target")
            ->default_val(0.0);
    };
    auto add_mode_option = [](CLI::App* cmd, StageOptions& stage) {
        cmd->add_option_function<std::string>(
               "--mode", [&stage](const std::string& m) { stage.mode = parse_mode(m); },
               "strict or lenient")
            ->default_val("lenient");
    };

    SelectCmd select_cmd;
    auto* select = app.add_subcommand(
        "select", "Screen complaint types (t-test, frequency, mapping)");
    add_stage_options(select, select_cmd.stage);
    add_mode_option(select, select_cmd.stage);
    select->add_option("--out", select_cmd.out_dir, "Output directory")->required();
    select->add_option("--seed", select_cmd.seed, "Run seed")->default_val(0);

    TrainCmd train_cmd;
    auto* train = app.add_subcommand(
        "train", "Fit one model with fixed hyperparameters and score it by CV");
    add_stage_options(train, train_cmd.stage);
    add_mode_option(train, train_cmd.stage);
    train->add_option("--algorithm", train_cmd.algorithm,
                      "ols | dt | rf | rf_adaboost")
        ->default_val("rf_adaboost");
    train->add_option("--target", train_cmd.target, "count | log_ratio")
        ->default_val("count");
    train->add_option("--depth", train_cmd.depth, "Tree depth")->default_val(8);
    train->add_option("--estimators", train_cmd.estimators, "Ensemble size")
        ->default_val(12);
    train->add_option("--k", train_cmd.k, "Cross-validation folds")->default_val(10);
    train->add_option("--seed", train_cmd.seed, "Run seed")->default_val(0);
    train->add_option("--jobs", train_cmd.jobs, "Worker threads")->default_val(1);
    train->add_option("--out", train_cmd.out_dir, "Output directory")->required();

    TuneCmd tune_cmd;
    auto* tune = app.add_subcommand(
        "tune", "Grid-search depth/estimators by k-fold cross validation");
    add_stage_options(tune, tune_cmd.stage);
    add_mode_option(tune, tune_cmd.stage);
    tune->add_option("--algorithm", tune_cmd.algorithm, "dt | rf | rf_adaboost")
        ->default_val("rf_adaboost");
    tune->add_option("--target", tune_cmd.target, "count | log_ratio")
        ->default_val("count");
    tune->add_option("--depth-min", tune_cmd.depth_min)->default_val(1);
    tune->add_option("--depth-max", tune_cmd.depth_max)->default_val(20);
    tune->add_option("--est-min", tune_cmd.est_min)->default_val(1);
    tune->add_option("--est-max", tune_cmd.est_max)->default_val(20);
    tune->add_option("--k", tune_cmd.k, "Cross-validation folds")->default_val(10);
    tune->add_option("--seed", tune_cmd.seed, "Run seed")->default_val(0);
    tune->add_option("--jobs", tune_cmd.jobs, "Worker threads")->default_val(1);
    tune->add_option("--out", tune_cmd.out_dir, "Output directory")->required();

    PredictCmd predict_cmd;
    auto* predict = app.add_subcommand(
        "predict", "Apply a persisted model to a featurized dataset CSV");
    predict->add_option("--model", predict_cmd.model_path, "model.json")->required();
    predict->add_option("--scaler", predict_cmd.scaler_path, "scaler.json")
        ->required();
    predict->add_option("--data", predict_cmd.data_path, "dataset CSV")->required();
    predict->add_option("--out", predict_cmd.out_path, "Predictions CSV")->required();

    ReportCmd report_cmd;
    auto* report = app.add_subcommand(
        "report", "Predicted-vs-actual percentage change per complaint type");
    add_stage_options(report, report_cmd.stage);
    add_mode_option(report, report_cmd.stage);
    report->add_option("--model", report_cmd.model_path, "Count-target model JSON")
        ->required();
    report->add_option("--scaler", report_cmd.scaler_path, "Scaler JSON")->required();
    report->add_option("--windows", report_cmd.windows_path,
                       "JSON list of {type, start, end} windows");
    report->add_option("--seed", report_cmd.seed, "Run seed")->default_val(0);
    report->add_option("--out", report_cmd.out_dir, "Output directory")->required();

    PipelineCmd pipeline_cmd;
    auto* pipeline = app.add_subcommand(
        "pipeline", "End to end: (synth) -> ingest -> select -> tune -> report");
    pipeline->add_option("--config", pipeline_cmd.config_path, "Run config JSON")
        ->required();
    pipeline->add_option("--out", pipeline_cmd.out_dir,
                         "Output directory (overrides paths.out_dir)");
    pipeline->add_option("--seed", pipeline_cmd.seed, "Override the config seed");
    pipeline->add_option("--jobs", pipeline_cmd.jobs, "Override the worker count");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 1;
    }

    try {
        if (app.got_subcommand(synth))
            return run_synth(synth_cmd);
        if (app.got_subcommand(ingest))
            return run_ingest(ingest_cmd);
        if (app.got_subcommand(select))
            return run_select(select_cmd);
        if (app.got_subcommand(train))
            return run_train(train_cmd);
        if (app.got_subcommand(tune))
            return run_tune(tune_cmd);
        if (app.got_subcommand(predict))
            return run_predict(predict_cmd);
        if (app.got_subcommand(report))
            return run_report(report_cmd);
        if (app.got_subcommand(pipeline))
            return run_pipeline(pipeline_cmd);
    } catch (const CLI::ParseError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const DataError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 3;
    }
    return 1;
}
