#include "cimpact/synth.hpp"

#include "cimpact/csv.hpp"
#include "cimpact/errors.hpp"
#include "cimpact/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

namespace cimpact {

namespace {

constexpr std::uint64_t kTagProject = 0x70726f6a;
constexpr std::uint64_t kTagMult = 0x6d756c74;
constexpr std::uint64_t kTagEvents = 0x65767473;

std::string zip_for(const SynthConfig& cfg, int p) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%05d", cfg.zip_start + p);
    return buf;
}

double lift_for(const SynthConfig& cfg, const std::string& type, int t) {
    if (t < AnalysisWindow::kFirstPostMonth)
        return 1.0;
    const int post_month = t - 12;
    double lift = 1.0;
    for (const auto& e : cfg.planted)
        if (e.type == type && post_month >= e.window_start && post_month <= e.window_end)
            lift *= e.lift;
    return lift;
}

std::vector<ConstructionProject> draw_projects(const SynthConfig& cfg) {
    const long span_days = days_between(cfg.start_min, cfg.start_max);
    if (span_days < 0)
        throw DataError("synth: start_min after start_max");
    std::vector<ConstructionProject> projects;
    projects.reserve(static_cast<std::size_t>(cfg.n_projects));
    for (int p = 0; p < cfg.n_projects; ++p) {
        Rng rng = Rng::derive(cfg.seed, {kTagProject, static_cast<std::uint64_t>(p)});
        const Date start = add_days(
            cfg.start_min, static_cast<long>(rng.uniform_below(
                               static_cast<std::uint64_t>(span_days) + 1)));
        const int dur_span = cfg.duration_max_months - cfg.duration_min_months;
        const int duration =
            cfg.duration_min_months +
            (dur_span > 0 ? static_cast<int>(rng.uniform_below(
                                static_cast<std::uint64_t>(dur_span) + 1))
                          : 0);
        projects.push_back(ConstructionProject{p + 1, start, duration, zip_for(cfg, p)});
    }
    return projects;
}

std::vector<double> draw_multipliers(const SynthConfig& cfg) {
    std::vector<double> mult(static_cast<std::size_t>(cfg.n_projects));
    for (int p = 0; p < cfg.n_projects; ++p) {
        Rng rng = Rng::derive(cfg.seed, {kTagMult, static_cast<std::uint64_t>(p)});
        mult[static_cast<std::size_t>(p)] =
            rng.uniform(cfg.project_mult_min, cfg.project_mult_max);
    }
    return mult;
}

} // namespace

std::vector<std::vector<std::array<double, 24>>>
oracle_expectations(const SynthConfig& cfg) {
    const std::vector<double> mult = draw_multipliers(cfg);
    std::vector<std::vector<std::array<double, 24>>> means(
        static_cast<std::size_t>(cfg.n_projects));
    for (int p = 0; p < cfg.n_projects; ++p) {
        auto& per_type = means[static_cast<std::size_t>(p)];
        per_type.resize(cfg.types.size());
        for (std::size_t i = 0; i < cfg.types.size(); ++i)
            for (int t = 1; t <= 24; ++t)
                per_type[i][static_cast<std::size_t>(t - 1)] =
                    cfg.types[i].lambda * mult[static_cast<std::size_t>(p)] *
                    lift_for(cfg, cfg.types[i].name, t);
    }
    return means;
}

SynthOutput generate(const SynthConfig& cfg) {
    if (cfg.n_projects < 1 || cfg.types.empty())
        throw DataError("synth: need at least one project and one type");
    if (cfg.duration_min_months < 1 || cfg.duration_max_months < cfg.duration_min_months)
        throw DataError("synth: bad duration range");
    if (cfg.project_mult_min <= 0.0 || cfg.project_mult_max < cfg.project_mult_min)
        throw DataError("synth: bad project multiplier range");
    if (cfg.zip_start < 0 || cfg.zip_start + cfg.n_projects - 1 > 99999)
        throw DataError("synth: zip range must stay within 5 digits");
    for (const auto& ty : cfg.types)
        if (ty.lambda < 0.0)
            throw DataError("synth: lambda must be >= 0 for " + ty.name);
    for (const auto& e : cfg.planted)
        if (e.lift <= 0.0 || e.window_start < 1 || e.window_end > 12 ||
            e.window_start > e.window_end)
            throw DataError("synth: bad planted effect for " + e.type);

    SynthOutput out;
    out.projects = draw_projects(cfg);
    out.multipliers = draw_multipliers(cfg);
    const auto means = oracle_expectations(cfg);

    long next_key = 1000001;
    for (int p = 0; p < cfg.n_projects; ++p) {
        const ConstructionProject& project = out.projects[static_cast<std::size_t>(p)];
        const AnalysisWindow window = expand_window(project);
        for (std::size_t i = 0; i < cfg.types.size(); ++i) {
            Rng rng = Rng::derive(cfg.seed, {kTagEvents, static_cast<std::uint64_t>(p),
                                             static_cast<std::uint64_t>(i)});
            for (int t = 1; t <= 24; ++t) {
                const double mean =
                    means[static_cast<std::size_t>(p)][i][static_cast<std::size_t>(t - 1)];
                const std::int64_t k = rng.poisson(mean);
                const long interval_days =
                    days_between(window.month_start(t), window.month_end(t));
                for (std::int64_t e = 0; e < k; ++e) {
                    const long offset = static_cast<long>(rng.uniform_below(
                        static_cast<std::uint64_t>(interval_days)));
                    out.requests.push_back(ServiceRequest{
                        std::to_string(next_key++),
                        add_days(window.month_start(t), offset), "SYNTH",
                        cfg.types[i].name, cfg.types[i].name, project.zip, "SYNTH"});
                }
            }
        }
    }

    // whitelist in config order
    std::ostringstream wl;
    wl << "complaint_type,qol_indicator\n";
    for (const auto& ty : cfg.types)
        wl << csv_join({ty.name, std::string(indicator_name(ty.indicator))}) << "\n";
    out.whitelist_csv = wl.str();

    nlohmann::ordered_json manifest;
    manifest["seed"] = cfg.seed;
    manifest["config"] = cfg.to_json();
    nlohmann::ordered_json projects_json = nlohmann::ordered_json::array();
    for (int p = 0; p < cfg.n_projects; ++p) {
        const auto& pr = out.projects[static_cast<std::size_t>(p)];
        projects_json.push_back({{"id", pr.id},
                                 {"zip", pr.zip},
                                 {"start", format_date_iso(pr.start_date)},
                                 {"duration_months", pr.duration_months},
                                 {"multiplier", out.multipliers[static_cast<std::size_t>(p)]}});
    }
    manifest["projects"] = std::move(projects_json);
    nlohmann::ordered_json means_json = nlohmann::ordered_json::array();
    for (const auto& per_type : means) {
        nlohmann::ordered_json tj = nlohmann::ordered_json::array();
        for (const auto& row : per_type)
            tj.push_back(row);
        means_json.push_back(std::move(tj));
    }
    manifest["expected_means"] = std::move(means_json);
    out.manifest = std::move(manifest);
    return out;
}

double oracle_r2(const Dataset& dataset, const SynthConfig& cfg,
                 const ComplaintCatalog& catalog) {
    if (dataset.target_kind != TargetKind::Count)
        throw DataError("oracle_r2 is defined for count targets only");
    if (dataset.keys.size() != dataset.n_rows())
        throw DataError("oracle_r2 needs row keys (in-memory dataset)");

    const auto means = oracle_expectations(cfg);
    std::vector<std::size_t> config_index(catalog.size(),
                                          std::numeric_limits<std::size_t>::max());
    for (std::size_t c = 0; c < catalog.size(); ++c)
        for (std::size_t i = 0; i < cfg.types.size(); ++i)
            if (cfg.types[i].name == catalog.type_at(c))
                config_index[c] = i;

    double y_mean = 0.0;
    for (double y : dataset.targets)
        y_mean += y;
    y_mean /= static_cast<double>(dataset.targets.size());

    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t r = 0; r < dataset.n_rows(); ++r) {
        const RowKey& key = dataset.keys[r];
        const std::size_t i = config_index[key.type_index];
        if (i == std::numeric_limits<std::size_t>::max())
            throw DataError("oracle_r2: catalog type missing from synth config: " +
                            catalog.type_at(key.type_index));
        const double mu = means[static_cast<std::size_t>(key.project_id - 1)][i]
                               [static_cast<std::size_t>(key.month_t - 1)];
        const double y = dataset.targets[r];
        ss_res += (y - mu) * (y - mu);
        ss_tot += (y - y_mean) * (y - y_mean);
    }
    if (ss_tot == 0.0)
        throw ZeroVarianceTarget();
    return 1.0 - ss_res / ss_tot;
}

nlohmann::ordered_json SynthConfig::to_json() const {
    nlohmann::ordered_json j;
    j["n_projects"] = n_projects;
    j["zip_start"] = zip_start;
    j["start_min"] = format_date_iso(start_min);
    j["start_max"] = format_date_iso(start_max);
    j["duration_min_months"] = duration_min_months;
    j["duration_max_months"] = duration_max_months;
    j["project_mult_min"] = project_mult_min;
    j["project_mult_max"] = project_mult_max;
    j["seed"] = seed;
    nlohmann::ordered_json types_json = nlohmann::ordered_json::array();
    for (const auto& t : types)
        types_json.push_back({{"name", t.name},
                              {"lambda", t.lambda},
                              {"indicator", std::string(indicator_name(t.indicator))}});
    j["types"] = std::move(types_json);
    nlohmann::ordered_json planted_json = nlohmann::ordered_json::array();
    for (const auto& e : planted)
        planted_json.push_back({{"type", e.type},
                                {"lift", e.lift},
                                {"window_start", e.window_start},
                                {"window_end", e.window_end}});
    j["planted"] = std::move(planted_json);
    return j;
}

SynthConfig SynthConfig::from_json(const nlohmann::json& j) {
    SynthConfig cfg;
    cfg.n_projects = j.value("n_projects", cfg.n_projects);
    cfg.zip_start = j.value("zip_start", cfg.zip_start);
    if (j.contains("start_min")) {
        auto d = parse_date(j.at("start_min").get<std::string>());
        if (!d)
            throw MalformedDate(j.at("start_min").get<std::string>());
        cfg.start_min = *d;
    }
    if (j.contains("start_max")) {
        auto d = parse_date(j.at("start_max").get<std::string>());
        if (!d)
            throw MalformedDate(j.at("start_max").get<std::string>());
        cfg.start_max = *d;
    }
    cfg.duration_min_months = j.value("duration_min_months", cfg.duration_min_months);
    cfg.duration_max_months = j.value("duration_max_months", cfg.duration_max_months);
    cfg.project_mult_min = j.value("project_mult_min", cfg.project_mult_min);
    cfg.project_mult_max = j.value("project_mult_max", cfg.project_mult_max);
    cfg.seed = j.value("seed", cfg.seed);
    if (j.contains("types"))
        for (const auto& tj : j.at("types")) {
            SynthType t;
            t.name = tj.at("name").get<std::string>();
            t.lambda = tj.value("lambda", 1.0);
            if (tj.contains("indicator")) {
                auto q = parse_indicator(tj.at("indicator").get<std::string>());
                if (!q)
                    throw DataError("synth config: unknown indicator '" +
                                    tj.at("indicator").get<std::string>() + "'");
                t.indicator = *q;
            }
            cfg.types.push_back(std::move(t));
        }
    if (j.contains("planted"))
        for (const auto& ej : j.at("planted")) {
            PlantedEffect e;
            e.type = ej.at("type").get<std::string>();
            e.lift = ej.value("lift", 1.0);
            e.window_start = ej.value("window_start", 1);
            e.window_end = ej.value("window_end", 12);
            cfg.planted.push_back(std::move(e));
        }
    return cfg;
}

} // namespace cimpact
