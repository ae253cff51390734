#pragma once

#include "cimpact/core.hpp"
#include "cimpact/features.hpp"

#include <json.hpp>

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace cimpact {

struct SynthType {
    std::string name;
    double lambda = 1.0; // Poisson mean per project-month, before multipliers
    QoLIndicator indicator = QoLIndicator::Environment;
};

/// Multiplies a type's rate inside a post-start month window (months 1..12
/// after the start). Several effects on one type compound.
struct PlantedEffect {
    std::string type;
    double lift = 1.0;
    int window_start = 1;
    int window_end = 12;
};

struct SynthConfig {
    int n_projects = 10;
    int zip_start = 10001; // project p gets zip zip_start + p
    Date start_min = make_date(2015, 1, 1);
    Date start_max = make_date(2016, 12, 31);
    int duration_min_months = 12;
    int duration_max_months = 36;
    std::vector<SynthType> types;
    std::vector<PlantedEffect> planted;
    double project_mult_min = 1.0; // per-project heterogeneity range
    double project_mult_max = 1.0;
    std::uint64_t seed = 0;

    nlohmann::ordered_json to_json() const;
    static SynthConfig from_json(const nlohmann::json& j);
};

struct SynthOutput {
    std::vector<ConstructionProject> projects;
    std::vector<double> multipliers; // parallel to projects
    std::vector<ServiceRequest> requests;
    nlohmann::ordered_json manifest;
    std::string whitelist_csv;
};

/// Draws every (project, type, month) count from Poisson(lambda * project
/// multiplier * planted lift) and expands counts into dated request rows
/// uniform within the month, in the exact ingest CSV dialects. Byte
/// deterministic for a given config.
SynthOutput generate(const SynthConfig& config);

/// Closed-form means, no sampling: [project][type][month 0..23].
std::vector<std::vector<std::array<double, 24>>>
oracle_expectations(const SynthConfig& config);

/// R^2 of predicting each count target by its true generating mean; the
/// ceiling any fitted model is measured against. Count targets only.
double oracle_r2(const Dataset& dataset, const SynthConfig& config,
                 const ComplaintCatalog& catalog);

} // namespace cimpact
