#pragma once

#include "cimpact/core.hpp"
#include "cimpact/features.hpp"
#include "cimpact/stats.hpp"

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cimpact {

/// Result of the three-gate screening for one complaint type: significance,
/// project frequency, and indicator mapping.
struct ScreeningOutcome {
    std::string complaint_type;
    std::optional<TTestResult> t_test; // absent when the sample is degenerate
    int project_frequency = 0;
    bool passed_mapping = false;
    bool selected = false;
};

/// Welch test of the pooled post-window monthly counts (t in 13..24 across
/// all projects) against the pooled pre-window counts (t in 1..12).
/// Throws DegenerateSample when the pooled samples carry no variance.
TTestResult screen_type(std::size_t type_index, std::span<const ProjectSeries> projects,
                        double alpha);

/// Number of projects whose post-window total for this type is nonzero.
int project_frequency(std::size_t type_index, std::span<const ProjectSeries> projects);

/// Applies all three gates over the catalog, in catalog order. A type is
/// selected iff p < alpha, frequency > freq_threshold (strict) and the type
/// maps to a QoL indicator.
std::vector<ScreeningOutcome> select_types(std::span<const ProjectSeries> projects,
                                           const ComplaintCatalog& catalog,
                                           const Whitelist& whitelist, double alpha,
                                           int freq_threshold);

std::vector<std::size_t> selected_indices(std::span<const ScreeningOutcome> outcomes,
                                          const ComplaintCatalog& catalog);

/// CSV columns: type,t,df,p,frequency,mapping,selected.
void write_screening_csv(std::ostream& out, std::span<const ScreeningOutcome> outcomes,
                         std::string_view meta = {});

} // namespace cimpact
