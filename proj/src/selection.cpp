#include "cimpact/selection.hpp"

#include "cimpact/csv.hpp"
#include "cimpact/errors.hpp"

#include <ostream>

namespace cimpact {

TTestResult screen_type(std::size_t type_index, std::span<const ProjectSeries> projects,
                        double alpha) {
    std::vector<double> pre, post;
    pre.reserve(projects.size() * 12);
    post.reserve(projects.size() * 12);
    for (const auto& ps : projects) {
        const MonthlySeries& s = ps.series[type_index];
        for (int t = 1; t <= 12; ++t)
            pre.push_back(static_cast<double>(s.count_at(t)));
        for (int t = 13; t <= 24; ++t)
            post.push_back(static_cast<double>(s.count_at(t)));
    }
    return welch_t_test(pre, post, alpha);
}

int project_frequency(std::size_t type_index, std::span<const ProjectSeries> projects) {
    int freq = 0;
    for (const auto& ps : projects)
        if (ps.series[type_index].post_total() > 0)
            ++freq;
    return freq;
}

std::vector<ScreeningOutcome> select_types(std::span<const ProjectSeries> projects,
                                           const ComplaintCatalog& catalog,
                                           const Whitelist& whitelist, double alpha,
                                           int freq_threshold) {
    std::vector<ScreeningOutcome> outcomes;
    outcomes.reserve(catalog.size());
    for (std::size_t i = 0; i < catalog.size(); ++i) {
        ScreeningOutcome o;
        o.complaint_type = catalog.type_at(i);
        o.project_frequency = project_frequency(i, projects);
        o.passed_mapping = whitelist.contains(o.complaint_type);
        try {
            o.t_test = screen_type(i, projects, alpha);
        } catch (const DegenerateSample&) {
            // cannot be screened; stays unselected
        }
        o.selected = o.t_test && o.t_test->significant &&
                     o.project_frequency > freq_threshold && o.passed_mapping;
        outcomes.push_back(std::move(o));
    }
    return outcomes;
}

std::vector<std::size_t> selected_indices(std::span<const ScreeningOutcome> outcomes,
                                          const ComplaintCatalog& catalog) {
    std::vector<std::size_t> idx;
    for (const auto& o : outcomes)
        if (o.selected)
            if (auto i = catalog.index_of(o.complaint_type))
                idx.push_back(*i);
    return idx;
}

void write_screening_csv(std::ostream& out, std::span<const ScreeningOutcome> outcomes,
                         std::string_view meta) {
    if (!meta.empty())
        out << "# " << meta << '\n';
    out << "type,t,df,p,frequency,mapping,selected\n";
    for (const auto& o : outcomes) {
        CsvRow row;
        row.push_back(o.complaint_type);
        if (o.t_test) {
            row.push_back(format_double(o.t_test->t_statistic));
            row.push_back(format_double(o.t_test->degrees_of_freedom));
            row.push_back(format_double(o.t_test->p_value));
        } else {
            row.insert(row.end(), {"", "", ""});
        }
        row.push_back(std::to_string(o.project_frequency));
        row.push_back(o.passed_mapping ? "1" : "0");
        row.push_back(o.selected ? "1" : "0");
        out << csv_join(row) << '\n';
    }
}

} // namespace cimpact
