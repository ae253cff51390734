#include "cimpact/evaluate.hpp"

#include "cimpact/errors.hpp"
#include "cimpact/parallel.hpp"
#include "cimpact/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cimpact {

namespace {
constexpr std::uint64_t kTagFolds = 0x6b666f6c;
constexpr std::uint64_t kTagFit = 0x66697421;

ScoreSet score_impl(std::span<const double> y, std::span<const double> y_hat,
                    bool allow_zero_variance) {
    const std::size_t n = y.size();
    if (n == 0 || y_hat.size() != n)
        throw DimensionMismatch("score: need equal, nonzero lengths");

    double y_mean = 0.0;
    for (double v : y)
        y_mean += v;
    y_mean /= static_cast<double>(n);

    double ss_tot = 0.0, ss_res = 0.0, err_sum = 0.0, err_sq_sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y_hat[i] - y[i];
        ss_res += e * e;
        ss_tot += (y[i] - y_mean) * (y[i] - y_mean);
        err_sum += e;
        err_sq_sum += e * e;
    }

    ScoreSet s;
    s.mse = err_sq_sum / static_cast<double>(n);
    s.bias = err_sum / static_cast<double>(n);
    s.variance = s.mse - s.bias * s.bias; // population variance of errors
    if (s.variance < 0.0)
        s.variance = 0.0;
    if (ss_tot == 0.0) {
        if (!allow_zero_variance)
            throw ZeroVarianceTarget();
        s.r_squared = std::numeric_limits<double>::quiet_NaN();
    } else {
        s.r_squared = 1.0 - ss_res / ss_tot;
    }
    return s;
}

} // namespace

ScoreSet score(std::span<const double> y, std::span<const double> y_hat) {
    return score_impl(y, y_hat, false);
}

std::vector<std::vector<int>> kfold(std::size_t n, int k, std::uint64_t seed) {
    if (k < 1 || n < static_cast<std::size_t>(k))
        throw TooFewRows("kfold: need at least k=" + std::to_string(k) + " rows, got " +
                         std::to_string(n));
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = Rng::derive(seed, {kTagFolds});
    rng.shuffle(idx);

    std::vector<std::vector<int>> folds(static_cast<std::size_t>(k));
    const std::size_t base = n / static_cast<std::size_t>(k);
    const std::size_t extra = n % static_cast<std::size_t>(k);
    std::size_t pos = 0;
    for (std::size_t f = 0; f < static_cast<std::size_t>(k); ++f) {
        const std::size_t len = base + (f < extra ? 1 : 0);
        folds[f].assign(idx.begin() + pos, idx.begin() + pos + len);
        pos += len;
    }
    return folds;
}

std::string_view algorithm_name(Algorithm a) {
    switch (a) {
    case Algorithm::Ols:
        return "ols";
    case Algorithm::DecisionTree:
        return "dt";
    case Algorithm::RandomForest:
        return "rf";
    case Algorithm::RfAdaboost:
        return "rf_adaboost";
    }
    return "ols";
}

Algorithm parse_algorithm(std::string_view name) {
    if (name == "ols")
        return Algorithm::Ols;
    if (name == "dt" || name == "decision_tree")
        return Algorithm::DecisionTree;
    if (name == "rf" || name == "random_forest")
        return Algorithm::RandomForest;
    if (name == "rf_adaboost" || name == "adaboost")
        return Algorithm::RfAdaboost;
    throw DataError("unknown algorithm: '" + std::string(name) + "'");
}

bool algorithm_has_estimators(Algorithm a) {
    return a == Algorithm::RandomForest || a == Algorithm::RfAdaboost;
}

std::pair<Model, Scaler> fit_spec(const AlgorithmSpec& spec, const Dataset& dataset,
                                  std::uint64_t seed, int jobs) {
    Scaler scaler = Scaler::fit(dataset.x, dataset.feature_names);
    Matrix xs = scaler.transform(dataset.x);
    switch (spec.algorithm) {
    case Algorithm::Ols:
        return {ols_fit(xs, dataset.targets), std::move(scaler)};
    case Algorithm::DecisionTree: {
        TreeFitParams p;
        p.max_depth = spec.max_depth;
        return {tree_fit(xs, dataset.targets, p), std::move(scaler)};
    }
    case Algorithm::RandomForest: {
        ForestFitParams p;
        p.n_estimators = spec.n_estimators;
        p.max_depth = spec.max_depth;
        return {forest_fit(xs, dataset.targets, p, seed, jobs), std::move(scaler)};
    }
    case Algorithm::RfAdaboost: {
        AdaboostFitParams p;
        p.n_estimators = spec.n_estimators;
        p.max_depth = spec.max_depth;
        p.loss = spec.loss;
        return {adaboost_fit(xs, dataset.targets, p, seed), std::move(scaler)};
    }
    }
    throw Error("fit_spec: unreachable");
}

CvResult cross_validate(const AlgorithmSpec& spec, const Dataset& dataset, int k,
                        std::uint64_t seed) {
    const std::size_t n = dataset.n_rows();
    const auto folds = kfold(n, k, seed);

    CvResult result;
    result.per_fold.reserve(folds.size());

    std::vector<char> in_fold(n);
    for (std::size_t f = 0; f < folds.size(); ++f) {
        std::fill(in_fold.begin(), in_fold.end(), 0);
        for (int i : folds[f])
            in_fold[static_cast<std::size_t>(i)] = 1;

        std::vector<int> train_idx;
        train_idx.reserve(n - folds[f].size());
        for (std::size_t i = 0; i < n; ++i)
            if (!in_fold[i])
                train_idx.push_back(static_cast<int>(i));

        Dataset train;
        train.feature_names = dataset.feature_names;
        train.target_kind = dataset.target_kind;
        train.x = dataset.x.select_rows(train_idx);
        train.targets.reserve(train_idx.size());
        for (int i : train_idx)
            train.targets.push_back(dataset.targets[static_cast<std::size_t>(i)]);

        try {
            auto [model, scaler] =
                fit_spec(spec, train, Rng::derive(seed, {kTagFit, f}).next_u64(), 1);

            Matrix test_x = dataset.x.select_rows(folds[f]);
            std::vector<double> test_y;
            test_y.reserve(folds[f].size());
            for (int i : folds[f])
                test_y.push_back(dataset.targets[static_cast<std::size_t>(i)]);

            const std::vector<double> y_hat = predict(model, scaler.transform(test_x));
            result.per_fold.push_back(score_impl(test_y, y_hat, true));
        } catch (const DataError& e) {
            throw DataError("fold " + std::to_string(f + 1) + ": " + e.what());
        }
    }

    // fold averages; R^2 over the folds where it is defined
    ScoreSet mean;
    std::size_t r2_count = 0;
    for (const auto& s : result.per_fold) {
        mean.mse += s.mse;
        mean.bias += s.bias;
        mean.variance += s.variance;
        if (!std::isnan(s.r_squared)) {
            mean.r_squared += s.r_squared;
            ++r2_count;
        }
    }
    const auto nf = static_cast<double>(result.per_fold.size());
    mean.mse /= nf;
    mean.bias /= nf;
    mean.variance /= nf;
    mean.r_squared = r2_count > 0
                         ? mean.r_squared / static_cast<double>(r2_count)
                         : std::numeric_limits<double>::quiet_NaN();
    result.mean = mean;
    return result;
}

std::vector<int> IntRange::values() const {
    std::vector<int> v;
    for (int i = lo; i <= hi; ++i)
        v.push_back(i);
    return v;
}

std::size_t best_cell_index(std::span<const GridCell> cells) {
    if (cells.empty())
        throw Error("best_cell_index: empty grid");
    auto better = [](const GridCell& a, const GridCell& b) {
        const double ra = std::isnan(a.mean.r_squared)
                              ? -std::numeric_limits<double>::infinity()
                              : a.mean.r_squared;
        const double rb = std::isnan(b.mean.r_squared)
                              ? -std::numeric_limits<double>::infinity()
                              : b.mean.r_squared;
        if (ra != rb)
            return ra > rb;
        if (a.mean.mse != b.mean.mse)
            return a.mean.mse < b.mean.mse;
        if (a.estimators != b.estimators)
            return a.estimators < b.estimators;
        return a.depth < b.depth;
    };
    std::size_t best = 0;
    for (std::size_t i = 1; i < cells.size(); ++i)
        if (better(cells[i], cells[best]))
            best = i;
    return best;
}

GridResult grid_search(Algorithm algorithm, const Dataset& dataset, IntRange depths,
                       IntRange estimators, int k, std::uint64_t seed, int jobs) {
    if (depths.lo > depths.hi || estimators.lo > estimators.hi)
        throw Error("grid_search: empty range");
    if (algorithm == Algorithm::Ols)
        throw Error("grid_search: OLS has no tunable grid; use cross_validate");

    GridResult grid;
    grid.algorithm = algorithm;
    grid.depth_axis = depths.values();
    grid.estimator_axis = algorithm_has_estimators(algorithm)
                              ? estimators.values()
                              : std::vector<int>{1};
    grid.cells.resize(grid.depth_axis.size() * grid.estimator_axis.size());

    parallel_for_indexed(grid.cells.size(), jobs, [&](std::size_t idx) {
        const std::size_t di = idx / grid.estimator_axis.size();
        const std::size_t ei = idx % grid.estimator_axis.size();
        AlgorithmSpec spec;
        spec.algorithm = algorithm;
        spec.max_depth = grid.depth_axis[di];
        spec.n_estimators = grid.estimator_axis[ei];
        const CvResult cv = cross_validate(spec, dataset, k, seed);
        grid.cells[idx] = GridCell{spec.max_depth, spec.n_estimators, cv.mean};
    });

    grid.best_index = best_cell_index(grid.cells);
    return grid;
}

std::vector<AlgorithmScore> select_best(std::span<const GridResult> grids,
                                        const std::optional<CvResult>& ols,
                                        TargetKind target_kind) {
    std::vector<AlgorithmScore> rows;
    for (const auto& g : grids) {
        const GridCell& b = g.best();
        AlgorithmScore s;
        s.algorithm = g.algorithm;
        s.target_kind = target_kind;
        s.depth = b.depth;
        s.estimators = algorithm_has_estimators(g.algorithm) ? b.estimators : 0;
        s.r_squared = b.mean.r_squared;
        s.mse = b.mean.mse;
        rows.push_back(s);
    }
    if (ols) {
        AlgorithmScore s;
        s.algorithm = Algorithm::Ols;
        s.target_kind = target_kind;
        s.r_squared = ols->mean.r_squared;
        s.mse = ols->mean.mse;
        rows.push_back(s);
    }
    std::stable_sort(rows.begin(), rows.end(),
                     [](const AlgorithmScore& a, const AlgorithmScore& b) {
                         return a.r_squared > b.r_squared;
                     });
    return rows;
}

} // namespace cimpact
