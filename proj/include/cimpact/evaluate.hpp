#pragma once

#include "cimpact/features.hpp"
#include "cimpact/models.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace cimpact {

/// Held-out error summary. mse = bias^2 + variance by construction
/// (mean of squares = square of mean + population variance).
struct ScoreSet {
    double r_squared = 0.0;
    double mse = 0.0;
    double bias = 0.0;     // mean of (prediction - truth)
    double variance = 0.0; // population variance of the errors
};

/// Throws ZeroVarianceTarget when Var(y) is zero (R^2 undefined).
ScoreSet score(std::span<const double> y, std::span<const double> y_hat);

/// Seeded shuffle then contiguous chunks: disjoint folds covering 0..n-1
/// whose sizes differ by at most one. Throws TooFewRows when n < k.
std::vector<std::vector<int>> kfold(std::size_t n, int k, std::uint64_t seed);

enum class Algorithm { Ols, DecisionTree, RandomForest, RfAdaboost };

std::string_view algorithm_name(Algorithm a);
Algorithm parse_algorithm(std::string_view name);
/// True for algorithms tuned on both grid axes (estimators and depth).
bool algorithm_has_estimators(Algorithm a);

struct AlgorithmSpec {
    Algorithm algorithm = Algorithm::RfAdaboost;
    int max_depth = 8;
    int n_estimators = 12;
    BoostLoss loss = BoostLoss::Linear;
};

/// Fits the spec on the (raw) training rows after fitting a fresh min-max
/// scaler on them, and returns the trained model plus that scaler.
std::pair<Model, Scaler> fit_spec(const AlgorithmSpec& spec, const Dataset& dataset,
                                  std::uint64_t seed, int jobs = 1);

struct CvResult {
    ScoreSet mean;
    std::vector<ScoreSet> per_fold;
};

/// 10-fold style cross validation: the scaler is fitted inside each training
/// split and applied to the held-out fold, so no information leaks. A fold
/// whose targets have zero variance reports NaN R^2; the mean R^2 averages
/// the defined folds.
CvResult cross_validate(const AlgorithmSpec& spec, const Dataset& dataset, int k,
                        std::uint64_t seed);

// -- hyperparameter grid ----------------------------------------------------------

struct GridCell {
    int depth = 0;
    int estimators = 0;
    ScoreSet mean;
};

struct GridResult {
    Algorithm algorithm = Algorithm::DecisionTree;
    std::vector<int> depth_axis;
    std::vector<int> estimator_axis; // {1} placeholder axis for depth-only DT
    std::vector<GridCell> cells;     // depth-major order
    std::size_t best_index = 0;

    const GridCell& best() const { return cells[best_index]; }
};

struct IntRange {
    int lo = 1;
    int hi = 20;

    std::vector<int> values() const;
};

/// Cross-validates every grid cell. The best cell maximizes mean R^2; ties
/// break on minimal mean MSE, then fewer estimators, then smaller depth.
/// Cells are independent work items spread over `jobs` threads and merged
/// by index, so the result does not depend on scheduling.
GridResult grid_search(Algorithm algorithm, const Dataset& dataset, IntRange depths,
                       IntRange estimators, int k, std::uint64_t seed, int jobs = 1);

/// Index of the best cell under the grid_search rule; also usable on a
/// re-imported grid export to cross-check bookkeeping.
std::size_t best_cell_index(std::span<const GridCell> cells);

struct AlgorithmScore {
    Algorithm algorithm = Algorithm::Ols;
    TargetKind target_kind = TargetKind::Count;
    int depth = 0;      // 0 when the algorithm has no such knob
    int estimators = 0; // 0 when the algorithm has no such knob
    double r_squared = 0.0;
    double mse = 0.0;
};

/// Table 4/5-shaped comparison, descending R^2.
std::vector<AlgorithmScore> select_best(std::span<const GridResult> grids,
                                        const std::optional<CvResult>& ols,
                                        TargetKind target_kind);

} // namespace cimpact
