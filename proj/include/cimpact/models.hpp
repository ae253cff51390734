#pragma once

#include "cimpact/matrix.hpp"
#include "cimpact/rng.hpp"

#include <json.hpp>

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <variant>
#include <vector>

namespace cimpact {

// -- linear model -------------------------------------------------------------

struct LinearModel {
    std::vector<double> coefficients; // one per feature
    double intercept = 0.0;
    bool ridge_applied = false; // fit metadata: normal equations were singular

    double predict_row(std::span<const double> row) const;
};

/// Least squares through the normal equations with an intercept column.
/// A Gram matrix singular within relative tolerance 1e-10 gets a ridge term
/// of 1e-8 on the diagonal, recorded via ridge_applied.
LinearModel ols_fit(const Matrix& X, std::span<const double> y);

// -- regression tree ------------------------------------------------------------

struct TreeNode {
    int feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    double value = 0.0; // leaf: mean of training targets reaching it
    std::size_t samples = 0;
    std::unique_ptr<TreeNode> left;
    std::unique_ptr<TreeNode> right;

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::unique_ptr<TreeNode> root;
    std::size_t n_features = 0;
    /// Total SSE reduction attributed to each feature's splits (fit
    /// metadata, consumed by wrapper feature selection; not persisted).
    std::vector<double> split_gain;

    double predict_row(std::span<const double> row) const;
};

struct TreeFitParams {
    int max_depth = 8; // number of split levels below the root
    int min_samples_split = 2;
    int min_samples_leaf = 1;
    std::optional<int> feature_subset_size; // per split; absent = all features
};

/// CART: each node scans midpoints of consecutive sorted distinct values per
/// candidate feature and takes the split minimizing weighted child variance.
/// Ties break on lowest feature index, then smallest threshold, so the fit
/// does not depend on training row order. `rng` is only consulted when a
/// feature subset size is set.
Tree tree_fit(const Matrix& X, std::span<const double> y, const TreeFitParams& params,
              Rng* rng = nullptr);

// -- ensembles ------------------------------------------------------------------

enum class Combine { Mean, WeightedMedian };

struct EnsembleModel {
    std::vector<Tree> trees;
    std::vector<double> weights; // uniform for bagging, ln(1/beta) for boosting
    Combine combine = Combine::Mean;
    std::uint64_t seed = 0;
    std::size_t n_features = 0;
    bool degenerate_round = false; // boosting round 1 fit the sample exactly

    double predict_row(std::span<const double> row) const;
};

struct ForestFitParams {
    int n_estimators = 10;
    int max_depth = 8;
    bool bootstrap = true;
    /// Features considered per split; absent = ceil(sqrt(n_features)).
    std::optional<int> feature_subset_size;
    int min_samples_split = 2;
    int min_samples_leaf = 1;
};

/// Bagged trees: each base tree sees a bootstrap resample (n draws with
/// replacement) and per-split feature subsets; prediction is the mean.
/// Fully deterministic given the seed; trees may build in parallel because
/// each consumes its own seed-derived stream.
EnsembleModel forest_fit(const Matrix& X, std::span<const double> y,
                         const ForestFitParams& params, std::uint64_t seed,
                         int jobs = 1);

enum class BoostLoss { Linear, Square, Exponential };

struct AdaboostFitParams {
    int n_estimators = 10;
    int max_depth = 8;
    BoostLoss loss = BoostLoss::Linear;
    int min_samples_split = 2;
    int min_samples_leaf = 1;
};

/// AdaBoost.R2 over depth-limited trees. Example weights are realized by
/// weighted bootstrap resampling; rounds stop early when the average loss
/// reaches 0.5 or a base learner fits exactly. Prediction is the weighted
/// median of base predictions.
EnsembleModel adaboost_fit(const Matrix& X, std::span<const double> y,
                           const AdaboostFitParams& params, std::uint64_t seed);

/// Weighted median with the cumulative rule: smallest v whose cumulative
/// weight reaches half the total.
double weighted_median(std::vector<std::pair<double, double>> value_weight);

// -- generic model --------------------------------------------------------------

using Model = std::variant<LinearModel, Tree, EnsembleModel>;

double predict_row(const Model& model, std::span<const double> row);
/// Throws DimensionMismatch when the row width differs from training width.
std::vector<double> predict(const Model& model, const Matrix& rows);

nlohmann::json model_to_json(const Model& model);
Model model_from_json(const nlohmann::json& j);

} // namespace cimpact
