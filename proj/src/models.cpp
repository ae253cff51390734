#include "cimpact/models.hpp"

#include "cimpact/errors.hpp"
#include "cimpact/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace cimpact {

// -- OLS ------------------------------------------------------------------------

namespace {

/// Cholesky factorization of symmetric positive definite `g` (in place,
/// lower triangle). Returns false on a non-positive pivot below the floor.
bool cholesky(std::vector<double>& g, std::size_t n, double pivot_floor) {
    for (std::size_t j = 0; j < n; ++j) {
        double diag = g[j * n + j];
        for (std::size_t k = 0; k < j; ++k)
            diag -= g[j * n + k] * g[j * n + k];
        if (diag <= pivot_floor)
            return false;
        const double root = std::sqrt(diag);
        g[j * n + j] = root;
        for (std::size_t i = j + 1; i < n; ++i) {
            double v = g[i * n + j];
            for (std::size_t k = 0; k < j; ++k)
                v -= g[i * n + k] * g[j * n + k];
            g[i * n + j] = v / root;
        }
    }
    return true;
}

std::vector<double> cholesky_solve(const std::vector<double>& l, std::size_t n,
                                   std::vector<double> b) {
    for (std::size_t i = 0; i < n; ++i) { // L z = b
        for (std::size_t k = 0; k < i; ++k)
            b[i] -= l[i * n + k] * b[k];
        b[i] /= l[i * n + i];
    }
    for (std::size_t i = n; i-- > 0;) { // L^T x = z
        for (std::size_t k = i + 1; k < n; ++k)
            b[i] -= l[k * n + i] * b[k];
        b[i] /= l[i * n + i];
    }
    return b;
}

} // namespace

LinearModel ols_fit(const Matrix& X, std::span<const double> y) {
    const std::size_t n = X.n_rows;
    const std::size_t d = X.n_cols;
    if (y.size() != n)
        throw DimensionMismatch("ols_fit: X rows != y length");
    if (n < d + 1)
        throw InsufficientRows("ols_fit: need at least " + std::to_string(d + 1) +
                               " rows, got " + std::to_string(n));

    // Gram matrix and right-hand side for [X | 1].
    const std::size_t m = d + 1;
    std::vector<double> gram(m * m, 0.0);
    std::vector<double> rhs(m, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
        const auto row = X.row(r);
        for (std::size_t i = 0; i < d; ++i) {
            for (std::size_t j = 0; j <= i; ++j)
                gram[i * m + j] += row[i] * row[j];
            gram[d * m + i] += row[i]; // intercept column
            rhs[i] += row[i] * y[r];
        }
        gram[d * m + d] += 1.0;
        rhs[d] += y[r];
    }
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = i + 1; j < m; ++j)
            gram[i * m + j] = gram[j * m + i];

    double max_diag = 0.0;
    for (std::size_t i = 0; i < m; ++i)
        max_diag = std::max(max_diag, gram[i * m + i]);

    LinearModel model;
    std::vector<double> fact = gram;
    if (!cholesky(fact, m, 1e-10 * max_diag)) {
        fact = gram;
        for (std::size_t i = 0; i < m; ++i)
            fact[i * m + i] += 1e-8;
        model.ridge_applied = true;
        if (!cholesky(fact, m, 0.0))
            throw Error("ols_fit: Gram matrix not solvable even with ridge term");
    }

    std::vector<double> beta = cholesky_solve(fact, m, rhs);
    model.coefficients.assign(beta.begin(), beta.begin() + d);
    model.intercept = beta[d];
    return model;
}

double LinearModel::predict_row(std::span<const double> row) const {
    double v = intercept;
    for (std::size_t i = 0; i < coefficients.size(); ++i)
        v += coefficients[i] * row[i];
    return v;
}

// -- CART -----------------------------------------------------------------------

namespace {

/// Tree builder over per-feature arrays presorted by (value, target). The
/// canonical sort keeps fits independent of training row order; partitions
/// are stable so slices stay sorted all the way down.
class TreeBuilder {
public:
    TreeBuilder(const Matrix& X, std::span<const double> y, const TreeFitParams& p,
                Rng* rng)
        : x_(X), y_(y), params_(p), rng_(rng), n_(X.n_rows), d_(X.n_cols) {
        order_.resize(d_);
        vals_.resize(d_);
        std::vector<int> base(n_);
        std::iota(base.begin(), base.end(), 0);
        for (std::size_t f = 0; f < d_; ++f) {
            order_[f] = base;
            std::sort(order_[f].begin(), order_[f].end(), [&](int a, int b) {
                const double xa = x_.at(a, f), xb = x_.at(b, f);
                if (xa != xb)
                    return xa < xb;
                return y_[a] < y_[b];
            });
            vals_[f].resize(n_);
            for (std::size_t i = 0; i < n_; ++i)
                vals_[f][i] = x_.at(order_[f][i], f);
        }
        side_.resize(n_);
        tmp_rows_.resize(n_);
        tmp_vals_.resize(n_);
        gain_.assign(d_, 0.0);
    }

    std::unique_ptr<TreeNode> build() { return grow(0, n_, 0); }
    std::vector<double> take_gain() { return std::move(gain_); }

private:
    struct Split {
        double score = -std::numeric_limits<double>::infinity();
        int feature = -1;
        double threshold = 0.0;
    };

    std::unique_ptr<TreeNode> grow(std::size_t lo, std::size_t hi, int depth) {
        const std::size_t n_node = hi - lo;
        double sum = 0.0;
        double ymin = std::numeric_limits<double>::infinity();
        double ymax = -ymin;
        for (std::size_t j = lo; j < hi; ++j) {
            const double v = y_[order_[0][j]];
            sum += v;
            ymin = std::min(ymin, v);
            ymax = std::max(ymax, v);
        }

        auto leaf = [&] {
            auto node = std::make_unique<TreeNode>();
            node->value = sum / static_cast<double>(n_node);
            node->samples = n_node;
            return node;
        };

        if (depth >= params_.max_depth ||
            n_node < static_cast<std::size_t>(params_.min_samples_split) ||
            ymin == ymax)
            return leaf();

        const Split best = find_split(lo, hi, sum);
        if (best.feature < 0)
            return leaf();

        gain_[best.feature] +=
            std::max(0.0, best.score - sum * sum / static_cast<double>(n_node));

        // Mark sides once, then stably partition every feature's slice.
        for (std::size_t j = lo; j < hi; ++j) {
            const int row = order_[best.feature][j];
            side_[row] = vals_[best.feature][j] <= best.threshold;
        }
        std::size_t n_left = 0;
        for (std::size_t f = 0; f < d_; ++f)
            n_left = partition(f, lo, hi);

        auto node = std::make_unique<TreeNode>();
        node->feature = best.feature;
        node->threshold = best.threshold;
        node->samples = n_node;
        node->value = sum / static_cast<double>(n_node);
        node->left = grow(lo, lo + n_left, depth + 1);
        node->right = grow(lo + n_left, hi, depth + 1);
        return node;
    }

    Split find_split(std::size_t lo, std::size_t hi, double total_sum) {
        const std::size_t n_node = hi - lo;
        const auto min_leaf = static_cast<std::size_t>(params_.min_samples_leaf);
        Split best;

        candidates_.clear();
        if (params_.feature_subset_size &&
            static_cast<std::size_t>(*params_.feature_subset_size) < d_ && rng_) {
            sample_features(static_cast<std::size_t>(*params_.feature_subset_size));
        } else {
            for (std::size_t f = 0; f < d_; ++f)
                candidates_.push_back(f);
        }

        for (std::size_t f : candidates_) {
            const auto& rows = order_[f];
            const auto& vals = vals_[f];
            double left_sum = 0.0;
            for (std::size_t j = lo; j + 1 < hi; ++j) {
                left_sum += y_[rows[j]];
                if (vals[j] == vals[j + 1])
                    continue; // splits fall between distinct values only
                const std::size_t k = j - lo + 1;
                if (k < min_leaf || n_node - k < min_leaf)
                    continue;
                const double right_sum = total_sum - left_sum;
                const double score =
                    left_sum * left_sum / static_cast<double>(k) +
                    right_sum * right_sum / static_cast<double>(n_node - k);
                if (score > best.score) {
                    best.score = score;
                    best.feature = static_cast<int>(f);
                    best.threshold = 0.5 * (vals[j] + vals[j + 1]);
                }
            }
        }
        return best;
    }

    /// Draws a sorted subset of feature indices without replacement.
    void sample_features(std::size_t count) {
        scratch_.resize(d_);
        std::iota(scratch_.begin(), scratch_.end(), std::size_t{0});
        for (std::size_t i = 0; i < count; ++i) {
            const std::size_t j =
                i + static_cast<std::size_t>(rng_->uniform_below(d_ - i));
            std::swap(scratch_[i], scratch_[j]);
        }
        candidates_.assign(scratch_.begin(), scratch_.begin() + count);
        std::sort(candidates_.begin(), candidates_.end());
    }

    std::size_t partition(std::size_t f, std::size_t lo, std::size_t hi) {
        auto& rows = order_[f];
        auto& vals = vals_[f];
        std::size_t nl = 0, nr = 0;
        const std::size_t n_node = hi - lo;
        for (std::size_t j = lo; j < hi; ++j) {
            const int row = rows[j];
            if (side_[row]) {
                tmp_rows_[nl] = row;
                tmp_vals_[nl] = vals[j];
                ++nl;
            } else {
                tmp_rows_[n_node - 1 - nr] = row; // reversed; fixed below
                tmp_vals_[n_node - 1 - nr] = vals[j];
                ++nr;
            }
        }
        std::copy(tmp_rows_.begin(), tmp_rows_.begin() + nl, rows.begin() + lo);
        std::copy(tmp_vals_.begin(), tmp_vals_.begin() + nl, vals.begin() + lo);
        // right side was written back to front; restore stable order
        for (std::size_t j = 0; j < nr; ++j) {
            rows[lo + nl + j] = tmp_rows_[n_node - 1 - j];
            vals[lo + nl + j] = tmp_vals_[n_node - 1 - j];
        }
        return nl;
    }

    const Matrix& x_;
    std::span<const double> y_;
    const TreeFitParams& params_;
    Rng* rng_;
    std::size_t n_, d_;
    std::vector<std::vector<int>> order_;
    std::vector<std::vector<double>> vals_;
    std::vector<char> side_;
    std::vector<int> tmp_rows_;
    std::vector<double> tmp_vals_;
    std::vector<std::size_t> candidates_, scratch_;
    std::vector<double> gain_;
};

} // namespace

Tree tree_fit(const Matrix& X, std::span<const double> y, const TreeFitParams& params,
              Rng* rng) {
    if (X.n_rows == 0)
        throw InsufficientRows("tree_fit: need at least one row");
    if (y.size() != X.n_rows)
        throw DimensionMismatch("tree_fit: X rows != y length");
    if (params.max_depth < 1)
        throw Error("tree_fit: max_depth must be >= 1");
    for (double v : X.data)
        if (!std::isfinite(v))
            throw DataError("tree_fit: non-finite feature value");
    for (double v : y)
        if (!std::isfinite(v))
            throw DataError("tree_fit: non-finite target value");

    TreeBuilder builder(X, y, params, rng);
    Tree tree;
    tree.root = builder.build();
    tree.n_features = X.n_cols;
    tree.split_gain = builder.take_gain();
    return tree;
}

double Tree::predict_row(std::span<const double> row) const {
    const TreeNode* node = root.get();
    while (!node->is_leaf())
        node = row[static_cast<std::size_t>(node->feature)] <= node->threshold
                   ? node->left.get()
                   : node->right.get();
    return node->value;
}

// -- ensembles ------------------------------------------------------------------

namespace {
constexpr std::uint64_t kTagForestTree = 0x666f7265; // stream tags
constexpr std::uint64_t kTagBoost = 0x61646142;
} // namespace

EnsembleModel forest_fit(const Matrix& X, std::span<const double> y,
                         const ForestFitParams& params, std::uint64_t seed,
                         int jobs) {
    if (params.n_estimators < 1)
        throw Error("forest_fit: n_estimators must be >= 1");
    const std::size_t n = X.n_rows;
    const std::size_t d = X.n_cols;

    int subset = params.feature_subset_size
                     ? *params.feature_subset_size
                     : static_cast<int>(std::ceil(std::sqrt(static_cast<double>(d))));
    subset = std::clamp(subset, 1, static_cast<int>(d));

    TreeFitParams tp;
    tp.max_depth = params.max_depth;
    tp.min_samples_split = params.min_samples_split;
    tp.min_samples_leaf = params.min_samples_leaf;
    if (static_cast<std::size_t>(subset) < d)
        tp.feature_subset_size = subset;

    EnsembleModel model;
    model.combine = Combine::Mean;
    model.seed = seed;
    model.n_features = d;
    model.trees.resize(static_cast<std::size_t>(params.n_estimators));
    model.weights.assign(model.trees.size(), 1.0);

    parallel_for_indexed(model.trees.size(), jobs, [&](std::size_t t) {
        Rng rng = Rng::derive(seed, {kTagForestTree, t});
        if (params.bootstrap) {
            std::vector<int> sample(n);
            for (std::size_t i = 0; i < n; ++i)
                sample[i] = static_cast<int>(rng.uniform_below(n));
            Matrix xb = X.select_rows(sample);
            std::vector<double> yb(n);
            for (std::size_t i = 0; i < n; ++i)
                yb[i] = y[static_cast<std::size_t>(sample[i])];
            model.trees[t] = tree_fit(xb, yb, tp, &rng);
        } else {
            model.trees[t] = tree_fit(X, y, tp, &rng);
        }
    });
    return model;
}

EnsembleModel adaboost_fit(const Matrix& X, std::span<const double> y,
                           const AdaboostFitParams& params, std::uint64_t seed) {
    if (params.n_estimators < 1)
        throw Error("adaboost_fit: n_estimators must be >= 1");
    const std::size_t n = X.n_rows;
    if (n == 0)
        throw InsufficientRows("adaboost_fit: need at least one row");

    TreeFitParams tp;
    tp.max_depth = params.max_depth;
    tp.min_samples_split = params.min_samples_split;
    tp.min_samples_leaf = params.min_samples_leaf;

    EnsembleModel model;
    model.combine = Combine::WeightedMedian;
    model.seed = seed;
    model.n_features = X.n_cols;

    std::vector<double> w(n, 1.0 / static_cast<double>(n));
    std::vector<double> cdf(n);
    std::vector<int> sample(n);
    std::vector<double> losses(n);

    for (int round = 0; round < params.n_estimators; ++round) {
        Rng rng = Rng::derive(seed, {kTagBoost, static_cast<std::uint64_t>(round)});

        // weighted bootstrap sample by current example weights
        std::partial_sum(w.begin(), w.end(), cdf.begin());
        const double total = cdf.back();
        for (std::size_t i = 0; i < n; ++i) {
            const double u = rng.uniform01() * total;
            sample[i] = static_cast<int>(
                std::lower_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        }
        Matrix xb = X.select_rows(sample);
        std::vector<double> yb(n);
        for (std::size_t i = 0; i < n; ++i)
            yb[i] = y[static_cast<std::size_t>(sample[i])];

        Tree tree = tree_fit(xb, yb, tp, &rng);

        double max_err = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            losses[i] = std::fabs(tree.predict_row(X.row(i)) - y[i]);
            max_err = std::max(max_err, losses[i]);
        }

        if (max_err == 0.0) {
            // perfect base learner; it should dominate the median
            model.trees.push_back(std::move(tree));
            model.weights.push_back(std::log(1.0 / 1e-300));
            if (round == 0)
                model.degenerate_round = true;
            break;
        }

        double avg_loss = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double l = losses[i] / max_err;
            switch (params.loss) {
            case BoostLoss::Linear:
                break;
            case BoostLoss::Square:
                l = l * l;
                break;
            case BoostLoss::Exponential:
                l = 1.0 - std::exp(-l);
                break;
            }
            losses[i] = l;
            avg_loss += w[i] * l;
        }

        if (avg_loss >= 0.5) {
            if (model.trees.empty()) { // keep something predictive
                model.trees.push_back(std::move(tree));
                model.weights.push_back(1.0);
            }
            break;
        }

        const double beta = avg_loss / (1.0 - avg_loss);
        model.trees.push_back(std::move(tree));
        model.weights.push_back(std::log(1.0 / beta));

        double wsum = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            w[i] *= std::pow(beta, 1.0 - losses[i]);
            wsum += w[i];
        }
        for (double& wi : w)
            wi /= wsum;
    }
    return model;
}

double weighted_median(std::vector<std::pair<double, double>> value_weight) {
    std::sort(value_weight.begin(), value_weight.end());
    double total = 0.0;
    for (const auto& [v, wt] : value_weight)
        total += wt;
    double cum = 0.0;
    for (const auto& [v, wt] : value_weight) {
        cum += wt;
        if (cum >= 0.5 * total)
            return v;
    }
    return value_weight.back().first;
}

double EnsembleModel::predict_row(std::span<const double> row) const {
    if (combine == Combine::Mean) {
        double sum = 0.0;
        for (const auto& t : trees)
            sum += t.predict_row(row);
        return sum / static_cast<double>(trees.size());
    }
    std::vector<std::pair<double, double>> vw;
    vw.reserve(trees.size());
    for (std::size_t i = 0; i < trees.size(); ++i)
        vw.emplace_back(trees[i].predict_row(row), weights[i]);
    return weighted_median(std::move(vw));
}

// -- generic model ----------------------------------------------------------------

namespace {

std::size_t model_width(const Model& model) {
    return std::visit(
        [](const auto& m) -> std::size_t {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LinearModel>)
                return m.coefficients.size();
            else
                return m.n_features;
        },
        model);
}

} // namespace

double predict_row(const Model& model, std::span<const double> row) {
    if (row.size() != model_width(model))
        throw DimensionMismatch("predict: row width " + std::to_string(row.size()) +
                                " != training width " +
                                std::to_string(model_width(model)));
    return std::visit([&](const auto& m) { return m.predict_row(row); }, model);
}

std::vector<double> predict(const Model& model, const Matrix& rows) {
    if (rows.n_cols != model_width(model))
        throw DimensionMismatch("predict: row width " + std::to_string(rows.n_cols) +
                                " != training width " +
                                std::to_string(model_width(model)));
    std::vector<double> out(rows.n_rows);
    for (std::size_t r = 0; r < rows.n_rows; ++r)
        out[r] = std::visit([&](const auto& m) { return m.predict_row(rows.row(r)); },
                            model);
    return out;
}

// -- persistence --------------------------------------------------------------------

namespace {

nlohmann::json node_to_json(const TreeNode& node) {
    nlohmann::json j;
    j["samples"] = node.samples;
    if (node.is_leaf()) {
        j["value"] = node.value;
    } else {
        j["feature"] = node.feature;
        j["threshold"] = node.threshold;
        j["left"] = node_to_json(*node.left);
        j["right"] = node_to_json(*node.right);
    }
    return j;
}

std::unique_ptr<TreeNode> node_from_json(const nlohmann::json& j) {
    auto node = std::make_unique<TreeNode>();
    node->samples = j.value("samples", std::size_t{0});
    if (j.contains("feature")) {
        node->feature = j.at("feature").get<int>();
        node->threshold = j.at("threshold").get<double>();
        node->left = node_from_json(j.at("left"));
        node->right = node_from_json(j.at("right"));
        node->value =
            (node->left->value * static_cast<double>(node->left->samples) +
             node->right->value * static_cast<double>(node->right->samples)) /
            static_cast<double>(std::max<std::size_t>(node->samples, 1));
    } else {
        node->value = j.at("value").get<double>();
    }
    return node;
}

} // namespace

nlohmann::json model_to_json(const Model& model) {
    nlohmann::json j;
    if (const auto* lin = std::get_if<LinearModel>(&model)) {
        j["type"] = "linear";
        j["coefficients"] = lin->coefficients;
        j["intercept"] = lin->intercept;
        j["ridge_applied"] = lin->ridge_applied;
    } else if (const auto* tree = std::get_if<Tree>(&model)) {
        j["type"] = "tree";
        j["n_features"] = tree->n_features;
        j["root"] = node_to_json(*tree->root);
    } else {
        const auto& ens = std::get<EnsembleModel>(model);
        j["type"] = "ensemble";
        j["combine"] = ens.combine == Combine::Mean ? "mean" : "weighted_median";
        j["weights"] = ens.weights;
        j["seed"] = ens.seed;
        j["n_features"] = ens.n_features;
        j["degenerate_round"] = ens.degenerate_round;
        nlohmann::json trees = nlohmann::json::array();
        for (const auto& t : ens.trees)
            trees.push_back(node_to_json(*t.root));
        j["trees"] = std::move(trees);
    }
    return j;
}

Model model_from_json(const nlohmann::json& j) {
    const std::string type = j.at("type").get<std::string>();
    if (type == "linear") {
        LinearModel m;
        m.coefficients = j.at("coefficients").get<std::vector<double>>();
        m.intercept = j.at("intercept").get<double>();
        m.ridge_applied = j.value("ridge_applied", false);
        return m;
    }
    if (type == "tree") {
        Tree t;
        t.n_features = j.at("n_features").get<std::size_t>();
        t.root = node_from_json(j.at("root"));
        return t;
    }
    if (type == "ensemble") {
        EnsembleModel e;
        e.combine = j.at("combine").get<std::string>() == "mean"
                        ? Combine::Mean
                        : Combine::WeightedMedian;
        e.weights = j.at("weights").get<std::vector<double>>();
        e.seed = j.value("seed", std::uint64_t{0});
        e.n_features = j.at("n_features").get<std::size_t>();
        e.degenerate_round = j.value("degenerate_round", false);
        for (const auto& tj : j.at("trees")) {
            Tree t;
            t.n_features = e.n_features;
            t.root = node_from_json(tj);
            e.trees.push_back(std::move(t));
        }
        return e;
    }
    throw DataError("unknown model type in JSON: " + type);
}

} // namespace cimpact
