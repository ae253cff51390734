#pragma once

#include <algorithm>
#include <cassert>
#include <cstddef>
#include <span>
#include <vector>

namespace cimpact {

/// Dense row-major matrix of doubles. Just enough linear-algebra plumbing
/// for feature matrices and the normal equations.
struct Matrix {
    std::size_t n_rows = 0;
    std::size_t n_cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : n_rows(rows), n_cols(cols), data(rows * cols, fill) {}

    double& at(std::size_t r, std::size_t c) {
        assert(r < n_rows && c < n_cols);
        return data[r * n_cols + c];
    }
    double at(std::size_t r, std::size_t c) const {
        assert(r < n_rows && c < n_cols);
        return data[r * n_cols + c];
    }

    std::span<const double> row(std::size_t r) const {
        assert(r < n_rows);
        return {data.data() + r * n_cols, n_cols};
    }
    std::span<double> row(std::size_t r) {
        assert(r < n_rows);
        return {data.data() + r * n_cols, n_cols};
    }

    void push_row(std::span<const double> values) {
        assert(n_rows == 0 ? true : values.size() == n_cols);
        if (n_rows == 0 && n_cols == 0)
            n_cols = values.size();
        data.insert(data.end(), values.begin(), values.end());
        ++n_rows;
    }

    /// Rows selected by index, in the given order.
    Matrix select_rows(std::span<const int> idx) const {
        Matrix out(idx.size(), n_cols);
        for (std::size_t i = 0; i < idx.size(); ++i) {
            auto src = row(static_cast<std::size_t>(idx[i]));
            std::copy(src.begin(), src.end(), out.row(i).begin());
        }
        return out;
    }

    /// Columns selected by index, in the given order.
    Matrix select_cols(std::span<const std::size_t> idx) const {
        Matrix out(n_rows, idx.size());
        for (std::size_t r = 0; r < n_rows; ++r)
            for (std::size_t j = 0; j < idx.size(); ++j)
                out.at(r, j) = at(r, idx[j]);
        return out;
    }
};

} // namespace cimpact
