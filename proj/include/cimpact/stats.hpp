#pragma once

#include <span>

namespace cimpact {

struct TTestResult {
    double t_statistic = 0.0;
    double degrees_of_freedom = 0.0;
    double p_value = 1.0;
    bool significant = false;
};

/// ln Gamma(x) for x > 0, Lanczos series. Implemented here (rather than
/// std::lgamma) so results do not depend on the platform libm.
double ln_gamma(double x);

/// Regularized incomplete beta I_x(a, b), continued-fraction evaluation at
/// relative tolerance 1e-12 with at most 300 iterations.
double incomplete_beta(double a, double b, double x);

/// Student-t CDF. Throws NonFiniteInput unless t is finite and df > 0.
double t_cdf(double t, double df);

/// Two-sided Welch (unequal-variance) t-test of post against pre.
/// t > 0 means the post mean is larger. Throws DegenerateSample when either
/// sample has fewer than two elements or both variances are zero.
TTestResult welch_t_test(std::span<const double> pre, std::span<const double> post,
                         double alpha);

} // namespace cimpact
