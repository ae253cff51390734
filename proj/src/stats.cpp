#include "cimpact/stats.hpp"

#include "cimpact/errors.hpp"

#include <cmath>
#include <cstddef>

namespace cimpact {

namespace {

constexpr double kBetaTol = 1e-12;
constexpr int kBetaMaxIter = 300;

/// Lentz's algorithm for the continued fraction of the incomplete beta,
/// valid for x < (a+1)/(a+b+2).
double beta_cont_fraction(double a, double b, double x) {
    const double tiny = 1e-30;
    const double qab = a + b;
    const double qap = a + 1.0;
    const double qam = a - 1.0;

    double c = 1.0;
    double d = 1.0 - qab * x / qap;
    if (std::fabs(d) < tiny)
        d = tiny;
    d = 1.0 / d;
    double h = d;

    for (int m = 1; m <= kBetaMaxIter; ++m) {
        const int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny)
            d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny)
            c = tiny;
        d = 1.0 / d;
        h *= d * c;

        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::fabs(d) < tiny)
            d = tiny;
        c = 1.0 + aa / c;
        if (std::fabs(c) < tiny)
            c = tiny;
        d = 1.0 / d;
        const double del = d * c;
        h *= del;
        if (std::fabs(del - 1.0) < kBetaTol)
            return h;
    }
    throw Error("incomplete_beta: continued fraction did not converge");
}

} // namespace

double ln_gamma(double x) {
    // Lanczos approximation, g = 5, n = 6 (Numerical Recipes coefficients).
    static const double cof[6] = {76.18009172947146,     -86.50532032941677,
                                  24.01409824083091,     -1.231739572450155,
                                  0.1208650973866179e-2, -0.5395239384953e-5};
    double y = x;
    double tmp = x + 5.5;
    tmp -= (x + 0.5) * std::log(tmp);
    double ser = 1.000000000190015;
    for (int j = 0; j < 6; ++j)
        ser += cof[j] / ++y;
    return -tmp + std::log(2.5066282746310005 * ser / x);
}

double incomplete_beta(double a, double b, double x) {
    if (x <= 0.0)
        return 0.0;
    if (x >= 1.0)
        return 1.0;
    const double ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) +
                            a * std::log(x) + b * std::log(1.0 - x);
    const double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0))
        return front * beta_cont_fraction(a, b, x) / a;
    return 1.0 - front * beta_cont_fraction(b, a, 1.0 - x) / b;
}

double t_cdf(double t, double df) {
    if (!std::isfinite(t) || !std::isfinite(df) || df <= 0.0)
        throw NonFiniteInput("t_cdf requires finite t and df > 0");
    if (t == 0.0)
        return 0.5;
    const double x = df / (df + t * t);
    const double half_tail = 0.5 * incomplete_beta(0.5 * df, 0.5, x);
    return t > 0.0 ? 1.0 - half_tail : half_tail;
}

TTestResult welch_t_test(std::span<const double> pre, std::span<const double> post,
                         double alpha) {
    const std::size_t n1 = pre.size();
    const std::size_t n2 = post.size();
    if (n1 < 2 || n2 < 2)
        throw DegenerateSample("welch_t_test: both samples need >= 2 elements");

    auto mean = [](std::span<const double> v) {
        double s = 0.0;
        for (double x : v)
            s += x;
        return s / static_cast<double>(v.size());
    };
    auto sample_var = [&](std::span<const double> v, double m) {
        double s = 0.0;
        for (double x : v)
            s += (x - m) * (x - m);
        return s / static_cast<double>(v.size() - 1);
    };

    const double m1 = mean(pre);
    const double m2 = mean(post);
    const double v1 = sample_var(pre, m1);
    const double v2 = sample_var(post, m2);
    if (v1 == 0.0 && v2 == 0.0)
        throw DegenerateSample("welch_t_test: both samples have zero variance");

    const double se1 = v1 / static_cast<double>(n1);
    const double se2 = v2 / static_cast<double>(n2);
    const double se = std::sqrt(se1 + se2);
    const double t = (m2 - m1) / se;

    // Welch-Satterthwaite degrees of freedom
    const double df = (se1 + se2) * (se1 + se2) /
                      (se1 * se1 / static_cast<double>(n1 - 1) +
                       se2 * se2 / static_cast<double>(n2 - 1));

    double p = 2.0 * (1.0 - t_cdf(std::fabs(t), df));
    if (p > 1.0)
        p = 1.0;
    if (p < 0.0)
        p = 0.0;

    return TTestResult{t, df, p, p < alpha};
}

} // namespace cimpact
